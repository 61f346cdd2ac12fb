#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchloop {

// Enum values double as the raster cell codes (0 is reserved for "empty").
enum class Shape : uint8_t {
  Circle = 1, Square = 2, Triangle = 3, Star = 4, Cross = 5, Diamond = 6,
};
enum class Color : uint8_t {
  Red = 1, Green = 2, Blue = 3, Yellow = 4, Purple = 5, Orange = 6,
};

// Surface relation vocabulary. Graphs store only the normalized directions
// (above, left-of); below/right-of are folded into their inverses at parse.
enum class Relation : uint8_t { Above, Below, LeftOf, RightOf };

constexpr int kShapeCount = 6;
constexpr int kColorCount = 6;

const std::string& shape_name(Shape s);
const std::string& color_name(Color c);
const std::string& relation_name(Relation r);
std::optional<Shape> shape_from_name(const std::string& w);
std::optional<Color> color_from_name(const std::string& w);
std::optional<Relation> relation_from_name(const std::string& w);

// Canonical ordering ranks follow the lexicographic order of the names, so
// sorted output matches what a plain string sort of the clauses would give.
int shape_rank(Shape s);
int color_rank(Color c);
Relation inverse_relation(Relation r);

Shape shape_from_code(int code);   // throws std::out_of_range on bad code
Color color_from_code(int code);

struct ObjectKey {
  Shape shape{};
  Color color{};
  uint8_t index = 1;  // disambiguates objects sharing (shape, color)

  friend bool operator==(const ObjectKey&, const ObjectKey&) = default;
};
// Orders by (shape, color, index) using name ranks.
bool key_less(const ObjectKey& a, const ObjectKey& b);
std::string key_to_string(const ObjectKey& k);  // debug form, always indexed

struct RelationEdge {
  Relation rel{};  // normalized: Above or LeftOf only
  ObjectKey subject;
  ObjectKey object;

  friend bool operator==(const RelationEdge&, const RelationEdge&) = default;
};

// Value type: objects and relations are kept sorted in canonical order, so
// structural equality is plain field equality.
struct SceneGraph {
  std::vector<ObjectKey> objects;
  std::vector<RelationEdge> relations;

  bool has_object(const ObjectKey& k) const;
  // Objects matching (shape, color), sorted by index.
  std::vector<ObjectKey> group(Shape s, Color c) const;
  void insert_object(const ObjectKey& k);      // keeps sort, throws on dup
  void erase_object(const ObjectKey& k);       // drops incident relations
  void insert_relation(const RelationEdge& e); // normalizes sort, dedupes
  void normalize();                            // re-sorts both vectors

  friend bool operator==(const SceneGraph&, const SceneGraph&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(size_t position, const std::string& expected,
             const std::string& detail);
  size_t position;       // character offset into the input
  std::string expected;  // what the parser wanted at that point
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  std::vector<std::string> violations;
};

enum class ParseMode {
  FullPrompt,       // every object reference must carry a color
  StepInstruction,  // colorless references allowed, resolved against the scene
};

// Parses the scene DSL. Grammar (whitespace separated, ';' splits clauses):
//   scene  := clause { ";" clause }
//   clause := objref [ relation objref ]
//   objref := [count] [color] shape [ "#" index ]
// First mention of a key introduces the object; later mentions reference it.
// Throws ParseError on syntax problems and ValidationError when the parsed
// graph breaks a structural invariant.
SceneGraph parse_scene(const std::string& text,
                       ParseMode mode = ParseMode::FullPrompt);

// Canonical form: standalone clauses (count-collapsed where the whole
// (shape, color) group is 1..m) for objects that are not the subject of any
// relation, sorted by key, then relation clauses sorted as strings.
std::string print_scene(const SceneGraph& g);

// Reference string for one object as it would appear inside a clause:
// "color shape" with "#k" appended when the group is shared or k != 1.
std::string object_ref_string(const SceneGraph& g, const ObjectKey& k);

// Returns all invariant violations (empty means valid): endpoints must
// exist, keys unique, 1..8 objects, no self-relations, and the per-axis
// constraint digraphs must be acyclic.
std::vector<std::string> validate(const SceneGraph& g);

}  // namespace sketchloop
