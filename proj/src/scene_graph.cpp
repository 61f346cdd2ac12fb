#include "sketchloop/scene_graph.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <sstream>

namespace sketchloop {

namespace {

const std::array<std::string, 7> kShapeNames = {
    "", "circle", "square", "triangle", "star", "cross", "diamond"};
const std::array<std::string, 7> kColorNames = {
    "", "red", "green", "blue", "yellow", "purple", "orange"};
const std::array<std::string, 4> kRelationNames = {
    "above", "below", "left-of", "right-of"};

// Name-lexicographic ranks, indexed by enum value.
const std::array<int, 7> kShapeRanks = {-1, 0, 3, 5, 4, 1, 2};
const std::array<int, 7> kColorRanks = {-1, 4, 1, 0, 5, 3, 2};

}  // namespace

const std::string& shape_name(Shape s) {
  return kShapeNames[static_cast<size_t>(s)];
}
const std::string& color_name(Color c) {
  return kColorNames[static_cast<size_t>(c)];
}
const std::string& relation_name(Relation r) {
  return kRelationNames[static_cast<size_t>(r)];
}

std::optional<Shape> shape_from_name(const std::string& w) {
  for (size_t i = 1; i < kShapeNames.size(); ++i)
    if (kShapeNames[i] == w) return static_cast<Shape>(i);
  return std::nullopt;
}

std::optional<Color> color_from_name(const std::string& w) {
  for (size_t i = 1; i < kColorNames.size(); ++i)
    if (kColorNames[i] == w) return static_cast<Color>(i);
  return std::nullopt;
}

std::optional<Relation> relation_from_name(const std::string& w) {
  for (size_t i = 0; i < kRelationNames.size(); ++i)
    if (kRelationNames[i] == w) return static_cast<Relation>(i);
  return std::nullopt;
}

int shape_rank(Shape s) { return kShapeRanks[static_cast<size_t>(s)]; }
int color_rank(Color c) { return kColorRanks[static_cast<size_t>(c)]; }

Relation inverse_relation(Relation r) {
  switch (r) {
    case Relation::Above: return Relation::Below;
    case Relation::Below: return Relation::Above;
    case Relation::LeftOf: return Relation::RightOf;
    case Relation::RightOf: return Relation::LeftOf;
  }
  return Relation::Above;
}

Shape shape_from_code(int code) {
  if (code < 1 || code > kShapeCount)
    throw std::out_of_range("shape code out of range: " + std::to_string(code));
  return static_cast<Shape>(code);
}

Color color_from_code(int code) {
  if (code < 1 || code > kColorCount)
    throw std::out_of_range("color code out of range: " + std::to_string(code));
  return static_cast<Color>(code);
}

bool key_less(const ObjectKey& a, const ObjectKey& b) {
  if (shape_rank(a.shape) != shape_rank(b.shape))
    return shape_rank(a.shape) < shape_rank(b.shape);
  if (color_rank(a.color) != color_rank(b.color))
    return color_rank(a.color) < color_rank(b.color);
  return a.index < b.index;
}

std::string key_to_string(const ObjectKey& k) {
  return color_name(k.color) + " " + shape_name(k.shape) + "#" +
         std::to_string(k.index);
}

namespace {

bool edge_less(const RelationEdge& a, const RelationEdge& b) {
  if (a.subject != b.subject) return key_less(a.subject, b.subject);
  if (a.rel != b.rel) return relation_name(a.rel) < relation_name(b.rel);
  if (a.object != b.object) return key_less(a.object, b.object);
  return false;
}

RelationEdge normalized(RelationEdge e) {
  if (e.rel == Relation::Below || e.rel == Relation::RightOf) {
    std::swap(e.subject, e.object);
    e.rel = inverse_relation(e.rel);
  }
  return e;
}

}  // namespace

bool SceneGraph::has_object(const ObjectKey& k) const {
  return std::find(objects.begin(), objects.end(), k) != objects.end();
}

std::vector<ObjectKey> SceneGraph::group(Shape s, Color c) const {
  std::vector<ObjectKey> out;
  for (const auto& o : objects)
    if (o.shape == s && o.color == c) out.push_back(o);
  return out;
}

void SceneGraph::insert_object(const ObjectKey& k) {
  if (has_object(k))
    throw ValidationError({"duplicate object key " + key_to_string(k)});
  objects.push_back(k);
  std::sort(objects.begin(), objects.end(), key_less);
}

void SceneGraph::erase_object(const ObjectKey& k) {
  objects.erase(std::remove(objects.begin(), objects.end(), k), objects.end());
  relations.erase(std::remove_if(relations.begin(), relations.end(),
                                 [&](const RelationEdge& e) {
                                   return e.subject == k || e.object == k;
                                 }),
                  relations.end());
}

void SceneGraph::insert_relation(const RelationEdge& e) {
  RelationEdge n = normalized(e);
  if (std::find(relations.begin(), relations.end(), n) != relations.end())
    return;
  relations.push_back(n);
  std::sort(relations.begin(), relations.end(), edge_less);
}

void SceneGraph::normalize() {
  for (auto& e : relations) e = normalized(e);
  std::sort(objects.begin(), objects.end(), key_less);
  std::sort(relations.begin(), relations.end(), edge_less);
  relations.erase(std::unique(relations.begin(), relations.end()),
                  relations.end());
}

ParseError::ParseError(size_t pos, const std::string& exp,
                       const std::string& detail)
    : std::runtime_error("parse error at offset " + std::to_string(pos) +
                         ": expected " + exp +
                         (detail.empty() ? "" : " (" + detail + ")")),
      position(pos),
      expected(exp) {}

ValidationError::ValidationError(std::vector<std::string> v)
    : std::runtime_error("invalid scene graph: " +
                         [&v] {
                           std::string s;
                           for (size_t i = 0; i < v.size(); ++i) {
                             if (i) s += "; ";
                             s += v[i];
                           }
                           return s;
                         }()),
      violations(std::move(v)) {}

namespace {

struct DslToken {
  std::string text;
  size_t offset;
};

// Splits on whitespace, detaching ';' and '#index' suffixes so that
// "square;" and "circle#2" lex the same as their spaced forms.
std::vector<DslToken> lex(const std::string& text) {
  std::vector<DslToken> out;
  size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    if (text[i] == ';') {
      out.push_back({";", i});
      ++i;
      continue;
    }
    size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i])) &&
           text[i] != ';')
      ++i;
    std::string word = text.substr(start, i - start);
    size_t hash = word.find('#');
    if (hash == std::string::npos) {
      out.push_back({word, start});
    } else {
      if (hash > 0) out.push_back({word.substr(0, hash), start});
      out.push_back({word.substr(hash), start + hash});
    }
  }
  return out;
}

class SceneParser {
 public:
  SceneParser(const std::string& text, ParseMode mode)
      : text_(text), tokens_(lex(text)), mode_(mode) {}

  SceneGraph parse() {
    if (tokens_.empty())
      throw ParseError(0, "object reference", "empty scene");
    parse_clause();
    while (!done()) {
      expect(";");
      parse_clause();
    }
    auto violations = validate(graph_);
    if (!violations.empty()) throw ValidationError(violations);
    return graph_;
  }

 private:
  bool done() const { return pos_ >= tokens_.size(); }

  const DslToken& peek() const {
    if (done())
      throw ParseError(text_.size(), "more input", "unexpected end of scene");
    return tokens_[pos_];
  }

  void expect(const std::string& t) {
    if (done() || tokens_[pos_].text != t)
      throw ParseError(done() ? text_.size() : tokens_[pos_].offset, "'" + t + "'",
                       done() ? "unexpected end of scene"
                              : "got '" + tokens_[pos_].text + "'");
    ++pos_;
  }

  void parse_clause() {
    ObjectKey subject = parse_objref(/*allow_count=*/true);
    if (!done() && tokens_[pos_].text != ";") {
      size_t rel_off = tokens_[pos_].offset;
      auto rel = relation_from_name(tokens_[pos_].text);
      if (!rel)
        throw ParseError(rel_off, "relation or ';'",
                         "got '" + tokens_[pos_].text + "'");
      ++pos_;
      size_t obj_off = done() ? text_.size() : tokens_[pos_].offset;
      ObjectKey object = parse_objref(/*allow_count=*/false);
      if (subject == object)
        throw ParseError(
            obj_off, "distinct object reference",
            "relation endpoints are identical; identical refs name one "
            "object, use explicit indices like circle#1 and circle#2");
      graph_.insert_relation({*rel, subject, object});
    }
  }

  // Parses one objref, introducing unseen keys into the graph. With a count
  // prefix the whole run 1..n is introduced and the first object returned.
  ObjectKey parse_objref(bool allow_count) {
    const DslToken& first = peek();
    int count = 1;
    bool have_count = false;
    if (std::isdigit(static_cast<unsigned char>(first.text[0]))) {
      if (!allow_count)
        throw ParseError(first.offset, "object reference",
                         "count prefix not allowed in a relation clause");
      try {
        count = std::stoi(first.text);
      } catch (...) {
        count = 0;
      }
      if (count < 1 || count > 4)
        throw ParseError(first.offset, "count in 1..4",
                         "got '" + first.text + "'");
      have_count = true;
      ++pos_;
    }

    std::optional<Color> color;
    if (!done()) {
      color = color_from_name(peek().text);
      if (color) ++pos_;
    }
    if (done())
      throw ParseError(text_.size(), "shape", "unexpected end of scene");
    size_t shape_off = peek().offset;
    auto shape = shape_from_name(peek().text);
    if (!shape)
      throw ParseError(shape_off, color ? "shape" : "color or shape",
                       "got '" + peek().text + "'");
    ++pos_;

    std::optional<int> index;
    if (!done() && tokens_[pos_].text[0] == '#') {
      const std::string& t = tokens_[pos_].text;
      if (t.size() < 2 ||
          !std::all_of(t.begin() + 1, t.end(), [](unsigned char c) {
            return std::isdigit(c);
          }) ||
          t[1] == '0')
        throw ParseError(tokens_[pos_].offset, "#<nonzero digit>",
                         "got '" + t + "'");
      index = std::stoi(t.substr(1));
      if (have_count)
        throw ParseError(tokens_[pos_].offset, "reference without index",
                         "count prefix and explicit index cannot be combined");
      ++pos_;
    }

    if (!color) {
      if (mode_ == ParseMode::FullPrompt)
        throw ParseError(shape_off, "color",
                         "full prompts must specify a color for every object");
      return resolve_colorless(*shape, index, shape_off);
    }

    if (have_count) {
      auto existing = graph_.group(*shape, *color);
      if (!existing.empty())
        throw ParseError(first.offset, "unique count introduction",
                         "group " + color_name(*color) + " " +
                             shape_name(*shape) + " already has objects");
      for (int i = 1; i <= count; ++i)
        graph_.insert_object({*shape, *color, static_cast<uint8_t>(i)});
      return {*shape, *color, 1};
    }

    if (index) {
      ObjectKey k{*shape, *color, static_cast<uint8_t>(*index)};
      if (!graph_.has_object(k)) graph_.insert_object(k);
      return k;
    }

    // No index: #1 if present or introducible, else the unique gap member.
    ObjectKey k1{*shape, *color, 1};
    if (graph_.has_object(k1)) return k1;
    auto members = graph_.group(*shape, *color);
    if (members.empty()) {
      graph_.insert_object(k1);
      return k1;
    }
    if (members.size() == 1) return members[0];
    throw ParseError(shape_off, "indexed reference",
                     "ambiguous reference to " + color_name(*color) + " " +
                         shape_name(*shape));
  }

  ObjectKey resolve_colorless(Shape shape, std::optional<int> index,
                              size_t off) {
    std::vector<ObjectKey> candidates;
    for (const auto& o : graph_.objects) {
      if (o.shape != shape) continue;
      if (index && o.index != *index) continue;
      candidates.push_back(o);
    }
    if (candidates.size() == 1) return candidates[0];
    throw ParseError(off,
                     candidates.empty() ? "reference to an existing object"
                                        : "indexed or colored reference",
                     candidates.empty()
                         ? "no " + shape_name(shape) + " to refer to"
                         : "ambiguous reference to " + shape_name(shape));
  }

  const std::string& text_;
  std::vector<DslToken> tokens_;
  ParseMode mode_;
  size_t pos_ = 0;
  SceneGraph graph_;
};

}  // namespace

SceneGraph parse_scene(const std::string& text, ParseMode mode) {
  return SceneParser(text, mode).parse();
}

std::string object_ref_string(const SceneGraph& g, const ObjectKey& k) {
  std::string s = color_name(k.color) + " " + shape_name(k.shape);
  if (k.index != 1 || g.group(k.shape, k.color).size() > 1)
    s += "#" + std::to_string(k.index);
  return s;
}

std::string print_scene(const SceneGraph& g) {
  std::vector<ObjectKey> standalone;
  for (const auto& o : g.objects) {
    bool is_subject = false;
    for (const auto& e : g.relations)
      if (e.subject == o) is_subject = true;
    if (!is_subject) standalone.push_back(o);
  }

  std::vector<std::string> clauses;
  // Count-collapse a (shape, color) run when the standalone members are the
  // entire group and form exactly 1..m with m >= 2.
  for (size_t i = 0; i < standalone.size();) {
    size_t j = i;
    while (j < standalone.size() &&
           standalone[j].shape == standalone[i].shape &&
           standalone[j].color == standalone[i].color)
      ++j;
    size_t run = j - i;
    bool contiguous = true;
    for (size_t t = 0; t < run; ++t)
      if (standalone[i + t].index != t + 1) contiguous = false;
    bool whole_group =
        g.group(standalone[i].shape, standalone[i].color).size() == run;
    if (run >= 2 && contiguous && whole_group) {
      clauses.push_back(std::to_string(run) + " " +
                        color_name(standalone[i].color) + " " +
                        shape_name(standalone[i].shape));
    } else {
      for (size_t t = 0; t < run; ++t)
        clauses.push_back(object_ref_string(g, standalone[i + t]));
    }
    i = j;
  }

  std::vector<std::string> rel_clauses;
  for (const auto& e : g.relations)
    rel_clauses.push_back(object_ref_string(g, e.subject) + " " +
                          relation_name(e.rel) + " " +
                          object_ref_string(g, e.object));
  std::sort(rel_clauses.begin(), rel_clauses.end());
  clauses.insert(clauses.end(), rel_clauses.begin(), rel_clauses.end());

  std::string out;
  for (size_t i = 0; i < clauses.size(); ++i) {
    if (i) out += "; ";
    out += clauses[i];
  }
  return out;
}

namespace {

// DFS cycle check over one axis. Edges mean "subject strictly before object"
// in row or column order, so any directed cycle is unsatisfiable.
bool axis_has_cycle(const SceneGraph& g, Relation axis_rel) {
  std::map<std::pair<int, int>, std::vector<size_t>> adj;  // key-id graph
  auto id = [&](const ObjectKey& k) {
    for (size_t i = 0; i < g.objects.size(); ++i)
      if (g.objects[i] == k) return i;
    return g.objects.size();
  };
  std::vector<std::vector<size_t>> edges(g.objects.size());
  for (const auto& e : g.relations) {
    if (e.rel != axis_rel) continue;
    size_t s = id(e.subject), o = id(e.object);
    if (s >= g.objects.size() || o >= g.objects.size()) continue;
    edges[s].push_back(o);
  }
  std::vector<int> state(g.objects.size(), 0);  // 0 new, 1 open, 2 done
  struct Walker {
    std::vector<std::vector<size_t>>& edges;
    std::vector<int>& state;
    bool walk(size_t v) {
      state[v] = 1;
      for (size_t w : edges[v]) {
        if (state[w] == 1) return true;
        if (state[w] == 0 && walk(w)) return true;
      }
      state[v] = 2;
      return false;
    }
  } walker{edges, state};
  for (size_t v = 0; v < g.objects.size(); ++v)
    if (state[v] == 0 && walker.walk(v)) return true;
  (void)adj;
  return false;
}

}  // namespace

std::vector<std::string> validate(const SceneGraph& g) {
  std::vector<std::string> out;
  if (g.objects.empty()) out.push_back("scene must contain at least 1 object");
  if (g.objects.size() > 8)
    out.push_back("scene exceeds 8 objects (" +
                  std::to_string(g.objects.size()) + ")");
  for (size_t i = 0; i + 1 < g.objects.size(); ++i)
    for (size_t j = i + 1; j < g.objects.size(); ++j)
      if (g.objects[i] == g.objects[j])
        out.push_back("duplicate object key " + key_to_string(g.objects[i]));
  for (const auto& o : g.objects)
    if (o.index < 1) out.push_back("object index must be >= 1");
  for (const auto& e : g.relations) {
    if (!g.has_object(e.subject))
      out.push_back("relation endpoint missing: " + key_to_string(e.subject));
    if (!g.has_object(e.object))
      out.push_back("relation endpoint missing: " + key_to_string(e.object));
    if (e.subject == e.object)
      out.push_back("relation endpoints are identical: " +
                    key_to_string(e.subject));
    if (e.rel != Relation::Above && e.rel != Relation::LeftOf)
      out.push_back("relation stored in non-normalized direction");
  }
  if (axis_has_cycle(g, Relation::Above))
    out.push_back("cyclic row-axis constraints (above/below)");
  if (axis_has_cycle(g, Relation::LeftOf))
    out.push_back("cyclic column-axis constraints (left-of/right-of)");
  return out;
}

}  // namespace sketchloop
