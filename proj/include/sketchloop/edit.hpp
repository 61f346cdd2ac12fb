#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sketchloop/scene_graph.hpp"

namespace sketchloop {

// Object reference as written in an instruction. Color may be absent
// (matches any color) and index may be absent (defaults to the unique or
// first group member; for AddObject it means "next free index").
struct ObjectRef {
  Shape shape{};
  std::optional<Color> color;
  std::optional<uint8_t> index;

  friend bool operator==(const ObjectRef&, const ObjectRef&) = default;
};
ObjectRef ref_of(const ObjectKey& k);
std::string ref_to_string(const ObjectRef& r);

// Reference that resolves back to k in g, with the index spelled out only
// when the group is ambiguous or the index is not 1.
ObjectRef make_ref(const SceneGraph& g, const ObjectKey& k);

struct EditOp {
  enum class Kind {
    AddObject,        // a: new object (color required)
    AddRelation,      // a rel b; rides the preceding AddObject when fused
    ModifyAttribute,  // a: target, new_color
    RemoveObject,     // a: target
    SwapPositions,    // a <-> b (placement level, graph no-op)
    MoveObject,       // re-place a so that "a rel b" holds
  };

  Kind kind{};
  ObjectRef a;
  ObjectRef b;
  Relation rel = Relation::Above;  // surface form, kept as written
  Color new_color = Color::Red;
  // True when this AddRelation is rendered inside its subject's add
  // instruction ("add red circle above blue square").
  bool fused = false;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

using EditScript = std::vector<EditOp>;

struct Step {
  std::vector<EditOp> ops;
  std::string ins_text;  // templated instructions, "; " joined
  std::string des_text;  // canonical print of the scene after this step
};

struct EditProgram {
  std::vector<Step> steps;
};

class EditError : public std::runtime_error {
 public:
  explicit EditError(const std::string& what) : std::runtime_error(what) {}
};

// Resolves a reference against a graph. Throws EditError when nothing
// matches or when a colorless/indexless reference is ambiguous.
ObjectKey resolve_ref(const SceneGraph& g, const ObjectRef& r);

// Instruction templates, one per op kind (AddRelation has a fused form that
// rides its subject's add and a standalone "add relation" form):
//   add {color} {shape}
//   add {color} {shape} {relation} {ref}
//   add relation {ref} {relation} {ref}
//   change {ref} color to {color}
//   remove {ref}
//   swap positions of {ref} and {ref}
//   move {ref} to be {relation} {ref}
std::string render_instructions(const std::vector<EditOp>& ops);
std::vector<EditOp> parse_instructions(const std::string& text);

// Applies one op with edit-script semantics (used by diff verification and
// by text-conflict repair): ModifyAttribute re-indexes on key collision and
// MoveObject rewrites the same-axis relation between the pair. Program
// execution uses planner::apply_op instead, where placement-level ops leave
// the graph untouched.
SceneGraph apply_edit(const SceneGraph& g, const EditOp& op);
SceneGraph apply_edit_script(SceneGraph g, const EditScript& script);

// Edit script turning `observed` into `expected`: exact key matches first,
// then shape-only matches become color fixes, leftovers become adds and
// removes, and relation mismatches become moves. Always verified against
// apply_edit_script; falls back to remove-and-rebuild for the rare shapes
// the greedy matching cannot reach.
EditScript diff(const SceneGraph& expected, const SceneGraph& observed);

}  // namespace sketchloop
