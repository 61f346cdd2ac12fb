#include "sketchloop/edit.hpp"

#include <algorithm>
#include <sstream>

namespace sketchloop {

ObjectRef ref_of(const ObjectKey& k) {
  return ObjectRef{k.shape, k.color, k.index};
}

ObjectRef make_ref(const SceneGraph& g, const ObjectKey& k) {
  ObjectRef r{k.shape, k.color, std::nullopt};
  if (k.index != 1 || g.group(k.shape, k.color).size() > 1) r.index = k.index;
  return r;
}

std::string ref_to_string(const ObjectRef& r) {
  std::string s;
  if (r.color) s += color_name(*r.color) + " ";
  s += shape_name(r.shape);
  if (r.index) s += "#" + std::to_string(*r.index);
  return s;
}

ObjectKey resolve_ref(const SceneGraph& g, const ObjectRef& r) {
  std::vector<ObjectKey> candidates;
  for (const auto& o : g.objects) {
    if (o.shape != r.shape) continue;
    if (r.color && o.color != *r.color) continue;
    if (r.index && o.index != *r.index) continue;
    candidates.push_back(o);
  }
  if (candidates.size() == 1) return candidates[0];
  if (candidates.empty())
    throw EditError("unresolved reference: " + ref_to_string(r));
  // An indexless ref prefers index 1 to mirror the scene DSL.
  if (!r.index)
    for (const auto& c : candidates)
      if (c.index == 1) return c;
  throw EditError("ambiguous reference: " + ref_to_string(r));
}

namespace {

std::string render_one(const std::vector<EditOp>& ops, size_t& i) {
  const EditOp& op = ops[i];
  switch (op.kind) {
    case EditOp::Kind::AddObject: {
      std::string s = "add " + ref_to_string(op.a);
      // A fused relation rides the add: "add red circle above blue square".
      if (i + 1 < ops.size() && ops[i + 1].kind == EditOp::Kind::AddRelation &&
          ops[i + 1].fused) {
        const EditOp& rel = ops[i + 1];
        s += " " + relation_name(rel.rel) + " " + ref_to_string(rel.b);
        ++i;
      }
      return s;
    }
    case EditOp::Kind::AddRelation:
      return "add relation " + ref_to_string(op.a) + " " +
             relation_name(op.rel) + " " + ref_to_string(op.b);
    case EditOp::Kind::ModifyAttribute:
      return "change " + ref_to_string(op.a) + " color to " +
             color_name(op.new_color);
    case EditOp::Kind::RemoveObject:
      return "remove " + ref_to_string(op.a);
    case EditOp::Kind::SwapPositions:
      return "swap positions of " + ref_to_string(op.a) + " and " +
             ref_to_string(op.b);
    case EditOp::Kind::MoveObject:
      return "move " + ref_to_string(op.a) + " to be " +
             relation_name(op.rel) + " " + ref_to_string(op.b);
  }
  throw EditError("unknown op kind");
}

struct InsToken {
  std::string text;
  size_t offset;
};

std::vector<InsToken> lex_ins(const std::string& text) {
  std::vector<InsToken> out;
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
    if (hash != std::string::npos && hash > 0) {
      out.push_back({word.substr(0, hash), start});
      out.push_back({word.substr(hash), start + hash});
    } else {
      out.push_back({word, start});
    }
  }
  return out;
}

class InstructionParser {
 public:
  explicit InstructionParser(const std::string& text)
      : tokens_(lex_ins(text)) {}

  std::vector<EditOp> parse() {
    if (tokens_.empty()) return {};
    parse_instruction();
    while (!done()) {
      expect(";");
      parse_instruction();
    }
    return ops_;
  }

 private:
  bool done() const { return pos_ >= tokens_.size(); }

  const std::string& cur() {
    static const std::string kEnd = "<end>";
    return done() ? kEnd : tokens_[pos_].text;
  }

  void expect(const std::string& w) {
    if (cur() != w)
      throw EditError("instruction parse: expected '" + w + "', got '" +
                      cur() + "'");
    ++pos_;
  }

  ObjectRef parse_ref() {
    ObjectRef r;
    auto color = color_from_name(cur());
    if (color) {
      r.color = color;
      ++pos_;
    }
    auto shape = shape_from_name(cur());
    if (!shape)
      throw EditError("instruction parse: expected shape, got '" + cur() +
                      "'");
    r.shape = *shape;
    ++pos_;
    if (!done() && cur()[0] == '#') {
      const std::string& t = cur();
      if (t.size() < 2 ||
          !std::all_of(t.begin() + 1, t.end(),
                       [](unsigned char c) { return std::isdigit(c); }))
        throw EditError("instruction parse: bad index token '" + t + "'");
      r.index = static_cast<uint8_t>(std::stoi(t.substr(1)));
      ++pos_;
    }
    return r;
  }

  Relation parse_relation() {
    auto rel = relation_from_name(cur());
    if (!rel)
      throw EditError("instruction parse: expected relation, got '" + cur() +
                      "'");
    ++pos_;
    return *rel;
  }

  void parse_instruction() {
    if (cur() == "add") {
      ++pos_;
      if (cur() == "relation") {
        ++pos_;
        EditOp op;
        op.kind = EditOp::Kind::AddRelation;
        op.a = parse_ref();
        op.rel = parse_relation();
        op.b = parse_ref();
        ops_.push_back(op);
        return;
      }
      EditOp add;
      add.kind = EditOp::Kind::AddObject;
      add.a = parse_ref();
      if (!add.a.color)
        throw EditError("instruction parse: add requires a color");
      ops_.push_back(add);
      if (!done() && cur() != ";") {
        EditOp rel;
        rel.kind = EditOp::Kind::AddRelation;
        rel.fused = true;
        rel.a = add.a;
        rel.rel = parse_relation();
        rel.b = parse_ref();
        ops_.push_back(rel);
      }
      return;
    }
    if (cur() == "change") {
      ++pos_;
      EditOp op;
      op.kind = EditOp::Kind::ModifyAttribute;
      op.a = parse_ref();
      expect("color");
      expect("to");
      auto color = color_from_name(cur());
      if (!color)
        throw EditError("instruction parse: expected color, got '" + cur() +
                        "'");
      op.new_color = *color;
      ++pos_;
      ops_.push_back(op);
      return;
    }
    if (cur() == "remove") {
      ++pos_;
      EditOp op;
      op.kind = EditOp::Kind::RemoveObject;
      op.a = parse_ref();
      ops_.push_back(op);
      return;
    }
    if (cur() == "swap") {
      ++pos_;
      expect("positions");
      expect("of");
      EditOp op;
      op.kind = EditOp::Kind::SwapPositions;
      op.a = parse_ref();
      expect("and");
      op.b = parse_ref();
      ops_.push_back(op);
      return;
    }
    if (cur() == "move") {
      ++pos_;
      EditOp op;
      op.kind = EditOp::Kind::MoveObject;
      op.a = parse_ref();
      expect("to");
      expect("be");
      op.rel = parse_relation();
      op.b = parse_ref();
      ops_.push_back(op);
      return;
    }
    throw EditError("instruction parse: unknown verb '" + cur() + "'");
  }

  std::vector<InsToken> tokens_;
  size_t pos_ = 0;
  std::vector<EditOp> ops_;
};

uint8_t next_free_index(const SceneGraph& g, Shape s, Color c) {
  uint8_t idx = 1;
  while (g.has_object({s, c, idx})) ++idx;
  return idx;
}

}  // namespace

std::string render_instructions(const std::vector<EditOp>& ops) {
  std::vector<std::string> parts;
  for (size_t i = 0; i < ops.size(); ++i) parts.push_back(render_one(ops, i));
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += "; ";
    out += parts[i];
  }
  return out;
}

std::vector<EditOp> parse_instructions(const std::string& text) {
  return InstructionParser(text).parse();
}

SceneGraph apply_edit(const SceneGraph& g, const EditOp& op) {
  SceneGraph out = g;
  switch (op.kind) {
    case EditOp::Kind::AddObject: {
      if (!op.a.color) throw EditError("AddObject requires a color");
      uint8_t idx = op.a.index ? *op.a.index
                               : next_free_index(out, op.a.shape, *op.a.color);
      out.insert_object({op.a.shape, *op.a.color, idx});
      return out;
    }
    case EditOp::Kind::AddRelation: {
      ObjectKey s = resolve_ref(out, op.a);
      ObjectKey o = resolve_ref(out, op.b);
      if (s == o) throw EditError("relation endpoints are identical");
      out.insert_relation({op.rel, s, o});
      return out;
    }
    case EditOp::Kind::ModifyAttribute: {
      ObjectKey k = resolve_ref(out, op.a);
      ObjectKey nk{k.shape, op.new_color, k.index};
      if (out.has_object(nk) && !(nk == k))
        nk.index = next_free_index(out, nk.shape, nk.color);
      out.objects.erase(
          std::remove(out.objects.begin(), out.objects.end(), k),
          out.objects.end());
      out.objects.push_back(nk);
      for (auto& e : out.relations) {
        if (e.subject == k) e.subject = nk;
        if (e.object == k) e.object = nk;
      }
      out.normalize();
      return out;
    }
    case EditOp::Kind::RemoveObject: {
      ObjectKey k = resolve_ref(out, op.a);
      out.erase_object(k);
      return out;
    }
    case EditOp::Kind::SwapPositions:
      resolve_ref(out, op.a);
      resolve_ref(out, op.b);
      return out;  // placement-level op
    case EditOp::Kind::MoveObject: {
      // Edit-script semantics: "move a to be rel b" re-asserts the pair's
      // relation on that axis, replacing whatever the graph claimed before.
      ObjectKey a = resolve_ref(out, op.a);
      ObjectKey b = resolve_ref(out, op.b);
      if (a == b) throw EditError("relation endpoints are identical");
      bool row_axis = op.rel == Relation::Above || op.rel == Relation::Below;
      out.relations.erase(
          std::remove_if(out.relations.begin(), out.relations.end(),
                         [&](const RelationEdge& e) {
                           bool same_axis =
                               (e.rel == Relation::Above) == row_axis;
                           bool same_pair =
                               (e.subject == a && e.object == b) ||
                               (e.subject == b && e.object == a);
                           return same_axis && same_pair;
                         }),
          out.relations.end());
      out.insert_relation({op.rel, a, b});
      return out;
    }
  }
  throw EditError("unknown op kind");
}

SceneGraph apply_edit_script(SceneGraph g, const EditScript& script) {
  for (const auto& op : script) g = apply_edit(g, op);
  return g;
}

namespace {

// Same-axis relation lookup between a fixed ordered pair. Returns the
// normalized edge if present.
std::optional<RelationEdge> pair_axis_edge(const SceneGraph& g,
                                           const ObjectKey& a,
                                           const ObjectKey& b, bool row_axis) {
  for (const auto& e : g.relations) {
    bool axis = (e.rel == Relation::Above) == row_axis;
    if (!axis) continue;
    if ((e.subject == a && e.object == b) ||
        (e.subject == b && e.object == a))
      return e;
  }
  return std::nullopt;
}

EditScript rebuild_script(const SceneGraph& expected,
                          const SceneGraph& observed) {
  EditScript script;
  for (const auto& o : observed.objects) {
    EditOp op;
    op.kind = EditOp::Kind::RemoveObject;
    op.a = ref_of(o);
    script.push_back(op);
  }
  for (const auto& e : expected.objects) {
    EditOp op;
    op.kind = EditOp::Kind::AddObject;
    op.a = ref_of(e);
    script.push_back(op);
  }
  for (const auto& r : expected.relations) {
    EditOp op;
    op.kind = EditOp::Kind::AddRelation;
    op.a = ref_of(r.subject);
    op.b = ref_of(r.object);
    op.rel = r.rel;
    script.push_back(op);
  }
  return script;
}

}  // namespace

EditScript diff(const SceneGraph& expected, const SceneGraph& observed) {
  EditScript script;

  std::vector<ObjectKey> missing;  // in expected only
  std::vector<ObjectKey> extra;    // in observed only
  for (const auto& e : expected.objects)
    if (!observed.has_object(e)) missing.push_back(e);
  for (const auto& o : observed.objects)
    if (!expected.has_object(o)) extra.push_back(o);

  // Shape-only greedy matching in canonical order: recolor instead of
  // remove-and-add when a same-shape object is available.
  std::vector<bool> extra_used(extra.size(), false);
  std::vector<ObjectKey> still_missing;
  for (const auto& e : missing) {
    bool matched = false;
    for (size_t i = 0; i < extra.size(); ++i) {
      if (extra_used[i] || extra[i].shape != e.shape) continue;
      EditOp op;
      op.kind = EditOp::Kind::ModifyAttribute;
      op.a = ref_of(extra[i]);
      op.new_color = e.color;
      script.push_back(op);
      extra_used[i] = true;
      matched = true;
      break;
    }
    if (!matched) still_missing.push_back(e);
  }
  for (const auto& e : still_missing) {
    EditOp op;
    op.kind = EditOp::Kind::AddObject;
    op.a = ref_of(e);
    script.push_back(op);
  }
  for (size_t i = 0; i < extra.size(); ++i) {
    if (extra_used[i]) continue;
    EditOp op;
    op.kind = EditOp::Kind::RemoveObject;
    op.a = ref_of(extra[i]);
    script.push_back(op);
  }

  // Relation fixes against the post-object-fix state: every expected edge
  // whose pair disagrees (absent or reversed) becomes a move.
  SceneGraph mid;
  try {
    mid = apply_edit_script(observed, script);
  } catch (const std::exception&) {
    EditScript fb = rebuild_script(expected, observed);
    return fb;
  }
  for (const auto& r : expected.relations) {
    if (!mid.has_object(r.subject) || !mid.has_object(r.object)) continue;
    bool row_axis = r.rel == Relation::Above;
    auto cur = pair_axis_edge(mid, r.subject, r.object, row_axis);
    if (cur && *cur == r) continue;
    EditOp op;
    op.kind = EditOp::Kind::MoveObject;
    op.a = ref_of(r.subject);
    op.b = ref_of(r.object);
    op.rel = r.rel;
    script.push_back(op);
  }

  try {
    if (apply_edit_script(observed, script) == expected) return script;
  } catch (const std::exception&) {
  }
  return rebuild_script(expected, observed);
}

}  // namespace sketchloop
