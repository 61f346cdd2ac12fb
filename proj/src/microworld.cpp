#include "sketchloop/microworld.hpp"

#include <algorithm>

#include "sketchloop/planner.hpp"

namespace sketchloop {

bool relation_holds(Relation rel, const Cell& a, const Cell& b) {
  switch (rel) {
    case Relation::Above: return a.row < b.row;
    case Relation::Below: return a.row > b.row;
    case Relation::LeftOf: return a.col < b.col;
    case Relation::RightOf: return a.col > b.col;
  }
  return false;
}

const Cell* PlacementMap::find(const ObjectKey& k) const {
  for (const auto& p : items)
    if (p.key == k) return &p.cell;
  return nullptr;
}

void PlacementMap::put(const ObjectKey& k, const Cell& c) {
  for (auto& p : items) {
    if (p.key == k) {
      p.cell = c;
      return;
    }
  }
  items.push_back({k, c});
  std::sort(items.begin(), items.end(),
            [](const Placement& a, const Placement& b) {
              return key_less(a.key, b.key);
            });
}

void PlacementMap::erase(const ObjectKey& k) {
  items.erase(std::remove_if(items.begin(), items.end(),
                             [&](const Placement& p) { return p.key == k; }),
              items.end());
}

bool PlacementMap::cell_taken(const Cell& c) const {
  for (const auto& p : items)
    if (p.cell == c) return true;
  return false;
}

namespace {

bool consistent_so_far(const SceneGraph& g, const PlacementMap& placed,
                       const ObjectKey& k, const Cell& cell) {
  for (const auto& e : g.relations) {
    const Cell* a = nullptr;
    const Cell* b = nullptr;
    if (e.subject == k)
      a = &cell, b = placed.find(e.object);
    else if (e.object == k)
      b = &cell, a = placed.find(e.subject);
    else
      continue;
    if (a && b && !relation_holds(e.rel, *a, *b)) return false;
  }
  return true;
}

bool layout_dfs(const SceneGraph& g, const std::vector<ObjectKey>& todo,
                size_t i, const std::set<Cell>& unavailable,
                PlacementMap& acc) {
  if (i == todo.size()) return true;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      Cell cell{r, c};
      if (unavailable.count(cell) || acc.cell_taken(cell)) continue;
      if (!consistent_so_far(g, acc, todo[i], cell)) continue;
      acc.put(todo[i], cell);
      if (layout_dfs(g, todo, i + 1, unavailable, acc)) return true;
      acc.erase(todo[i]);
    }
  }
  return false;
}

}  // namespace

PlacementMap layout(const SceneGraph& g, const PlacementMap& fixed,
                    const std::set<Cell>& blocked) {
  PlacementMap acc;
  for (const auto& p : fixed.items) {
    if (!g.has_object(p.key)) continue;
    acc.put(p.key, p.cell);
  }
  for (const auto& p : acc.items)
    if (!consistent_so_far(g, acc, p.key, p.cell))
      throw LayoutError("layout unsatisfiable: fixed placements violate " +
                        std::string("a relation"));
  std::vector<ObjectKey> todo;
  for (const auto& o : g.objects)
    if (!acc.find(o)) todo.push_back(o);
  // Objects already sorted canonically in the graph; DFS visits cells in
  // row-major order, so the result is the lexicographically first
  // satisfying assignment.
  if (!layout_dfs(g, todo, 0, blocked, acc))
    throw LayoutError("layout unsatisfiable: no consistent assignment");
  return acc;
}

RasterImage render(const PlacementMap& placement, const SceneGraph& g) {
  for (const auto& o : g.objects)
    if (!placement.find(o))
      throw LayoutError("render: object without a cell: " + key_to_string(o));
  if (placement.items.size() != g.objects.size())
    throw LayoutError("render: placement does not match the scene");
  RasterImage img;
  for (const auto& p : placement.items) {
    auto& cell = img.cells[p.cell.row][p.cell.col];
    cell.shape = static_cast<uint8_t>(p.key.shape);
    cell.color = static_cast<uint8_t>(p.key.color);
  }
  return img;
}

RasterImage render_objects(const std::vector<PlacedObject>& objs) {
  RasterImage img;
  for (const auto& o : objs) {
    auto& cell = img.cells[o.cell.row][o.cell.col];
    cell.shape = static_cast<uint8_t>(o.shape);
    cell.color = static_cast<uint8_t>(o.color);
  }
  return img;
}

std::vector<PlacedObject> derender(const RasterImage& img) {
  std::vector<PlacedObject> out;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const CellCode& cc = img.cells[r][c];
      if (cc.shape == 0 && cc.color == 0) continue;
      if (cc.shape == 0 || cc.color == 0 || cc.shape > kShapeCount ||
          cc.color > kColorCount)
        throw LayoutError("derender: malformed cell at row " +
                          std::to_string(r) + " col " + std::to_string(c));
      out.push_back({static_cast<Shape>(cc.shape),
                     static_cast<Color>(cc.color), Cell{r, c}});
    }
  }
  return out;
}

PlacementMap keyed_placement(const std::vector<PlacedObject>& objs,
                             SceneGraph* graph_out) {
  PlacementMap pm;
  SceneGraph g;
  // Indices within a (shape, color) group follow row-major cell order, the
  // same order derender emits.
  std::vector<std::pair<Shape, Color>> seen;
  for (const auto& o : objs) {
    uint8_t idx = 1;
    for (const auto& p : pm.items)
      if (p.key.shape == o.shape && p.key.color == o.color) ++idx;
    ObjectKey k{o.shape, o.color, idx};
    pm.put(k, o.cell);
    g.objects.push_back(k);
  }
  g.normalize();
  if (graph_out) *graph_out = g;
  return pm;
}

std::string image_to_wire(const RasterImage& img) {
  std::string out;
  out.reserve(kGridSize * kGridSize * 3);
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      if (!out.empty()) out.push_back(' ');
      const CellCode& cc = img.cells[r][c];
      out.push_back(static_cast<char>('0' + cc.shape));
      out.push_back(static_cast<char>('0' + cc.color));
    }
  }
  return out;
}

RasterImage image_from_wire(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ' ') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  if (parts.size() != kGridSize * kGridSize)
    throw LayoutError("image wire form needs 36 cells, got " +
                      std::to_string(parts.size()));
  RasterImage img;
  for (int i = 0; i < kGridSize * kGridSize; ++i) {
    const std::string& p = parts[i];
    if (p.size() != 2 || p[0] < '0' || p[0] > '6' || p[1] < '0' || p[1] > '6')
      throw LayoutError("bad cell code '" + p + "' at cell " +
                        std::to_string(i));
    CellCode cc{static_cast<uint8_t>(p[0] - '0'),
                static_cast<uint8_t>(p[1] - '0')};
    if ((cc.shape == 0) != (cc.color == 0))
      throw LayoutError("bad cell code '" + p + "' at cell " +
                        std::to_string(i));
    img.cells[i / kGridSize][i % kGridSize] = cc;
  }
  return img;
}

const std::string& fault_kind_name(FaultKind k) {
  static const std::array<std::string, 6> names = {
      "none",     "wrong-color", "wrong-shape",
      "relation-violation", "omission",    "duplicate"};
  return names[static_cast<size_t>(k)];
}

FaultKind draw_fault_kind(Rng& rng, const FaultModel& model,
                          const std::vector<FaultKind>& applicable) {
  if (applicable.empty()) return FaultKind::None;
  if (!rng.bernoulli(model.fault_rate)) return FaultKind::None;
  double total = 0;
  for (FaultKind k : applicable)
    total += model.kind_weights[static_cast<size_t>(k) - 1];
  if (total <= 0) return FaultKind::None;
  double u = rng.next_double() * total;
  for (FaultKind k : applicable) {
    u -= model.kind_weights[static_cast<size_t>(k) - 1];
    if (u < 0) return k;
  }
  return applicable.back();
}

namespace {

std::optional<Cell> first_free_cell(const std::set<Cell>& occupied) {
  for (int r = 0; r < kGridSize; ++r)
    for (int c = 0; c < kGridSize; ++c)
      if (!occupied.count({r, c})) return Cell{r, c};
  return std::nullopt;
}

// First row-major cell where "subject rel object" fails. Prefers cells that
// keep the subject's other relations intact so the corruption shows exactly
// the labeled defect; falls back to any violating free cell.
std::optional<Cell> violating_cell(const SceneGraph& g,
                                   const PlacementMap& expected,
                                   const ObjectKey& subject,
                                   const ObjectKey& object, Relation rel,
                                   const Cell& object_cell,
                                   const std::set<Cell>& occupied) {
  RelationEdge target{rel, subject, object};
  if (rel == Relation::Below || rel == Relation::RightOf) {
    target = {inverse_relation(rel), object, subject};
  }
  std::optional<Cell> fallback;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      Cell cell{r, c};
      if (occupied.count(cell)) continue;
      if (relation_holds(rel, cell, object_cell)) continue;
      bool others_ok = true;
      for (const auto& e : g.relations) {
        if (e == target) continue;
        if (e.subject != subject && e.object != subject) continue;
        const Cell* other =
            expected.find(e.subject == subject ? e.object : e.subject);
        if (!other) continue;
        Cell a = e.subject == subject ? cell : *other;
        Cell b = e.subject == subject ? *other : cell;
        if (!relation_holds(e.rel, a, b)) others_ok = false;
      }
      if (others_ok) return cell;
      if (!fallback) fallback = cell;
    }
  }
  return fallback;
}

ObjectKey added_key(const SceneGraph& after, const EditOp& op) {
  // The op's concrete key in the post-step scene: highest index of the
  // (shape, color) group unless the ref pinned one explicitly.
  if (op.a.index) return {op.a.shape, *op.a.color, *op.a.index};
  auto members = after.group(op.a.shape, *op.a.color);
  return members.empty() ? ObjectKey{op.a.shape, *op.a.color, 1}
                         : members.back();
}

}  // namespace

StepFaults inject_sketch_faults(const Step& step, const SketchContext& ctx,
                                uint64_t seed, const FaultModel& model) {
  StepFaults out;
  for (size_t i = 0; i < step.ops.size(); ++i) {
    const EditOp& op = step.ops[i];
    Rng rng(hash_combine(seed, 0x5eedull * 131 + i));

    std::vector<FaultKind> applicable;
    switch (op.kind) {
      case EditOp::Kind::AddObject:
        applicable = {FaultKind::WrongColor, FaultKind::WrongShape,
                      FaultKind::Omission, FaultKind::Duplicate};
        break;
      case EditOp::Kind::AddRelation:
      case EditOp::Kind::MoveObject:
        applicable = {FaultKind::RelationViolation};
        break;
      case EditOp::Kind::ModifyAttribute:
        applicable = {FaultKind::WrongColor, FaultKind::Omission};
        break;
      case EditOp::Kind::RemoveObject:
      case EditOp::Kind::SwapPositions:
        applicable = {FaultKind::Omission};
        break;
    }

    FaultKind kind = draw_fault_kind(rng, model, applicable);
    if (kind == FaultKind::None) continue;

    SketchFault f;
    f.op_index = i;
    f.kind = kind;
    switch (kind) {
      case FaultKind::WrongColor: {
        Color truth = op.kind == EditOp::Kind::ModifyAttribute
                          ? op.new_color
                          : *op.a.color;
        std::vector<Color> options;
        for (int c = 1; c <= kColorCount; ++c) {
          Color cand = static_cast<Color>(c);
          if (cand == truth) continue;
          if (op.kind == EditOp::Kind::ModifyAttribute && op.a.color &&
              cand == *op.a.color)
            continue;  // keeping the old color would look like an omission
          options.push_back(cand);
        }
        f.wrong_color = options[rng.below(options.size())];
        f.label = {kind, ref_to_string(op.a)};
        break;
      }
      case FaultKind::WrongShape: {
        std::vector<Shape> options;
        for (int s = 1; s <= kShapeCount; ++s)
          if (static_cast<Shape>(s) != op.a.shape)
            options.push_back(static_cast<Shape>(s));
        f.wrong_shape = options[rng.below(options.size())];
        f.label = {kind, ref_to_string(op.a)};
        break;
      }
      case FaultKind::Omission:
        f.label = {kind, ref_to_string(op.a)};
        break;
      case FaultKind::Duplicate: {
        std::set<Cell> occ = ctx.occupied;
        auto cell = first_free_cell(occ);
        if (!cell) continue;  // full grid, nothing to duplicate into
        f.cell = *cell;
        f.label = {kind, ref_to_string(op.a)};
        break;
      }
      case FaultKind::RelationViolation: {
        ObjectKey subject;
        try {
          subject = op.kind == EditOp::Kind::AddRelation && !op.a.index &&
                            op.a.color
                        ? added_key(ctx.graph_after, op)
                        : resolve_ref(ctx.graph_after, op.a);
        } catch (const EditError&) {
          continue;
        }
        const Cell* own = ctx.expected_after.find(subject);
        ObjectKey object;
        try {
          object = resolve_ref(ctx.graph_after, op.b);
        } catch (const EditError&) {
          continue;
        }
        const Cell* target = ctx.expected_after.find(object);
        if (!own || !target) continue;
        std::set<Cell> occ = ctx.occupied;
        occ.erase(*own);
        auto cell = violating_cell(ctx.graph_after, ctx.expected_after,
                                   subject, object, op.rel, *target, occ);
        if (!cell) continue;
        f.cell = *cell;
        f.label = {kind, object_ref_string(ctx.graph_after, subject) + " " +
                             relation_name(op.rel) + " " +
                             object_ref_string(ctx.graph_after, object)};
        break;
      }
      case FaultKind::None:
        continue;
    }
    out.faults.push_back(f);
  }
  return out;
}

PlanFaultResult inject_plan_fault(const Step& step, const SceneGraph& full,
                                  const SceneGraph& before, uint64_t seed,
                                  const FaultModel& model) {
  Rng rng(hash_combine(seed, 0x9153ull));
  PlanFaultResult out{step, {FaultKind::None, ""}};
  if (!rng.bernoulli(model.fault_rate)) return out;

  struct Candidate {
    size_t op_index;
    FaultKind kind;
  };
  std::vector<Candidate> candidates;
  for (size_t i = 0; i < step.ops.size(); ++i) {
    const EditOp& op = step.ops[i];
    if (op.kind == EditOp::Kind::AddObject) {
      candidates.push_back({i, FaultKind::WrongColor});
      candidates.push_back({i, FaultKind::WrongShape});
    } else if (op.kind == EditOp::Kind::AddRelation) {
      candidates.push_back({i, FaultKind::RelationViolation});
    }
  }
  // Weighted pass over candidates in seeded order; the first realizable
  // corruption that yields a valid (but contradicting) claim wins.
  rng.shuffle(candidates);
  for (const Candidate& cand : candidates) {
    Step corrupted = step;
    EditOp& op = corrupted.ops[cand.op_index];
    FaultLabel label{cand.kind, ref_to_string(op.a)};
    bool realized = false;

    if (cand.kind == FaultKind::WrongColor) {
      std::vector<Color> options;
      for (int c = 1; c <= kColorCount; ++c) {
        Color cc = static_cast<Color>(c);
        if (cc == *op.a.color) continue;
        if (!full.group(op.a.shape, cc).empty()) continue;
        if (!before.group(op.a.shape, cc).empty()) continue;
        options.push_back(cc);
      }
      if (!options.empty()) {
        Color decoy = options[rng.below(options.size())];
        ObjectRef old = op.a;
        op.a.color = decoy;
        for (auto& other : corrupted.ops)
          if (other.kind == EditOp::Kind::AddRelation && other.a == old)
            other.a.color = decoy;
        realized = true;
      }
    } else if (cand.kind == FaultKind::WrongShape) {
      std::vector<Shape> options;
      for (int s = 1; s <= kShapeCount; ++s) {
        Shape ss = static_cast<Shape>(s);
        if (ss == op.a.shape) continue;
        bool used = false;
        for (const auto& o : full.objects)
          if (o.shape == ss) used = true;
        for (const auto& o : before.objects)
          if (o.shape == ss) used = true;
        if (!used) options.push_back(ss);
      }
      if (!options.empty()) {
        Shape decoy = options[rng.below(options.size())];
        ObjectRef old = op.a;
        op.a.shape = decoy;
        for (auto& other : corrupted.ops)
          if (other.kind == EditOp::Kind::AddRelation && other.a == old)
            other.a.shape = decoy;
        realized = true;
      }
    } else {  // RelationViolation: claim the opposite direction
      label.target = ref_to_string(op.a) + " " + relation_name(op.rel) + " " +
                     ref_to_string(op.b);
      op.rel = inverse_relation(op.rel);
      realized = true;
    }

    if (!realized) continue;
    SceneGraph claim = before;
    try {
      for (const auto& o : corrupted.ops) claim = apply_op(claim, o);
    } catch (const std::exception&) {
      continue;
    }
    if (!validate(claim).empty()) continue;
    corrupted.ins_text = render_instructions(corrupted.ops);
    corrupted.des_text = print_scene(claim);
    out.step = corrupted;
    out.label = label;
    return out;
  }
  return out;
}

}  // namespace sketchloop
