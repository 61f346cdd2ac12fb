#include "sketchloop/planner.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sketchloop {

namespace {

std::vector<std::string> hard_violations(const SceneGraph& g) {
  auto v = validate(g);
  // Transient execution states may be empty (program start) without being
  // broken; everything else is a real error.
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](const std::string& s) {
                           return s.find("at least 1 object") !=
                                  std::string::npos;
                         }),
          v.end());
  return v;
}

uint8_t next_free_index(const SceneGraph& g, Shape s, Color c) {
  uint8_t idx = 1;
  while (g.has_object({s, c, idx})) ++idx;
  return idx;
}

}  // namespace

SceneGraph apply_op(const SceneGraph& g, const EditOp& op) {
  SceneGraph out = g;
  switch (op.kind) {
    case EditOp::Kind::AddObject: {
      if (!op.a.color) throw EditError("AddObject requires a color");
      uint8_t idx = op.a.index ? *op.a.index
                               : next_free_index(out, op.a.shape, *op.a.color);
      ObjectKey k{op.a.shape, *op.a.color, idx};
      if (out.has_object(k))
        throw EditError("AddObject would duplicate " + key_to_string(k));
      out.insert_object(k);
      break;
    }
    case EditOp::Kind::AddRelation: {
      ObjectKey s = resolve_ref(out, op.a);
      ObjectKey o = resolve_ref(out, op.b);
      if (s == o) throw EditError("relation endpoints are identical");
      out.insert_relation({op.rel, s, o});
      break;
    }
    case EditOp::Kind::ModifyAttribute: {
      ObjectKey k = resolve_ref(out, op.a);
      ObjectKey nk{k.shape, op.new_color, k.index};
      if (nk == k) break;
      if (out.has_object(nk))
        throw EditError("ModifyAttribute would duplicate " +
                        key_to_string(nk));
      out.objects.erase(std::remove(out.objects.begin(), out.objects.end(), k),
                        out.objects.end());
      out.objects.push_back(nk);
      for (auto& e : out.relations) {
        if (e.subject == k) e.subject = nk;
        if (e.object == k) e.object = nk;
      }
      out.normalize();
      break;
    }
    case EditOp::Kind::RemoveObject: {
      ObjectKey k = resolve_ref(out, op.a);
      out.erase_object(k);
      break;
    }
    case EditOp::Kind::SwapPositions:
    case EditOp::Kind::MoveObject:
      resolve_ref(out, op.a);
      resolve_ref(out, op.b);
      break;  // placement-level only; the scene is untouched
  }
  auto v = hard_violations(out);
  if (!v.empty()) throw EditError("op produced an invalid scene: " + v[0]);
  return out;
}

SceneGraph program_result(const EditProgram& p, const SceneGraph& base) {
  SceneGraph g = base;
  for (const auto& step : p.steps)
    for (const auto& op : step.ops) g = apply_op(g, op);
  return g;
}

namespace {

struct ChainDraw {
  std::vector<std::vector<ObjectKey>> step_objects;
  std::vector<std::vector<RelationEdge>> step_relations;
};

// Picks an arrival order and splits it into k non-empty runs. An object that
// sits below or right of another must not arrive before that subject: greedy
// layout pins early arrivals toward the top-left, which would leave a late
// subject no smaller row or column to land on. Relations are attached to the
// step where their later endpoint arrives.
ChainDraw draw_chain(const SceneGraph& full, const SceneGraph& base, int k,
                     Rng& rng) {
  std::vector<ObjectKey> remaining;
  for (const auto& o : full.objects)
    if (!base.has_object(o)) remaining.push_back(o);

  std::vector<ObjectKey> order;
  SceneGraph present = base;
  while (!remaining.empty()) {
    std::vector<size_t> eligible;
    for (size_t i = 0; i < remaining.size(); ++i) {
      const ObjectKey& o = remaining[i];
      bool ok = true;
      for (const auto& e : full.relations)
        if (e.object == o && !present.has_object(e.subject)) ok = false;
      if (ok) eligible.push_back(i);
    }
    // Cross-axis cycles admit no such order; fall back to a free pick and
    // let the feasibility retries filter the survivors.
    if (eligible.empty())
      for (size_t i = 0; i < remaining.size(); ++i) eligible.push_back(i);
    size_t pick = eligible[rng.below(eligible.size())];
    order.push_back(remaining[pick]);
    present.insert_object(remaining[pick]);
    remaining.erase(remaining.begin() + pick);
  }

  int n = static_cast<int>(order.size());
  std::vector<int> cuts;  // k-1 distinct positions in 1..n-1
  {
    std::vector<int> positions;
    for (int i = 1; i < n; ++i) positions.push_back(i);
    rng.shuffle(positions);
    cuts.assign(positions.begin(), positions.begin() + (k - 1));
    std::sort(cuts.begin(), cuts.end());
  }

  ChainDraw out;
  out.step_objects.resize(k);
  out.step_relations.resize(k);
  std::map<std::string, int> arrival;  // key string -> step index
  auto keystr = [](const ObjectKey& k2) { return key_to_string(k2); };
  for (const auto& o : base.objects) arrival[keystr(o)] = -1;
  int step = 0;
  for (int i = 0; i < n; ++i) {
    while (step < k - 1 && i >= cuts[step]) ++step;
    out.step_objects[step].push_back(order[i]);
    arrival[keystr(order[i])] = step;
  }
  for (const auto& e : full.relations) {
    if (!arrival.count(keystr(e.subject)) ||
        !arrival.count(keystr(e.object)))
      continue;
    int at = std::max(arrival[keystr(e.subject)], arrival[keystr(e.object)]);
    if (at < 0) at = 0;  // both endpoints in base: assert with step 1
    out.step_relations[at].push_back(e);
  }
  return out;
}

}  // namespace

SubgraphChain subsample_chain(const SceneGraph& full, uint64_t seed,
                              std::optional<int> k_hint,
                              const SceneGraph& base,
                              const PlacementMap& base_placement) {
  int addable = 0;
  for (const auto& o : full.objects)
    if (!base.has_object(o)) ++addable;
  if (addable == 0)
    throw InfeasibleError("chain infeasible: no objects left to introduce");

  Rng rng(hash_combine(seed, 0xc4a17ull));
  int k_max = std::min(5, addable);

  for (int attempt = 0; attempt < 32; ++attempt) {
    Rng draw_rng = rng.derive(attempt);
    int k;
    if (k_hint)
      k = std::clamp(*k_hint, 1, k_max);
    else if (addable == 1)
      k = 1;
    else if (attempt < 16)
      k = draw_rng.range(2, k_max);
    else
      k = 2;  // late attempts force the coarsest non-degenerate split
    ChainDraw draw = draw_chain(full, base, k, draw_rng);

    SubgraphChain chain;
    SceneGraph g = base;
    for (int i = 0; i < k; ++i) {
      for (const auto& o : draw.step_objects[i]) g.insert_object(o);
      for (const auto& e : draw.step_relations[i]) g.insert_relation(e);
      chain.graphs.push_back(g);
    }

    PlacementMap pm = base_placement;
    bool feasible = true;
    for (const auto& gi : chain.graphs) {
      try {
        pm = layout(gi, pm);
      } catch (const LayoutError&) {
        feasible = false;
        break;
      }
    }
    if (feasible) return chain;
  }
  throw InfeasibleError(
      "chain infeasible: no layout-feasible decomposition in 32 attempts");
}

EditProgram synthesize_program(const SubgraphChain& chain,
                               const SceneGraph& base) {
  EditProgram p;
  SceneGraph before = base;
  for (const auto& after : chain.graphs) {
    Step step;
    std::vector<ObjectKey> added;
    for (const auto& o : after.objects)
      if (!before.has_object(o)) added.push_back(o);
    std::vector<RelationEdge> new_rels;
    for (const auto& e : after.relations) {
      bool had = std::find(before.relations.begin(), before.relations.end(),
                           e) != before.relations.end();
      if (!had) new_rels.push_back(e);
    }

    SceneGraph working = before;
    std::vector<bool> rel_used(new_rels.size(), false);
    for (const auto& key : added) {
      EditOp add;
      add.kind = EditOp::Kind::AddObject;
      add.a = {key.shape, key.color, std::nullopt};
      // Spell the index out whenever the group already has members: the ref
      // is copied into any fused relation, where a bare form would be
      // ambiguous at apply time.
      if (key.index != 1 || !working.group(key.shape, key.color).empty())
        add.a.index = key.index;
      step.ops.push_back(add);
      working.insert_object(key);

      // The first unplaced relation touching this arrival rides its add.
      for (size_t r = 0; r < new_rels.size(); ++r) {
        if (rel_used[r]) continue;
        const RelationEdge& e = new_rels[r];
        bool subj_here = e.subject == key && working.has_object(e.object);
        bool obj_here = e.object == key && working.has_object(e.subject);
        if (!subj_here && !obj_here) continue;
        EditOp rel;
        rel.kind = EditOp::Kind::AddRelation;
        rel.fused = true;
        if (subj_here) {
          rel.a = step.ops.back().a;
          rel.rel = e.rel;
          rel.b = make_ref(after, e.object);
        } else {
          rel.a = step.ops.back().a;
          rel.rel = inverse_relation(e.rel);
          rel.b = make_ref(after, e.subject);
        }
        step.ops.push_back(rel);
        rel_used[r] = true;
        working.insert_relation(e);
        break;
      }
    }
    // Leftovers (second relations of one arrival, or base-to-base edges)
    // become standalone relation instructions.
    for (size_t r = 0; r < new_rels.size(); ++r) {
      if (rel_used[r]) continue;
      const RelationEdge& e = new_rels[r];
      EditOp rel;
      rel.kind = EditOp::Kind::AddRelation;
      rel.a = make_ref(after, e.subject);
      rel.rel = e.rel;
      rel.b = make_ref(after, e.object);
      step.ops.push_back(rel);
      working.insert_relation(e);
    }

    step.ins_text = render_instructions(step.ops);
    step.des_text = print_scene(after);
    p.steps.push_back(step);
    before = after;
  }
  return p;
}

Cell move_target_cell(const SceneGraph& g, const PlacementMap& placed,
                      const ObjectKey& target) {
  const Cell* own = placed.find(target);
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      Cell cell{r, c};
      bool taken = false;
      for (const auto& p : placed.items)
        if (!(p.key == target) && p.cell == cell) taken = true;
      if (taken) continue;
      bool ok = true;
      for (const auto& e : g.relations) {
        if (e.subject != target && e.object != target) continue;
        const Cell* other =
            placed.find(e.subject == target ? e.object : e.subject);
        if (!other) continue;
        Cell a = e.subject == target ? cell : *other;
        Cell b = e.subject == target ? *other : cell;
        if (!relation_holds(e.rel, a, b)) ok = false;
      }
      if (ok) return cell;
    }
  }
  (void)own;
  throw LayoutError("move: no consistent cell for " + key_to_string(target));
}

namespace {

SimState run_steps(const SceneGraph& base, const PlacementMap& base_placement,
                   const std::vector<Step>& steps) {
  SimState st{base, base_placement};
  for (const auto& s : steps) execute_step_clean(st, s);
  return st;
}

bool combo_free(const SceneGraph& a, const SceneGraph& b, Shape s, Color c) {
  return a.group(s, c).empty() && b.group(s, c).empty();
}

std::vector<Color> all_colors() {
  return {Color::Red,  Color::Blue,   Color::Green,
          Color::Yellow, Color::Purple, Color::Orange};
}

std::vector<Shape> all_shapes() {
  return {Shape::Circle,   Shape::Square, Shape::Triangle,
          Shape::Star,     Shape::Cross,  Shape::Diamond};
}

enum class RewriteKind { DecoyColor, DecoyObject, SwapCorrect };

// Positions in `ops` of adds that can take a decoy color under the live
// before-state: the group must be empty (so the arrival is #1) and no other
// op in the step may add the same shape+color pair.
std::vector<size_t> decoy_color_candidates(const SceneGraph& before,
                                           const SceneGraph& full,
                                           const std::vector<EditOp>& ops) {
  std::vector<size_t> out;
  for (size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].kind != EditOp::Kind::AddObject) continue;
    Shape s = ops[i].a.shape;
    Color c = *ops[i].a.color;
    if (!before.group(s, c).empty()) continue;
    bool sibling = false;
    for (size_t j = 0; j < ops.size(); ++j)
      if (j != i && ops[j].kind == EditOp::Kind::AddObject &&
          ops[j].a.shape == s && *ops[j].a.color == c)
        sibling = true;
    if (sibling) continue;
    bool have_decoy = false;
    for (Color d : all_colors()) {
      if (d == c || !combo_free(before, full, s, d)) continue;
      bool used_in_step = false;
      for (const auto& op : ops)
        if (op.kind == EditOp::Kind::AddObject && op.a.shape == s &&
            *op.a.color == d)
          used_in_step = true;
      if (!used_in_step) have_decoy = true;
    }
    if (have_decoy) out.push_back(i);
  }
  return out;
}

struct SwapPick {
  ObjectKey x;  // relation-bearing object that gets displaced
  ObjectKey y;  // free object it trades cells with
  RelationEdge broken;
};

std::vector<SwapPick> swap_candidates(const SimState& after) {
  std::vector<SwapPick> out;
  const SceneGraph& g = after.graph;
  auto degree = [&](const ObjectKey& k) {
    int d = 0;
    for (const auto& e : g.relations)
      if (e.subject == k || e.object == k) ++d;
    return d;
  };
  for (const auto& x : g.objects) {
    if (degree(x) == 0) continue;
    for (const auto& y : g.objects) {
      if (y == x || degree(y) != 0) continue;
      PlacementMap swapped = after.placement;
      Cell cx = *swapped.find(x);
      Cell cy = *swapped.find(y);
      swapped.put(x, cy);
      swapped.put(y, cx);
      std::optional<RelationEdge> broken;
      for (const auto& e : g.relations) {
        if (e.subject != x && e.object != x) continue;
        if (!relation_holds(e.rel, *swapped.find(e.subject),
                            *swapped.find(e.object)) &&
            !broken)
          broken = e;
      }
      if (!broken) continue;
      try {
        move_target_cell(g, swapped, x);
      } catch (const LayoutError&) {
        continue;
      }
      out.push_back({x, y, *broken});
    }
  }
  return out;
}

// Seeded rewrite of one original step into its block of steps. Returns an
// empty vector when the rewrite cannot be realized against the live state.
std::vector<Step> build_rewrite(RewriteKind kind, const Step& original,
                                const SimState& before, const SceneGraph& full,
                                Rng& rng) {
  switch (kind) {
    case RewriteKind::DecoyColor: {
      auto cands = decoy_color_candidates(before.graph, full, original.ops);
      if (cands.empty()) return {};
      size_t pick = cands[rng.below(cands.size())];
      Shape s = original.ops[pick].a.shape;
      Color c = *original.ops[pick].a.color;
      std::vector<Color> decoys;
      for (Color d : all_colors()) {
        if (d == c || !combo_free(before.graph, full, s, d)) continue;
        bool used = false;
        for (const auto& op : original.ops)
          if (op.kind == EditOp::Kind::AddObject && op.a.shape == s &&
              *op.a.color == d)
            used = true;
        if (!used) decoys.push_back(d);
      }
      if (decoys.empty()) return {};
      Color d = decoys[rng.below(decoys.size())];

      Step wrong = original;
      wrong.ops[pick].a.color = d;
      for (size_t j = pick + 1; j < wrong.ops.size(); ++j) {
        auto patch = [&](ObjectRef& r) {
          if (r.shape == s && r.color && *r.color == c &&
              (!r.index || *r.index == 1))
            r.color = d;
        };
        patch(wrong.ops[j].a);
        patch(wrong.ops[j].b);
      }
      Step fix;
      EditOp mod;
      mod.kind = EditOp::Kind::ModifyAttribute;
      mod.a = {s, d, std::nullopt};
      mod.new_color = c;
      fix.ops.push_back(mod);
      return {wrong, fix};
    }
    case RewriteKind::DecoyObject: {
      SimState after = before;
      execute_step_clean(after, original);
      if (after.graph.objects.size() >= 8) return {};
      std::vector<std::pair<Shape, Color>> combos;
      for (Shape s : all_shapes())
        for (Color c : all_colors())
          if (combo_free(after.graph, full, s, c)) combos.push_back({s, c});
      if (combos.empty()) return {};
      auto [s, c] = combos[rng.below(combos.size())];

      Step with = original;
      EditOp add;
      add.kind = EditOp::Kind::AddObject;
      add.a = {s, c, std::nullopt};
      with.ops.push_back(add);
      Step fix;
      EditOp rem;
      rem.kind = EditOp::Kind::RemoveObject;
      rem.a = {s, c, std::nullopt};
      fix.ops.push_back(rem);
      return {with, fix};
    }
    case RewriteKind::SwapCorrect: {
      SimState after = before;
      execute_step_clean(after, original);
      auto cands = swap_candidates(after);
      if (cands.empty()) return {};
      SwapPick p = cands[rng.below(cands.size())];

      Step swap;
      EditOp sw;
      sw.kind = EditOp::Kind::SwapPositions;
      sw.a = make_ref(after.graph, p.x);
      sw.b = make_ref(after.graph, p.y);
      swap.ops.push_back(sw);
      Step fix;
      EditOp mv;
      mv.kind = EditOp::Kind::MoveObject;
      mv.a = make_ref(after.graph, p.x);
      if (p.broken.subject == p.x) {
        mv.rel = p.broken.rel;
        mv.b = make_ref(after.graph, p.broken.object);
      } else {
        mv.rel = inverse_relation(p.broken.rel);
        mv.b = make_ref(after.graph, p.broken.subject);
      }
      fix.ops.push_back(mv);
      return {original, swap, fix};
    }
  }
  return {};
}

}  // namespace

EditProgram augment_program(const EditProgram& p, uint64_t seed, double ratio,
                            const SceneGraph& base,
                            const PlacementMap& base_placement) {
  if (ratio <= 0.0 || p.steps.empty()) return p;
  SceneGraph full = program_result(p, base);

  // Eligibility snapshot from the clean run, used only to pick which steps
  // to rewrite; the rewrite itself re-checks against the live state.
  std::vector<std::vector<RewriteKind>> eligible(p.steps.size());
  {
    SimState st{base, base_placement};
    for (size_t i = 0; i < p.steps.size(); ++i) {
      if (!decoy_color_candidates(st.graph, full, p.steps[i].ops).empty())
        eligible[i].push_back(RewriteKind::DecoyColor);
      SimState after = st;
      execute_step_clean(after, p.steps[i]);
      if (after.graph.objects.size() < 8)
        eligible[i].push_back(RewriteKind::DecoyObject);
      if (!swap_candidates(after).empty())
        eligible[i].push_back(RewriteKind::SwapCorrect);
      st = after;
    }
  }

  std::vector<size_t> pool;
  for (size_t i = 0; i < eligible.size(); ++i)
    if (!eligible[i].empty()) pool.push_back(i);
  size_t n_aug = static_cast<size_t>(
      std::llround(ratio * static_cast<double>(pool.size())));
  n_aug = std::min(n_aug, pool.size());
  std::stable_sort(pool.begin(), pool.end(), [&](size_t a, size_t b) {
    uint64_t sa = mix64(hash_combine(seed, 0x5c02e000ull + a));
    uint64_t sb = mix64(hash_combine(seed, 0x5c02e000ull + b));
    if (sa != sb) return sa < sb;
    return a < b;
  });
  std::vector<bool> selected(p.steps.size(), false);
  for (size_t i = 0; i < n_aug; ++i) selected[pool[i]] = true;

  // Blocks are validated one at a time: a rewrite is kept only if the whole
  // program still executes cleanly with it in place.
  std::vector<std::vector<Step>> blocks;
  for (const auto& s : p.steps) blocks.push_back({s});

  for (size_t i = 0; i < p.steps.size(); ++i) {
    if (!selected[i]) continue;
    Rng rng(hash_combine(seed, 0xa0600000ull + i));
    RewriteKind kind = eligible[i][rng.below(eligible[i].size())];

    std::vector<Step> prefix;
    for (size_t j = 0; j < i; ++j)
      prefix.insert(prefix.end(), blocks[j].begin(), blocks[j].end());
    SimState before;
    try {
      before = run_steps(base, base_placement, prefix);
    } catch (const std::exception&) {
      continue;
    }
    std::vector<Step> block = build_rewrite(kind, p.steps[i], before, full, rng);
    if (block.empty()) continue;

    std::vector<std::vector<Step>> trial = blocks;
    trial[i] = block;
    std::vector<Step> flat;
    for (const auto& b : trial)
      flat.insert(flat.end(), b.begin(), b.end());
    try {
      SimState end = run_steps(base, base_placement, flat);
      if (end.graph != full) continue;
    } catch (const std::exception&) {
      continue;
    }
    blocks = trial;
  }

  EditProgram out;
  SimState st{base, base_placement};
  for (const auto& block : blocks) {
    for (Step step : block) {
      execute_step_clean(st, step);
      step.ins_text = render_instructions(step.ops);
      step.des_text = print_scene(st.graph);
      out.steps.push_back(step);
    }
  }
  return out;
}

namespace {

// Union-find over object indices for forest-shaped relation sampling.
struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

}  // namespace

SceneGraph sample_scene(Rng& rng, const SceneSamplerConfig& cfg) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    int max_n = cfg.max_objects;
    if (cfg.distinct_shapes) max_n = std::min(max_n, 6);
    int n = rng.range(std::min(cfg.min_objects, max_n), max_n);

    std::vector<Shape> shapes;
    if (cfg.distinct_shapes) {
      auto pool = all_shapes();
      rng.shuffle(pool);
      shapes.assign(pool.begin(), pool.begin() + n);
    } else {
      for (int i = 0; i < n; ++i) shapes.push_back(rng.choice(all_shapes()));
    }
    std::vector<Color> colors;
    if (cfg.distinct_colors && n <= 6) {
      auto pool = all_colors();
      rng.shuffle(pool);
      colors.assign(pool.begin(), pool.begin() + n);
    } else {
      for (int i = 0; i < n; ++i) colors.push_back(rng.choice(all_colors()));
    }

    SceneGraph g;
    std::vector<ObjectKey> keys;
    for (int i = 0; i < n; ++i) {
      uint8_t idx = 1;
      while (g.has_object({shapes[i], colors[i], idx})) ++idx;
      ObjectKey k{shapes[i], colors[i], idx};
      g.insert_object(k);
      keys.push_back(k);
    }

    int m = rng.range(cfg.min_relations, cfg.max_relations);
    m = std::min(m, n - 1);
    DisjointSet ds(n);
    int placed = 0;
    for (int tries = 0; tries < 64 && placed < m; ++tries) {
      int a = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      int b = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      if (a == b || ds.find(a) == ds.find(b)) continue;
      Relation rel = rng.below(2) == 0 ? Relation::Above : Relation::LeftOf;
      if (rng.below(2) == 1) std::swap(a, b);
      ds.unite(a, b);
      g.insert_relation({rel, keys[a], keys[b]});
      ++placed;
    }

    if (!validate(g).empty()) continue;
    try {
      layout(g);
    } catch (const LayoutError&) {
      continue;
    }
    return g;
  }
  throw InfeasibleError("scene sampling failed to find a feasible target");
}

void execute_op_clean(SimState& state, const EditOp& op) {
  switch (op.kind) {
    case EditOp::Kind::AddObject: {
      SceneGraph next = apply_op(state.graph, op);
      state.placement = layout(next, state.placement);
      state.graph = next;
      break;
    }
    case EditOp::Kind::AddRelation: {
      SceneGraph next = apply_op(state.graph, op);
      state.placement = layout(next, state.placement);  // validates fixed
      state.graph = next;
      break;
    }
    case EditOp::Kind::ModifyAttribute: {
      ObjectKey k = resolve_ref(state.graph, op.a);
      SceneGraph next = apply_op(state.graph, op);
      ObjectKey nk{k.shape, op.new_color, k.index};
      Cell keep = *state.placement.find(k);
      state.placement.erase(k);
      state.placement.put(nk, keep);
      state.graph = next;
      break;
    }
    case EditOp::Kind::RemoveObject: {
      ObjectKey k = resolve_ref(state.graph, op.a);
      state.graph = apply_op(state.graph, op);
      state.placement.erase(k);
      break;
    }
    case EditOp::Kind::SwapPositions: {
      ObjectKey a = resolve_ref(state.graph, op.a);
      ObjectKey b = resolve_ref(state.graph, op.b);
      Cell ca = *state.placement.find(a);
      Cell cb = *state.placement.find(b);
      state.placement.put(a, cb);
      state.placement.put(b, ca);
      break;
    }
    case EditOp::Kind::MoveObject: {
      ObjectKey a = resolve_ref(state.graph, op.a);
      state.placement.put(a, move_target_cell(state.graph, state.placement, a));
      break;
    }
  }
}

void execute_step_clean(SimState& state, const Step& step) {
  size_t i = 0;
  const size_t n = step.ops.size();
  while (i < n) {
    const EditOp::Kind kind = step.ops[i].kind;
    if (kind != EditOp::Kind::AddObject && kind != EditOp::Kind::AddRelation) {
      execute_op_clean(state, step.ops[i]);
      ++i;
      continue;
    }
    // A run of adds lays out as one unit: relations fused into the step
    // decide where its new objects land, with prior cells held fixed. Op by
    // op the relation would arrive after its endpoint was already placed.
    SceneGraph next = state.graph;
    while (i < n && (step.ops[i].kind == EditOp::Kind::AddObject ||
                     step.ops[i].kind == EditOp::Kind::AddRelation)) {
      next = apply_op(next, step.ops[i]);
      ++i;
    }
    state.placement = layout(next, state.placement);
    state.graph = std::move(next);
  }
}

}  // namespace sketchloop
