#include "sketchloop/orchestrator.hpp"

#include <algorithm>

namespace sketchloop {

namespace {

using Visual = std::vector<PlacedObject>;

bool visual_taken(const Visual& v, const Cell& c) {
  for (const auto& o : v)
    if (o.cell == c) return true;
  return false;
}

Cell first_free(const Visual& v) {
  for (int r = 0; r < kGridSize; ++r)
    for (int c = 0; c < kGridSize; ++c)
      if (!visual_taken(v, {r, c})) return {r, c};
  throw RunError("sketch surface is full");
}

PlacedObject* at_cell(Visual& v, const Cell& c) {
  for (auto& o : v)
    if (o.cell == c) return &o;
  return nullptr;
}

void erase_at(Visual& v, const Cell& c) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [&](const PlacedObject& o) { return o.cell == c; }),
          v.end());
}

// Row-major keying of the drawn objects, the same view the inspector's
// corrective references use.
struct VisualKeys {
  SceneGraph graph;
  PlacementMap cells;
};

VisualKeys key_visual(const Visual& v) {
  Visual sorted = v;
  std::sort(sorted.begin(), sorted.end(),
            [](const PlacedObject& a, const PlacedObject& b) {
              return a.cell < b.cell;
            });
  VisualKeys out;
  for (const auto& o : sorted) {
    uint8_t idx = 1;
    for (const auto& p : out.cells.items)
      if (p.key.shape == o.shape && p.key.color == o.color) ++idx;
    ObjectKey k{o.shape, o.color, idx};
    out.graph.insert_object(k);
    out.cells.put(k, o.cell);
  }
  return out;
}

const SketchFault* fault_for(const StepFaults& sf, size_t op_index) {
  for (const auto& f : sf.faults)
    if (f.op_index == op_index) return &f;
  return nullptr;
}

// Renders one step onto the visual state while advancing the intended
// state, deviating wherever the fault plan says to. Ops whose target went
// missing through an earlier fault are skipped rather than invented.
// Add runs advance the intended state as one layout unit, mirroring
// execute_step_clean, so fused relations shape the intended cells.
void sketch_execute(Visual& A, SimState& I, const Step& executed,
                    const StepFaults& sf) {
  size_t j = 0;
  const size_t n = executed.ops.size();
  while (j < n) {
    if (executed.ops[j].kind == EditOp::Kind::AddObject ||
        executed.ops[j].kind == EditOp::Kind::AddRelation) {
      size_t end = j;
      SceneGraph next = I.graph;
      while (end < n && (executed.ops[end].kind == EditOp::Kind::AddObject ||
                         executed.ops[end].kind == EditOp::Kind::AddRelation)) {
        next = apply_op(next, executed.ops[end]);
        ++end;
      }
      SceneGraph shadow = I.graph;
      I.placement = layout(next, I.placement);
      I.graph = std::move(next);
      for (; j < end; ++j) {
        const EditOp& op = executed.ops[j];
        const SketchFault* f = fault_for(sf, j);
        if (op.kind == EditOp::Kind::AddObject) {
          SceneGraph grown = apply_op(shadow, op);
          ObjectKey nk{};
          for (const auto& k : grown.objects)
            if (!shadow.has_object(k)) nk = k;
          shadow = std::move(grown);
          Cell intended = *I.placement.find(nk);
          if (f && f->kind == FaultKind::Omission) continue;
          Shape s = f && f->kind == FaultKind::WrongShape ? f->wrong_shape
                                                          : nk.shape;
          Color c = f && f->kind == FaultKind::WrongColor ? f->wrong_color
                                                          : nk.color;
          Cell target = visual_taken(A, intended) ? first_free(A) : intended;
          A.push_back({s, c, target});
          if (f && f->kind == FaultKind::Duplicate) {
            Cell d = visual_taken(A, f->cell) ? first_free(A) : f->cell;
            A.push_back({nk.shape, nk.color, d});
          }
        } else {
          shadow = apply_op(shadow, op);
          if (!f || f->kind != FaultKind::RelationViolation) continue;
          ObjectKey sk = resolve_ref(I.graph, op.a);
          Cell from = *I.placement.find(sk);
          PlacedObject* obj = at_cell(A, from);
          if (!obj) continue;
          Cell to = visual_taken(A, f->cell) ? first_free(A) : f->cell;
          obj->cell = to;
        }
      }
      continue;
    }
    const EditOp& op = executed.ops[j];
    const SketchFault* f = fault_for(sf, j);
    SimState before = I;
    execute_op_clean(I, op);
    switch (op.kind) {
      case EditOp::Kind::AddObject:
      case EditOp::Kind::AddRelation:
        break;
      case EditOp::Kind::ModifyAttribute: {
        ObjectKey k = resolve_ref(before.graph, op.a);
        Cell cell = *before.placement.find(k);
        if (f && f->kind == FaultKind::Omission) break;
        PlacedObject* obj = at_cell(A, cell);
        if (!obj) break;
        obj->color = f && f->kind == FaultKind::WrongColor ? f->wrong_color
                                                           : op.new_color;
        break;
      }
      case EditOp::Kind::RemoveObject: {
        ObjectKey k = resolve_ref(before.graph, op.a);
        Cell cell = *before.placement.find(k);
        if (f && f->kind == FaultKind::Omission) break;
        erase_at(A, cell);
        break;
      }
      case EditOp::Kind::SwapPositions: {
        ObjectKey a = resolve_ref(before.graph, op.a);
        ObjectKey b = resolve_ref(before.graph, op.b);
        if (f && f->kind == FaultKind::Omission) break;
        PlacedObject* oa = at_cell(A, *before.placement.find(a));
        PlacedObject* ob = at_cell(A, *before.placement.find(b));
        if (!oa || !ob) break;
        std::swap(oa->cell, ob->cell);
        break;
      }
      case EditOp::Kind::MoveObject: {
        ObjectKey k = resolve_ref(before.graph, op.a);
        Cell from = *before.placement.find(k);
        PlacedObject* obj = at_cell(A, from);
        if (!obj) break;
        Cell to = f && f->kind == FaultKind::RelationViolation
                      ? f->cell
                      : *I.placement.find(k);
        if (!(to == from) && visual_taken(A, to)) to = first_free(A);
        obj->cell = to;
        break;
      }
    }
    ++j;
  }
}

// Applies a corrective script to the drawing. Adds and moves take their
// cells from the intended state when one is open, so a single round restores
// alignment for every fault the inspector can diagnose.
void apply_corrective(Visual& A, const EditScript& script, const SimState& I) {
  for (const auto& op : script) {
    VisualKeys vk = key_visual(A);
    try {
      switch (op.kind) {
        case EditOp::Kind::ModifyAttribute: {
          ObjectKey k = resolve_ref(vk.graph, op.a);
          PlacedObject* obj = at_cell(A, *vk.cells.find(k));
          if (obj) obj->color = op.new_color;
          break;
        }
        case EditOp::Kind::RemoveObject: {
          ObjectKey k = resolve_ref(vk.graph, op.a);
          erase_at(A, *vk.cells.find(k));
          break;
        }
        case EditOp::Kind::AddObject: {
          Shape s = op.a.shape;
          Color c = op.a.color ? *op.a.color : Color::Red;
          std::optional<Cell> cell;
          for (const auto& k : I.graph.group(s, c)) {
            const Cell* ic = I.placement.find(k);
            if (ic && !visual_taken(A, *ic)) {
              cell = *ic;
              break;
            }
          }
          if (!cell) cell = first_free(A);
          A.push_back({s, c, *cell});
          break;
        }
        case EditOp::Kind::MoveObject: {
          ObjectKey k = resolve_ref(vk.graph, op.a);
          ObjectKey b = resolve_ref(vk.graph, op.b);
          PlacedObject* obj = at_cell(A, *vk.cells.find(k));
          if (!obj) break;
          Cell bc = *vk.cells.find(b);
          std::optional<Cell> cell;
          for (const auto& ik : I.graph.group(k.shape, k.color)) {
            const Cell* ic = I.placement.find(ik);
            if (!ic) continue;
            bool open = !visual_taken(A, *ic) || *ic == obj->cell;
            if (open && relation_holds(op.rel, *ic, bc)) {
              cell = *ic;
              break;
            }
          }
          if (!cell) {
            for (int r = 0; r < kGridSize && !cell; ++r)
              for (int c2 = 0; c2 < kGridSize && !cell; ++c2) {
                Cell cand{r, c2};
                bool open = !visual_taken(A, cand) || cand == obj->cell;
                if (open && relation_holds(op.rel, cand, bc)) cell = cand;
              }
          }
          if (cell) obj->cell = *cell;
          break;
        }
        case EditOp::Kind::SwapPositions: {
          ObjectKey a = resolve_ref(vk.graph, op.a);
          ObjectKey b = resolve_ref(vk.graph, op.b);
          PlacedObject* oa = at_cell(A, *vk.cells.find(a));
          PlacedObject* ob = at_cell(A, *vk.cells.find(b));
          if (oa && ob) std::swap(oa->cell, ob->cell);
          break;
        }
        case EditOp::Kind::AddRelation:
          break;  // claim-level only, nothing to draw
      }
    } catch (const EditError&) {
      // Reference into a scene the drawing no longer matches: skip the op
      // and let the next inspection round deal with the remainder.
    }
  }
}

struct PreparedRun {
  SceneGraph full;
  SceneGraph base;
  PlacementMap base_placement;
  Visual start;
  EditProgram program;
};

PreparedRun prepare(const std::string& prompt, const RunConfig& cfg,
                    const std::optional<RasterImage>& initial) {
  PreparedRun pr;
  try {
    pr.full = parse_scene(prompt);
  } catch (const std::exception& e) {
    throw RunError(std::string("bad prompt: ") + e.what());
  }
  auto violations = validate(pr.full);
  if (!violations.empty())
    throw RunError("bad prompt: " + violations.front());

  if (initial) {
    std::vector<PlacedObject> objs;
    try {
      objs = derender(*initial);
    } catch (const std::exception& e) {
      throw RunError(std::string("bad initial image: ") + e.what());
    }
    pr.base_placement = keyed_placement(objs, &pr.base);
    for (const auto& k : pr.base.objects)
      if (pr.base.group(k.shape, k.color).size() >
          pr.full.group(k.shape, k.color).size())
        throw RunError("initial image holds objects the prompt scene lacks");
    if (pr.base.objects.size() >= pr.full.objects.size())
      throw RunError("initial image already covers the prompt scene");
    pr.start = objs;
  }
  pr.program = plan_program(pr.full, cfg, pr.base, pr.base_placement);
  return pr;
}

Segment plan_segment(const Step& s) {
  Segment seg;
  seg.kind = SegmentKind::Plan;
  seg.ins_text = s.ins_text;
  seg.des_text = s.des_text;
  return seg;
}

Segment refine_segment(const Critique& c) {
  Segment seg;
  seg.kind = SegmentKind::Refine;
  seg.text = c.rendered_text;
  seg.findings = c.findings;
  return seg;
}

Segment vision_segment(const RasterImage& img) {
  Segment seg;
  seg.kind = SegmentKind::Vision;
  seg.image = img;
  return seg;
}

uint64_t step_seed(const RunConfig& cfg, size_t i) {
  return hash_combine(cfg.seed, 0x57e9000ull + i);
}

}  // namespace

EditProgram plan_program(const SceneGraph& full, const RunConfig& cfg,
                         const SceneGraph& base,
                         const PlacementMap& base_placement) {
  SubgraphChain chain =
      subsample_chain(full, hash_combine(cfg.seed, 0xc4a11ull), cfg.k_hint,
                      base, base_placement);
  EditProgram prog = synthesize_program(chain, base);
  if (cfg.augmentation_ratio > 0.0)
    prog = augment_program(prog, hash_combine(cfg.seed, 0xa06ull),
                           cfg.augmentation_ratio, base, base_placement);
  return prog;
}

RunResult run_trajectory(const std::string& prompt, const RunConfig& cfg,
                         const std::optional<RasterImage>& initial) {
  PreparedRun pr = prepare(prompt, cfg, initial);
  RunResult rr;
  Trajectory& T = rr.trajectory;
  T.prompt = prompt;
  T.initial = initial;

  Visual A = pr.start;
  SimState I{pr.base, pr.base_placement};      // claim timeline
  SimState clean{pr.base, pr.base_placement};  // fault-planning timeline

  for (size_t i = 0; i < pr.program.steps.size(); ++i) {
    const Step& clean_step = pr.program.steps[i];
    uint64_t seed = step_seed(cfg, i);

    StepTrace tr;
    tr.clean = clean_step;
    tr.before_image = render_objects(A);

    SimState clean_after = clean;
    execute_step_clean(clean_after, clean_step);
    SketchContext ctx{clean_after.graph, clean_after.placement, {}};
    for (const auto& p : clean_after.placement.items)
      ctx.occupied.insert(p.cell);
    StepFaults sf =
        inject_sketch_faults(clean_step, ctx, seed, cfg.sketch_faults);
    tr.sketch_faults = sf;

    PlanFaultResult pf =
        inject_plan_fault(clean_step, pr.full, I.graph,
                          hash_combine(seed, 0x91a9ull), cfg.plan_faults);
    Step claimed = pf.step;
    tr.planned = claimed;
    tr.plan_fault = pf.label;
    if (pf.label.kind != FaultKind::None)
      T.meta.plan_faults.push_back(pf.label);

    T.segments.push_back(plan_segment(claimed));

    tr.text_verdict = check_text_conflict(pr.full, claimed.des_text);
    Step executed = claimed;
    if (cfg.inspect_plan_before_sketch && cfg.max_refine_rounds >= 1 &&
        tr.text_verdict.status == InspectStatus::Conflict) {
      T.segments.push_back(refine_segment(*tr.text_verdict.critique));
      executed = clean_step;
      try {
        SceneGraph claim_graph = parse_scene(claimed.des_text);
        SceneGraph repaired = apply_edit_script(
            claim_graph, tr.text_verdict.critique->corrective);
        SimState probe = I;
        execute_step_clean(probe, clean_step);
        if (repaired != probe.graph) {
          Step alt;
          alt.ops = diff(repaired, I.graph);
          alt.ins_text = render_instructions(alt.ops);
          alt.des_text = print_scene(repaired);
          SimState probe2 = I;
          execute_step_clean(probe2, alt);
          executed = alt;
        }
      } catch (const std::exception&) {
        executed = clean_step;  // repair not executable, fall back to intent
      }
    }

    try {
      sketch_execute(A, I, executed, sf);
    } catch (const std::exception& e) {
      throw RunError(std::string("sketch execution failed: ") + e.what());
    }
    tr.intended_after = I;

    RasterImage img = render_objects(A);
    tr.after_image = img;
    T.segments.push_back(vision_segment(img));

    Verdict al = check_image_alignment(I, img);
    tr.first_alignment = al;
    int rounds = 0;
    while (al.status == InspectStatus::Misaligned &&
           rounds < cfg.max_refine_rounds) {
      ++rounds;
      T.segments.push_back(refine_segment(*al.critique));
      apply_corrective(A, al.critique->corrective, I);
      img = render_objects(A);
      T.segments.push_back(vision_segment(img));
      al = check_image_alignment(I, img);
    }
    tr.refine_rounds = rounds;
    tr.final_image = img;
    T.meta.refine_rounds += rounds;
    for (const auto& f : sf.faults) T.meta.sketch_faults.push_back(f.label);

    if (cfg.force_emit_clean_inspect &&
        al.status == InspectStatus::Aligned &&
        i + 1 < pr.program.steps.size()) {
      Segment seg;
      seg.kind = SegmentKind::Inspect;
      seg.text = "ok";
      T.segments.push_back(seg);
    }

    clean = clean_after;
    rr.steps.push_back(std::move(tr));
  }

  T.meta.steps = static_cast<int>(pr.program.steps.size());
  T.meta.success =
      image_matches_scene(pr.full, rr.steps.back().final_image);
  validate_trajectory(T);
  return rr;
}

RunResult single_pass(const std::string& prompt, const RunConfig& cfg,
                      const std::optional<RasterImage>& initial) {
  PreparedRun pr = prepare(prompt, cfg, initial);
  RunResult rr;
  Trajectory& T = rr.trajectory;
  T.prompt = prompt;
  T.initial = initial;

  Visual A = pr.start;
  SimState I{pr.base, pr.base_placement};
  SimState clean{pr.base, pr.base_placement};

  for (size_t i = 0; i < pr.program.steps.size(); ++i) {
    const Step& clean_step = pr.program.steps[i];
    uint64_t seed = step_seed(cfg, i);

    StepTrace tr;
    tr.clean = clean_step;
    tr.before_image = render_objects(A);

    SimState clean_after = clean;
    execute_step_clean(clean_after, clean_step);
    SketchContext ctx{clean_after.graph, clean_after.placement, {}};
    for (const auto& p : clean_after.placement.items)
      ctx.occupied.insert(p.cell);
    StepFaults sf =
        inject_sketch_faults(clean_step, ctx, seed, cfg.sketch_faults);
    tr.sketch_faults = sf;

    PlanFaultResult pf =
        inject_plan_fault(clean_step, pr.full, I.graph,
                          hash_combine(seed, 0x91a9ull), cfg.plan_faults);
    Step claimed = pf.step;
    tr.planned = claimed;
    tr.plan_fault = pf.label;
    if (pf.label.kind != FaultKind::None)
      T.meta.plan_faults.push_back(pf.label);

    T.segments.push_back(plan_segment(claimed));
    tr.text_verdict = check_text_conflict(pr.full, claimed.des_text);

    try {
      sketch_execute(A, I, claimed, sf);
    } catch (const std::exception& e) {
      throw RunError(std::string("sketch execution failed: ") + e.what());
    }
    tr.intended_after = I;

    RasterImage img = render_objects(A);
    tr.after_image = img;
    tr.final_image = img;
    tr.first_alignment = check_image_alignment(I, img);
    T.segments.push_back(vision_segment(img));
    for (const auto& f : sf.faults) T.meta.sketch_faults.push_back(f.label);

    clean = clean_after;
    rr.steps.push_back(std::move(tr));
  }

  T.meta.steps = static_cast<int>(pr.program.steps.size());
  T.meta.success =
      image_matches_scene(pr.full, rr.steps.back().final_image);
  validate_trajectory(T);
  return rr;
}

void validate_trajectory(const Trajectory& t) {
  const auto& segs = t.segments;
  if (segs.empty()) throw RunError("trajectory has no segments");
  if (segs.back().kind != SegmentKind::Vision)
    throw RunError("trajectory must end on a vision segment");
  size_t i = 0;
  while (i < segs.size()) {
    if (segs[i].kind != SegmentKind::Plan)
      throw RunError("expected a plan segment at position " +
                     std::to_string(i));
    ++i;
    if (i < segs.size() && segs[i].kind == SegmentKind::Refine) ++i;
    if (i >= segs.size() || segs[i].kind != SegmentKind::Vision)
      throw RunError("expected a vision segment at position " +
                     std::to_string(i));
    ++i;
    while (i < segs.size() && segs[i].kind == SegmentKind::Refine) {
      ++i;
      if (i >= segs.size() || segs[i].kind != SegmentKind::Vision)
        throw RunError("refine segment without a following vision at " +
                       std::to_string(i));
      ++i;
    }
    if (i < segs.size() && segs[i].kind == SegmentKind::Inspect) {
      if (i + 1 >= segs.size())
        throw RunError("inspect segment cannot close the trajectory");
      ++i;
    }
  }
}

}  // namespace sketchloop
