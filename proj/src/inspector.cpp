#include "sketchloop/inspector.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "json.hpp"

namespace sketchloop {

namespace {

using GroupId = std::pair<Shape, Color>;

std::string cell_str(const Cell& c) {
  return "r" + std::to_string(c.row) + "c" + std::to_string(c.col);
}

std::string combo_str(Shape s, Color c) {
  return color_name(c) + " " + shape_name(s);
}

FaultKind fault_kind_from_name(const std::string& name) {
  for (int i = 0; i <= 5; ++i) {
    FaultKind k = static_cast<FaultKind>(i);
    if (fault_kind_name(k) == name) return k;
  }
  throw JudgeError("unknown fault kind '" + name + "'");
}

}  // namespace

const std::string& inspect_status_name(InspectStatus s) {
  static const std::array<std::string, 6> names = {
      "consistent-complete", "consistent-incomplete", "conflict",
      "malformed-claim",     "aligned",               "misaligned"};
  return names[static_cast<size_t>(s)];
}

InspectStatus inspect_status_from_name(const std::string& name) {
  for (int i = 0; i <= 5; ++i) {
    InspectStatus s = static_cast<InspectStatus>(i);
    if (inspect_status_name(s) == name) return s;
  }
  throw JudgeError("unknown inspect status '" + name + "'");
}

namespace {

// Conflict detection shared between the initial check and corrective
// verification. Missing objects and relations are not conflicts; only
// claims the target rules out are.
struct ConflictScan {
  std::vector<ObjectKey> extra_objects;
  std::vector<RelationEdge> contradicted;  // claim's own edges
};

ConflictScan scan_conflicts(const SceneGraph& target, const SceneGraph& claim) {
  ConflictScan out;
  for (const auto& k : claim.objects)
    if (!target.has_object(k)) out.extra_objects.push_back(k);
  auto is_extra = [&](const ObjectKey& k) {
    return std::find(out.extra_objects.begin(), out.extra_objects.end(), k) !=
           out.extra_objects.end();
  };
  for (const auto& e : claim.relations) {
    if (is_extra(e.subject) || is_extra(e.object)) continue;
    RelationEdge reversed{e.rel, e.object, e.subject};
    bool contra = std::find(target.relations.begin(), target.relations.end(),
                            reversed) != target.relations.end();
    if (contra) out.contradicted.push_back(e);
  }
  return out;
}

}  // namespace

Verdict check_text_conflict(const SceneGraph& target,
                            const std::string& des_text) {
  Verdict v;
  SceneGraph claim;
  try {
    claim = parse_scene(des_text);
  } catch (const std::exception&) {
    v.status = InspectStatus::MalformedClaim;
    return v;
  }
  if (!validate(claim).empty()) {
    v.status = InspectStatus::MalformedClaim;
    return v;
  }

  ConflictScan scan = scan_conflicts(target, claim);
  if (scan.extra_objects.empty() && scan.contradicted.empty()) {
    v.status = claim == target ? InspectStatus::ConsistentComplete
                               : InspectStatus::ConsistentIncomplete;
    return v;
  }

  v.status = InspectStatus::Conflict;
  Critique crit;

  for (const auto& k : scan.extra_objects) {
    // Prefer reading the stray claim as a disguised target object at the
    // same group position: color first, then shape.
    std::optional<Color> true_color;
    for (int c = 1; c <= 6 && !true_color; ++c) {
      Color cc = color_from_code(static_cast<uint8_t>(c));
      if (cc != k.color && target.has_object({k.shape, cc, k.index}) &&
          !claim.has_object({k.shape, cc, k.index}))
        true_color = cc;
    }
    std::optional<Shape> true_shape;
    if (!true_color) {
      for (int s = 1; s <= 6 && !true_shape; ++s) {
        Shape ss = shape_from_code(static_cast<uint8_t>(s));
        if (ss != k.shape && target.has_object({ss, k.color, k.index}) &&
            !claim.has_object({ss, k.color, k.index}))
          true_shape = ss;
      }
    }
    if (true_color) {
      crit.findings.push_back(
          {FaultKind::WrongColor,
           "wrong-color: claim describes " + object_ref_string(claim, k) +
               ", target expects " + combo_str(k.shape, *true_color)});
      EditOp op;
      op.kind = EditOp::Kind::ModifyAttribute;
      op.a = make_ref(claim, k);
      op.new_color = *true_color;
      crit.corrective.push_back(op);
    } else if (true_shape) {
      crit.findings.push_back(
          {FaultKind::WrongShape,
           "wrong-shape: claim describes " + object_ref_string(claim, k) +
               ", target expects " + combo_str(*true_shape, k.color)});
      EditOp rem;
      rem.kind = EditOp::Kind::RemoveObject;
      rem.a = make_ref(claim, k);
      crit.corrective.push_back(rem);
      ObjectKey nk{*true_shape, k.color, k.index};
      EditOp add;
      add.kind = EditOp::Kind::AddObject;
      add.a = ref_of(nk);
      if (nk.index == 1 && claim.group(nk.shape, nk.color).empty())
        add.a.index.reset();
      crit.corrective.push_back(add);
      for (const auto& e : claim.relations) {
        if (e.subject != k && e.object != k) continue;
        RelationEdge mapped = e;
        if (mapped.subject == k) mapped.subject = nk;
        if (mapped.object == k) mapped.object = nk;
        bool wanted = std::find(target.relations.begin(),
                                target.relations.end(),
                                mapped) != target.relations.end();
        if (!wanted) continue;
        EditOp rel;
        rel.kind = EditOp::Kind::AddRelation;
        rel.a = ref_of(mapped.subject);
        rel.b = make_ref(claim, mapped.object);
        rel.rel = mapped.rel;
        crit.corrective.push_back(rel);
      }
    } else {
      crit.findings.push_back(
          {FaultKind::Duplicate,
           "unexpected object: claim describes " +
               object_ref_string(claim, k) +
               " which is not part of the target"});
      EditOp rem;
      rem.kind = EditOp::Kind::RemoveObject;
      rem.a = make_ref(claim, k);
      crit.corrective.push_back(rem);
    }
  }

  for (const auto& e : scan.contradicted) {
    crit.findings.push_back(
        {FaultKind::RelationViolation,
         "relation-violation: claim places " +
             object_ref_string(claim, e.subject) + " " +
             relation_name(e.rel) + " " + object_ref_string(claim, e.object) +
             ", target wants the opposite"});
    EditOp mv;
    mv.kind = EditOp::Kind::MoveObject;
    mv.a = make_ref(claim, e.subject);
    mv.rel = inverse_relation(e.rel);
    mv.b = make_ref(claim, e.object);
    crit.corrective.push_back(mv);
  }

  // The corrective must actually clear every contradiction; when the greedy
  // repair cannot (gapped sibling indices mostly), drop strays and flip the
  // bad relations instead.
  auto clears = [&](const EditScript& script) {
    try {
      SceneGraph repaired = apply_edit_script(claim, script);
      ConflictScan after = scan_conflicts(target, repaired);
      return after.extra_objects.empty() && after.contradicted.empty();
    } catch (const std::exception&) {
      return false;
    }
  };
  if (!clears(crit.corrective)) {
    EditScript fallback;
    for (const auto& k : scan.extra_objects) {
      EditOp rem;
      rem.kind = EditOp::Kind::RemoveObject;
      rem.a = make_ref(claim, k);
      fallback.push_back(rem);
    }
    for (const auto& e : scan.contradicted) {
      bool endpoint_gone = false;
      for (const auto& k : scan.extra_objects)
        if (e.subject == k || e.object == k) endpoint_gone = true;
      if (endpoint_gone) continue;
      EditOp mv;
      mv.kind = EditOp::Kind::MoveObject;
      mv.a = make_ref(claim, e.subject);
      mv.rel = inverse_relation(e.rel);
      mv.b = make_ref(claim, e.object);
      fallback.push_back(mv);
    }
    crit.corrective = fallback;
  }

  crit.rendered_text = render_instructions(crit.corrective);
  v.critique = std::move(crit);
  return v;
}

namespace {

// True when some within-group assignment of observed cells to the scene's
// keys satisfies every relation. Group sizes are at most 4, so trying
// permutations is cheap.
bool assignment_exists(const SceneGraph& g,
                       const std::map<GroupId, std::vector<Cell>>& obs_cells) {
  std::vector<std::pair<std::vector<ObjectKey>, std::vector<Cell>>> groups;
  for (const auto& [id, cells] : obs_cells) {
    std::vector<ObjectKey> keys;
    for (const auto& k : g.objects)
      if (k.shape == id.first && k.color == id.second) keys.push_back(k);
    groups.push_back({keys, cells});
  }
  std::map<std::string, Cell> assigned;
  std::function<bool(size_t)> search = [&](size_t gi) -> bool {
    if (gi == groups.size()) {
      for (const auto& e : g.relations) {
        const Cell& a = assigned.at(key_to_string(e.subject));
        const Cell& b = assigned.at(key_to_string(e.object));
        if (!relation_holds(e.rel, a, b)) return false;
      }
      return true;
    }
    auto& [keys, cells] = groups[gi];
    std::vector<size_t> perm(cells.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    do {
      for (size_t i = 0; i < keys.size(); ++i)
        assigned[key_to_string(keys[i])] = cells[perm[i]];
      if (search(gi + 1)) return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
  };
  return search(0);
}

struct ObsView {
  std::vector<PlacedObject> objs;
  std::vector<ObjectKey> keys;  // parallel to objs, row-major group indices
  SceneGraph graph;             // objects only
};

ObsView observe(const RasterImage& img) {
  ObsView v;
  v.objs = derender(img);
  for (const auto& o : v.objs) {
    uint8_t idx = 1;
    for (const auto& k : v.keys)
      if (k.shape == o.shape && k.color == o.color) ++idx;
    v.keys.push_back({o.shape, o.color, idx});
    v.graph.insert_object(v.keys.back());
  }
  return v;
}

}  // namespace

bool image_matches_scene(const SceneGraph& g, const RasterImage& img) {
  std::vector<PlacedObject> objs;
  try {
    objs = derender(img);
  } catch (const std::exception&) {
    return false;
  }
  std::map<GroupId, std::vector<Cell>> obs_cells;
  for (const auto& o : objs) obs_cells[{o.shape, o.color}].push_back(o.cell);
  std::map<GroupId, size_t> counts;
  for (const auto& k : g.objects) ++counts[{k.shape, k.color}];
  if (obs_cells.size() != counts.size()) return false;
  for (const auto& [id, n] : counts) {
    auto it = obs_cells.find(id);
    if (it == obs_cells.end() || it->second.size() != n) return false;
  }
  return assignment_exists(g, obs_cells);
}

Verdict check_image_alignment(const SimState& expected,
                              const RasterImage& observed) {
  Verdict v;
  ObsView obs = observe(observed);

  std::map<GroupId, std::vector<Cell>> obs_cells;
  for (const auto& o : obs.objs)
    obs_cells[{o.shape, o.color}].push_back(o.cell);
  std::map<GroupId, size_t> exp_counts;
  for (const auto& k : expected.graph.objects)
    ++exp_counts[{k.shape, k.color}];
  bool counts_ok = obs_cells.size() == exp_counts.size();
  for (const auto& [id, n] : exp_counts) {
    auto it = obs_cells.find(id);
    if (it == obs_cells.end() || it->second.size() != n) counts_ok = false;
  }
  if (counts_ok && assignment_exists(expected.graph, obs_cells)) {
    v.status = InspectStatus::Aligned;
    return v;
  }

  v.status = InspectStatus::Misaligned;
  Critique crit;

  struct ExpItem {
    ObjectKey key;
    Cell cell;
  };
  std::vector<ExpItem> exp;
  for (const auto& k : expected.graph.objects)
    exp.push_back({k, *expected.placement.find(k)});
  std::vector<int> exp_to_obs(exp.size(), -1);
  std::vector<bool> obs_used(obs.objs.size(), false);

  auto match = [&](auto&& pred) {
    for (size_t e = 0; e < exp.size(); ++e) {
      if (exp_to_obs[e] >= 0) continue;
      for (size_t o = 0; o < obs.objs.size(); ++o) {
        if (obs_used[o]) continue;
        if (!pred(exp[e], obs.objs[o])) continue;
        exp_to_obs[e] = static_cast<int>(o);
        obs_used[o] = true;
        break;
      }
    }
  };
  // Tiers: exact, recolored in place, reshaped in place, displaced.
  match([](const ExpItem& e, const PlacedObject& o) {
    return e.key.shape == o.shape && e.key.color == o.color && e.cell == o.cell;
  });
  std::vector<size_t> recolored, reshaped, displaced;
  auto snapshot = [&]() {
    std::vector<bool> done(exp.size());
    for (size_t e = 0; e < exp.size(); ++e) done[e] = exp_to_obs[e] >= 0;
    return done;
  };
  auto newly = [&](const std::vector<bool>& prev) {
    std::vector<size_t> out;
    for (size_t e = 0; e < exp.size(); ++e)
      if (exp_to_obs[e] >= 0 && !prev[e]) out.push_back(e);
    return out;
  };

  auto s1 = snapshot();
  match([](const ExpItem& e, const PlacedObject& o) {
    return e.key.shape == o.shape && e.key.color != o.color && e.cell == o.cell;
  });
  recolored = newly(s1);
  auto s2 = snapshot();
  match([](const ExpItem& e, const PlacedObject& o) {
    return e.key.shape != o.shape && e.key.color == o.color && e.cell == o.cell;
  });
  reshaped = newly(s2);
  auto s3 = snapshot();
  match([](const ExpItem& e, const PlacedObject& o) {
    return e.key.shape == o.shape && e.key.color == o.color;
  });
  displaced = newly(s3);

  auto obs_ref = [&](size_t o) { return make_ref(obs.graph, obs.keys[o]); };
  auto cell_of = [&](const ObjectKey& k) -> const Cell* {
    for (size_t e = 0; e < exp.size(); ++e)
      if (exp[e].key == k && exp_to_obs[e] >= 0)
        return &obs.objs[exp_to_obs[e]].cell;
    return nullptr;
  };

  for (size_t e : recolored) {
    size_t o = static_cast<size_t>(exp_to_obs[e]);
    crit.findings.push_back(
        {FaultKind::WrongColor,
         "wrong-color: " + combo_str(exp[e].key.shape, exp[e].key.color) +
             " drawn " + color_name(obs.objs[o].color) + " at " +
             cell_str(obs.objs[o].cell)});
    EditOp op;
    op.kind = EditOp::Kind::ModifyAttribute;
    op.a = obs_ref(o);
    op.new_color = exp[e].key.color;
    crit.corrective.push_back(op);
  }
  for (size_t e : reshaped) {
    size_t o = static_cast<size_t>(exp_to_obs[e]);
    crit.findings.push_back(
        {FaultKind::WrongShape,
         "wrong-shape: " + combo_str(exp[e].key.shape, exp[e].key.color) +
             " drawn as " + shape_name(obs.objs[o].shape) + " at " +
             cell_str(obs.objs[o].cell)});
    EditOp rem;
    rem.kind = EditOp::Kind::RemoveObject;
    rem.a = obs_ref(o);
    crit.corrective.push_back(rem);
    EditOp add;
    add.kind = EditOp::Kind::AddObject;
    add.a = {exp[e].key.shape, exp[e].key.color, std::nullopt};
    crit.corrective.push_back(add);
  }
  for (size_t e : displaced) {
    size_t o = static_cast<size_t>(exp_to_obs[e]);
    const ObjectKey& k = exp[e].key;
    std::optional<RelationEdge> broken;
    for (const auto& edge : expected.graph.relations) {
      if (edge.subject != k && edge.object != k) continue;
      const Cell* a = cell_of(edge.subject);
      const Cell* b = cell_of(edge.object);
      if (!a || !b) continue;
      if (!relation_holds(edge.rel, *a, *b)) {
        broken = edge;
        break;
      }
    }
    crit.findings.push_back(
        {FaultKind::RelationViolation,
         "misplaced: " + combo_str(k.shape, k.color) + " at " +
             cell_str(obs.objs[o].cell) + ", expected " +
             cell_str(exp[e].cell)});
    if (broken) {
      EditOp mv;
      mv.kind = EditOp::Kind::MoveObject;
      mv.a = obs_ref(o);
      const ObjectKey& other =
          broken->subject == k ? broken->object : broken->subject;
      mv.rel = broken->subject == k ? broken->rel
                                    : inverse_relation(broken->rel);
      const Cell* oc = cell_of(other);
      if (oc) {
        for (size_t oo = 0; oo < obs.objs.size(); ++oo)
          if (obs.objs[oo].cell == *oc) mv.b = obs_ref(oo);
        crit.corrective.push_back(mv);
        continue;
      }
    }
    EditOp rem;
    rem.kind = EditOp::Kind::RemoveObject;
    rem.a = obs_ref(o);
    crit.corrective.push_back(rem);
    EditOp add;
    add.kind = EditOp::Kind::AddObject;
    add.a = {k.shape, k.color, std::nullopt};
    crit.corrective.push_back(add);
  }
  for (size_t e = 0; e < exp.size(); ++e) {
    if (exp_to_obs[e] >= 0) continue;
    crit.findings.push_back(
        {FaultKind::Omission,
         "omission: " + combo_str(exp[e].key.shape, exp[e].key.color) +
             " missing from the image"});
    EditOp add;
    add.kind = EditOp::Kind::AddObject;
    add.a = {exp[e].key.shape, exp[e].key.color, std::nullopt};
    crit.corrective.push_back(add);
  }
  for (size_t o = 0; o < obs.objs.size(); ++o) {
    if (obs_used[o]) continue;
    bool known_combo =
        !expected.graph.group(obs.objs[o].shape, obs.objs[o].color).empty();
    crit.findings.push_back(
        {FaultKind::Duplicate,
         std::string(known_combo ? "duplicate: extra " : "unexpected: ") +
             combo_str(obs.objs[o].shape, obs.objs[o].color) + " at " +
             cell_str(obs.objs[o].cell)});
    EditOp rem;
    rem.kind = EditOp::Kind::RemoveObject;
    rem.a = obs_ref(o);
    crit.corrective.push_back(rem);
  }

  crit.rendered_text = render_instructions(crit.corrective);
  v.critique = std::move(crit);
  return v;
}

SimState reconstruct_expected(const RasterImage& before,
                              const std::string& ins_text,
                              const std::string& des_text) {
  ObsView base = observe(before);
  SceneGraph claim = parse_scene(des_text);

  SimState st;
  st.graph = base.graph;
  for (size_t i = 0; i < base.objs.size(); ++i)
    st.placement.put(base.keys[i], base.objs[i].cell);
  Step step;
  step.ops = parse_instructions(ins_text);
  execute_step_clean(st, step);

  // Siblings in the replayed state and in the claim may be labelled in a
  // different order; re-hang the replayed cells onto the claim's keys group
  // by group so the claim's relations are checkable.
  std::map<GroupId, std::vector<Cell>> cells;
  for (const auto& p : st.placement.items)
    cells[{p.key.shape, p.key.color}].push_back(p.cell);
  SimState out;
  out.graph = claim;
  std::map<GroupId, size_t> used;
  for (const auto& k : claim.objects) {
    GroupId id{k.shape, k.color};
    auto it = cells.find(id);
    if (it == cells.end() || used[id] >= it->second.size())
      throw JudgeError("claim does not match the instruction replay");
    out.placement.put(k, it->second[used[id]++]);
  }
  for (const auto& [id, v2] : cells)
    if (used[id] != v2.size())
      throw JudgeError("claim does not match the instruction replay");
  return out;
}

Verdict ExactJudge::judge_step(const std::string& prompt_dsl,
                               const std::string& ins_text,
                               const std::string& des_text,
                               const RasterImage& before,
                               const RasterImage& after) {
  SceneGraph target;
  try {
    target = parse_scene(prompt_dsl);
  } catch (const std::exception& e) {
    throw JudgeError(std::string("bad prompt: ") + e.what());
  }
  Verdict text = check_text_conflict(target, des_text);
  if (text.status == InspectStatus::Conflict ||
      text.status == InspectStatus::MalformedClaim)
    return text;
  SimState expected;
  try {
    expected = reconstruct_expected(before, ins_text, des_text);
  } catch (const std::exception&) {
    Verdict v;
    v.status = InspectStatus::MalformedClaim;
    return v;
  }
  return check_image_alignment(expected, after);
}

WireJudge::WireJudge(WireTransport transport, WireJudgeConfig cfg)
    : transport_(std::move(transport)), cfg_(cfg) {}

Verdict WireJudge::judge_step(const std::string& prompt_dsl,
                              const std::string& ins_text,
                              const std::string& des_text,
                              const RasterImage& before,
                              const RasterImage& after) {
  nlohmann::json req = {
      {"prompt_dsl", prompt_dsl},
      {"ins_text", ins_text},
      {"des_text", des_text},
      {"before_image", image_to_wire(before)},
      {"after_image", image_to_wire(after)},
  };
  std::string payload = req.dump();
  std::optional<std::string> reply;
  for (int attempt = 0; attempt < cfg_.max_attempts && !reply; ++attempt)
    reply = transport_(payload);
  if (!reply)
    throw JudgeError("judge transport failed after " +
                     std::to_string(cfg_.max_attempts) + " attempts");

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(*reply);
  } catch (const std::exception& e) {
    throw JudgeError(std::string("bad judge response: ") + e.what());
  }
  if (resp.contains("error"))
    throw JudgeError("judge error: " + resp["error"].get<std::string>());

  Verdict v;
  v.status = inspect_status_from_name(resp.at("status").get<std::string>());
  if (v.status == InspectStatus::Conflict ||
      v.status == InspectStatus::Misaligned) {
    Critique crit;
    for (const auto& f : resp.at("findings"))
      crit.findings.push_back(
          {fault_kind_from_name(f.at("kind").get<std::string>()),
           f.at("text").get<std::string>()});
    crit.rendered_text = resp.at("corrective_ins").get<std::string>();
    crit.corrective = crit.rendered_text.empty()
                          ? EditScript{}
                          : parse_instructions(crit.rendered_text);
    v.critique = std::move(crit);
  }
  return v;
}

std::string serve_judge_request(const std::string& request_json) {
  try {
    nlohmann::json req = nlohmann::json::parse(request_json);
    ExactJudge judge;
    Verdict v = judge.judge_step(req.at("prompt_dsl").get<std::string>(),
                                 req.at("ins_text").get<std::string>(),
                                 req.at("des_text").get<std::string>(),
                                 image_from_wire(
                                     req.at("before_image").get<std::string>()),
                                 image_from_wire(
                                     req.at("after_image").get<std::string>()));
    nlohmann::json resp;
    resp["status"] = inspect_status_name(v.status);
    resp["findings"] = nlohmann::json::array();
    resp["corrective_ins"] = "";
    if (v.critique) {
      for (const auto& f : v.critique->findings)
        resp["findings"].push_back(
            {{"kind", fault_kind_name(f.kind)}, {"text", f.text}});
      resp["corrective_ins"] = v.critique->rendered_text;
    }
    return resp.dump();
  } catch (const std::exception& e) {
    nlohmann::json resp;
    resp["error"] = e.what();
    return resp.dump();
  }
}

}  // namespace sketchloop
