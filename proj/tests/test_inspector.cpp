#include "doctest.h"

#include "sketchloop/inspector.hpp"
#include "sketchloop/orchestrator.hpp"

using namespace sketchloop;

namespace {

const char* kPairPrompt = "red circle above blue square";

RasterImage rendered(const char* dsl) {
  SceneGraph g = parse_scene(dsl);
  return render(layout(g), g);
}

}  // namespace

TEST_CASE("status names round-trip") {
  for (InspectStatus s :
       {InspectStatus::ConsistentComplete, InspectStatus::ConsistentIncomplete,
        InspectStatus::Conflict, InspectStatus::MalformedClaim,
        InspectStatus::Aligned, InspectStatus::Misaligned}) {
    CHECK(inspect_status_from_name(inspect_status_name(s)) == s);
  }
  CHECK(inspect_status_name(InspectStatus::ConsistentComplete) ==
        "consistent-complete");
  CHECK_THROWS(inspect_status_from_name("nonsense"));
}

TEST_CASE("subset claims are consistent, full claims complete") {
  SceneGraph target = parse_scene(kPairPrompt);
  Verdict partial = check_text_conflict(target, "blue square");
  CHECK(partial.status == InspectStatus::ConsistentIncomplete);
  CHECK(!partial.critique.has_value());

  Verdict whole = check_text_conflict(target, print_scene(target));
  CHECK(whole.status == InspectStatus::ConsistentComplete);
}

TEST_CASE("a wrong color claim is a conflict with a recolor fix") {
  SceneGraph target = parse_scene(kPairPrompt);
  Verdict v = check_text_conflict(target, "green circle above blue square");
  REQUIRE(v.status == InspectStatus::Conflict);
  REQUIRE(v.critique.has_value());
  CHECK(!v.critique->findings.empty());

  // Applying the corrective to the claim must land inside the target.
  SceneGraph claim = parse_scene("green circle above blue square");
  SceneGraph fixed = apply_edit_script(claim, v.critique->corrective);
  Verdict after = check_text_conflict(target, print_scene(fixed));
  CHECK((after.status == InspectStatus::ConsistentComplete ||
         after.status == InspectStatus::ConsistentIncomplete));
  CHECK(parse_instructions(v.critique->rendered_text) ==
        v.critique->corrective);
}

TEST_CASE("a contradicted relation is a conflict") {
  SceneGraph target = parse_scene(kPairPrompt);
  Verdict v = check_text_conflict(target, "blue square above red circle");
  CHECK(v.status == InspectStatus::Conflict);
  REQUIRE(v.critique.has_value());
  SceneGraph claim = parse_scene("blue square above red circle");
  SceneGraph fixed = apply_edit_script(claim, v.critique->corrective);
  Verdict after = check_text_conflict(target, print_scene(fixed));
  CHECK(after.status != InspectStatus::Conflict);
}

TEST_CASE("unparseable claims are malformed") {
  SceneGraph target = parse_scene(kPairPrompt);
  CHECK(check_text_conflict(target, "purple nonsense here").status ==
        InspectStatus::MalformedClaim);
  CHECK(check_text_conflict(target, "").status == InspectStatus::MalformedClaim);
}

TEST_CASE("image matching accepts any within-group cell assignment") {
  SceneGraph g = parse_scene(kPairPrompt);
  CHECK(image_matches_scene(g, rendered(kPairPrompt)));
  CHECK(!image_matches_scene(g, rendered("red circle; blue square")));
  CHECK(!image_matches_scene(g, rendered("green circle above blue square")));
  CHECK(!image_matches_scene(g, rendered("red circle")));

  // Two same-key objects: the relation can bind either one.
  SceneGraph twins = parse_scene("2 red circle; red circle#1 above blue square");
  CHECK(image_matches_scene(twins, render(layout(twins), twins)));
}

TEST_CASE("clean renders align with their own expectation") {
  SceneSamplerConfig sc;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(hash_combine(0xa113ull, seed));
    SceneGraph g = sample_scene(rng, sc);
    SimState st{g, layout(g)};
    Verdict v = check_image_alignment(st, render(st.placement, g));
    CHECK(v.status == InspectStatus::Aligned);
    CHECK(!v.critique.has_value());
  }
}

TEST_CASE("each sketch fault kind is called out and repaired in one round") {
  struct KindCase {
    FaultKind kind;
    std::array<double, 5> weights;
  };
  std::vector<KindCase> cases = {
      {FaultKind::WrongColor, {1, 0, 0, 0, 0}},
      {FaultKind::WrongShape, {0, 1, 0, 0, 0}},
      {FaultKind::RelationViolation, {0, 0, 1, 0, 0}},
      {FaultKind::Omission, {0, 0, 0, 1, 0}},
      {FaultKind::Duplicate, {0, 0, 0, 0, 1}},
  };
  for (const auto& kc : cases) {
    CAPTURE(fault_kind_name(kc.kind));
    RunConfig rc;
    rc.seed = 0;
    rc.plan_faults = FaultModel::none();
    rc.sketch_faults = FaultModel{0.5, kc.weights};
    rc.max_refine_rounds = 3;

    bool exercised = false;
    for (uint64_t seed = 0; seed < 80 && !exercised; ++seed) {
      rc.seed = seed;
      RunResult rr = run_trajectory(kPairPrompt, rc);
      size_t total_faults = 0;
      for (const auto& s : rr.steps)
        total_faults += s.sketch_faults.faults.size();
      if (total_faults != 1) continue;
      const StepTrace* hit = nullptr;
      for (const auto& s : rr.steps)
        if (!s.sketch_faults.faults.empty()) hit = &s;
      REQUIRE(hit != nullptr);
      if (hit->sketch_faults.faults[0].kind != kc.kind) continue;
      exercised = true;
      CHECK(hit->first_alignment.status == InspectStatus::Misaligned);
      REQUIRE(hit->first_alignment.critique.has_value());
      bool kind_seen = false;
      for (const auto& fnd : hit->first_alignment.critique->findings)
        if (fnd.kind == kc.kind) kind_seen = true;
      CHECK(kind_seen);
      CHECK(hit->refine_rounds == 1);
      CHECK(rr.trajectory.meta.success);
    }
    CHECK(exercised);
  }
}

TEST_CASE("reconstruction replays instructions over the observed image") {
  SceneGraph full = parse_scene(kPairPrompt);
  RasterImage before = rendered("red circle");
  SimState expected = reconstruct_expected(
      before, "add blue square below red circle", print_scene(full));
  CHECK(expected.graph == full);
  // The circle keeps its observed cell; the square lands somewhere below it.
  const Cell* ci = expected.placement.find({Shape::Circle, Color::Red, 1});
  const Cell* sq = expected.placement.find({Shape::Square, Color::Blue, 1});
  REQUIRE(ci != nullptr);
  REQUIRE(sq != nullptr);
  CHECK(*ci == Cell{0, 0});
  CHECK(ci->row < sq->row);
}

TEST_CASE("the exact judge prefers text conflicts over image drift") {
  ExactJudge judge;
  std::string full_text = print_scene(parse_scene(kPairPrompt));
  std::string ins = "add blue square below red circle";
  RasterImage before = rendered("red circle");
  RasterImage drift_img = rendered("red circle; blue square");

  Verdict conflict =
      judge.judge_step(kPairPrompt, "add green square below red circle",
                       "green square below red circle", before, drift_img);
  CHECK(conflict.status == InspectStatus::Conflict);

  Verdict ok =
      judge.judge_step(kPairPrompt, ins, full_text, before, rendered(kPairPrompt));
  CHECK(ok.status == InspectStatus::Aligned);

  Verdict drift = judge.judge_step(kPairPrompt, ins, full_text, before, drift_img);
  CHECK(drift.status == InspectStatus::Misaligned);
  REQUIRE(drift.critique.has_value());
  CHECK(!drift.critique->rendered_text.empty());
}

TEST_CASE("the wire judge loops back to the exact verdict") {
  int calls = 0;
  WireTransport loopback = [&](const std::string& req) {
    ++calls;
    return serve_judge_request(req);
  };
  WireJudge wire{loopback};
  ExactJudge exact;

  std::string full_text = print_scene(parse_scene(kPairPrompt));
  std::string ins = "add blue square below red circle";
  RasterImage before = rendered("red circle");
  struct WireCase {
    std::string des;
    RasterImage after;
  };
  std::vector<WireCase> wire_cases = {
      {"green circle above blue square", rendered(kPairPrompt)},
      {full_text, rendered(kPairPrompt)},
      {full_text, rendered("red circle; blue square")},
  };
  for (const auto& wc : wire_cases) {
    Verdict w = wire.judge_step(kPairPrompt, ins, wc.des, before, wc.after);
    Verdict e = exact.judge_step(kPairPrompt, ins, wc.des, before, wc.after);
    CHECK(w.status == e.status);
    CHECK(w.critique.has_value() == e.critique.has_value());
    if (w.critique && e.critique) {
      CHECK(w.critique->findings == e.critique->findings);
      CHECK(w.critique->rendered_text == e.critique->rendered_text);
    }
  }
  CHECK(calls == 3);
}

TEST_CASE("the wire judge retries flaky transports then gives up") {
  std::string full_text = print_scene(parse_scene(kPairPrompt));
  std::string ins = "add blue square below red circle";
  RasterImage before = rendered("red circle");
  RasterImage after = rendered(kPairPrompt);

  int calls = 0;
  WireTransport flaky =
      [&](const std::string& req) -> std::optional<std::string> {
    ++calls;
    if (calls < 3) return std::nullopt;
    return serve_judge_request(req);
  };
  WireJudge wire{flaky, WireJudgeConfig{3}};
  Verdict v = wire.judge_step(kPairPrompt, ins, full_text, before, after);
  CHECK(v.status == InspectStatus::Aligned);
  CHECK(calls == 3);

  calls = 0;
  WireTransport dead = [&](const std::string&) -> std::optional<std::string> {
    ++calls;
    return std::nullopt;
  };
  WireJudge never{dead, WireJudgeConfig{2}};
  CHECK_THROWS_AS(never.judge_step(kPairPrompt, ins, full_text, before, after),
                  JudgeError);
  CHECK(calls == 2);
}
