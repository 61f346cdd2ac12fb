#include "doctest.h"

#include "sketchloop/orchestrator.hpp"

using namespace sketchloop;

namespace {

const char* kPairPrompt = "red circle above blue square";

RasterImage rendered(const char* dsl) {
  SceneGraph g = parse_scene(dsl);
  return render(layout(g), g);
}

int count_kind(const Trajectory& t, SegmentKind k) {
  int n = 0;
  for (const auto& s : t.segments)
    if (s.kind == k) ++n;
  return n;
}

}  // namespace

TEST_CASE("the seed seven clean run is pinned down") {
  RunConfig rc;
  rc.seed = 7;
  RunResult rr = run_trajectory(kPairPrompt, rc);
  const Trajectory& t = rr.trajectory;
  CHECK(t.meta.steps == 2);
  CHECK(t.meta.refine_rounds == 0);
  CHECK(t.meta.success);
  REQUIRE(t.segments.size() == 4);
  CHECK(t.segments[0].kind == SegmentKind::Plan);
  CHECK(t.segments[1].kind == SegmentKind::Vision);
  CHECK(t.segments[2].kind == SegmentKind::Plan);
  CHECK(t.segments[3].kind == SegmentKind::Vision);
  CHECK(image_matches_scene(parse_scene(kPairPrompt), t.segments[3].image));
  REQUIRE(rr.steps.size() == 2);
  CHECK(rr.steps[1].final_image == t.segments[3].image);
}

TEST_CASE("clean runs never refine and always land on the target") {
  SceneSamplerConfig sc;
  for (uint64_t seed = 0; seed < 150; ++seed) {
    Rng rng(hash_combine(0x0cc1ull, seed));
    SceneGraph full = sample_scene(rng, sc);
    RunConfig rc;
    rc.seed = seed;
    RunResult rr = run_trajectory(print_scene(full), rc);
    const Trajectory& t = rr.trajectory;
    CHECK_NOTHROW(validate_trajectory(t));
    CHECK(t.meta.refine_rounds == 0);
    CHECK(t.meta.success);
    CHECK(count_kind(t, SegmentKind::Refine) == 0);
    CHECK(t.meta.steps == count_kind(t, SegmentKind::Plan));
    CHECK(image_matches_scene(full, t.segments.back().image));
  }
}

TEST_CASE("a single sketch fault costs one refine round and still succeeds") {
  bool exercised = false;
  for (uint64_t seed = 0; seed < 60 && !exercised; ++seed) {
    RunConfig rc;
    rc.seed = seed;
    rc.sketch_faults = FaultModel::uniform(0.4);
    RunResult rr = run_trajectory(kPairPrompt, rc);
    const Trajectory& t = rr.trajectory;
    if (t.meta.sketch_faults.size() != 1) continue;
    exercised = true;
    CHECK(t.meta.refine_rounds == 1);
    CHECK(t.meta.success);
    CHECK(count_kind(t, SegmentKind::Refine) == 1);
    // The image repair sits between the faulty render and the fixed one.
    for (size_t i = 0; i < t.segments.size(); ++i) {
      if (t.segments[i].kind != SegmentKind::Refine) continue;
      REQUIRE(i > 0);
      REQUIRE(i + 1 < t.segments.size());
      CHECK(t.segments[i - 1].kind == SegmentKind::Vision);
      CHECK(t.segments[i + 1].kind == SegmentKind::Vision);
      CHECK(!t.segments[i].text.empty());
      CHECK(!t.segments[i].findings.empty());
    }
  }
  CHECK(exercised);
}

TEST_CASE("plan faults are repaired before any sketching") {
  RunConfig rc;
  rc.seed = 3;
  rc.plan_faults = FaultModel::uniform(1.0);
  RunResult rr = run_trajectory(kPairPrompt, rc);
  const Trajectory& t = rr.trajectory;
  CHECK(!t.meta.plan_faults.empty());
  CHECK(t.meta.success);
  // Claim repairs precede the render, so they never count as image rounds.
  CHECK(t.meta.refine_rounds == 0);
  bool plan_refine_seen = false;
  for (size_t i = 0; i + 1 < t.segments.size(); ++i) {
    if (t.segments[i].kind == SegmentKind::Plan &&
        t.segments[i + 1].kind == SegmentKind::Refine) {
      plan_refine_seen = true;
      CHECK(t.segments[i + 2].kind == SegmentKind::Vision);
    }
  }
  CHECK(plan_refine_seen);
  for (const auto& step : rr.steps) {
    if (step.plan_fault.kind == FaultKind::None) continue;
    CHECK(step.text_verdict.status == InspectStatus::Conflict);
  }
}

TEST_CASE("the single pass shares planning and clean renders") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    RunConfig rc;
    rc.seed = seed;
    RunResult inter = run_trajectory(kPairPrompt, rc);
    RunResult solo = single_pass(kPairPrompt, rc);
    CHECK(solo.trajectory.meta.success);
    CHECK(solo.trajectory.meta.refine_rounds == 0);
    CHECK(count_kind(solo.trajectory, SegmentKind::Refine) == 0);
    REQUIRE(inter.steps.size() == solo.steps.size());
    CHECK(inter.steps.back().final_image == solo.steps.back().final_image);
  }
}

TEST_CASE("uncorrected faults sink the single pass but not the loop") {
  RunConfig rc;
  rc.sketch_faults = FaultModel{1.0, {1, 0, 0, 0, 0}};
  SceneGraph target = parse_scene("red circle");
  bool solo_failed = false;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    rc.seed = seed;
    RunResult solo = single_pass("red circle", rc);
    if (!solo.trajectory.meta.success) solo_failed = true;
    CHECK(!image_matches_scene(target, solo.steps.back().final_image));

    RunResult loop = run_trajectory("red circle", rc);
    CHECK(loop.trajectory.meta.success);
    CHECK(loop.trajectory.meta.refine_rounds >= 1);
    CHECK(image_matches_scene(target, loop.steps.back().final_image));
  }
  CHECK(solo_failed);
}

TEST_CASE("fault draws are shared between the two modes") {
  RunConfig rc;
  rc.sketch_faults = FaultModel::uniform(0.5);
  for (uint64_t seed = 0; seed < 40; ++seed) {
    rc.seed = seed;
    RunResult inter = run_trajectory(kPairPrompt, rc);
    RunResult solo = single_pass(kPairPrompt, rc);
    REQUIRE(inter.steps.size() == solo.steps.size());
    // Draws ride the clean timeline, so both modes corrupt the same ops.
    // Rendered pixels only stay equal until the first repair diverges them.
    bool diverged = false;
    for (size_t i = 0; i < inter.steps.size(); ++i) {
      const auto& a = inter.steps[i].sketch_faults.faults;
      const auto& b = solo.steps[i].sketch_faults.faults;
      REQUIRE(a.size() == b.size());
      for (size_t j = 0; j < a.size(); ++j) CHECK(a[j].kind == b[j].kind);
      if (!diverged) {
        CHECK(inter.steps[i].after_image == solo.steps[i].after_image);
      }
      if (inter.steps[i].refine_rounds > 0) diverged = true;
    }
  }
}

TEST_CASE("editing mode starts from the given image") {
  RasterImage initial = rendered("red circle");
  RunConfig rc;
  rc.seed = 11;
  RunResult rr = run_trajectory(kPairPrompt, rc, initial);
  const Trajectory& t = rr.trajectory;
  REQUIRE(t.initial.has_value());
  CHECK(*t.initial == initial);
  CHECK(t.meta.success);
  CHECK(image_matches_scene(parse_scene(kPairPrompt), t.segments.back().image));
  // The already present circle is never re-added.
  for (const auto& step : rr.steps)
    for (const auto& op : step.clean.ops)
      if (op.kind == EditOp::Kind::AddObject)
        CHECK(op.a.shape != Shape::Circle);
}

TEST_CASE("an initial image that already covers the prompt is rejected") {
  RasterImage initial = rendered(kPairPrompt);
  RunConfig rc;
  CHECK_THROWS_AS(run_trajectory(kPairPrompt, rc, initial), RunError);
}

TEST_CASE("the grammar validator rejects malformed sequences") {
  Segment plan{SegmentKind::Plan, "", "", "", {}, {}};
  Segment vision{SegmentKind::Vision, "", "", "", {}, {}};
  Segment refine{SegmentKind::Refine, "", "", "", {}, {}};
  Segment inspect{SegmentKind::Inspect, "", "", "", {}, {}};

  auto traj = [](std::vector<Segment> segs) {
    Trajectory t;
    t.prompt = "red circle";
    t.segments = std::move(segs);
    return t;
  };

  CHECK_THROWS_AS(validate_trajectory(traj({})), RunError);
  CHECK_THROWS_AS(validate_trajectory(traj({plan})), RunError);
  CHECK_THROWS_AS(validate_trajectory(traj({vision})), RunError);
  CHECK_THROWS_AS(validate_trajectory(traj({plan, vision, refine})), RunError);
  CHECK_THROWS_AS(validate_trajectory(traj({plan, plan, vision})), RunError);
  CHECK_THROWS_AS(validate_trajectory(traj({plan, vision, inspect})), RunError);
  CHECK_NOTHROW(validate_trajectory(traj({plan, vision})));
  CHECK_NOTHROW(validate_trajectory(traj({plan, refine, vision})));
  CHECK_NOTHROW(validate_trajectory(traj({plan, vision, refine, vision})));
  CHECK_NOTHROW(
      validate_trajectory(traj({plan, vision, inspect, plan, vision})));
}

TEST_CASE("forced inspects appear after clean steps too") {
  RunConfig rc;
  rc.seed = 7;
  rc.force_emit_clean_inspect = true;
  RunResult rr = run_trajectory(kPairPrompt, rc);
  const Trajectory& t = rr.trajectory;
  CHECK_NOTHROW(validate_trajectory(t));
  // Two steps; the closing step cannot carry one, so exactly one inspect.
  CHECK(count_kind(t, SegmentKind::Inspect) == 1);
  for (const auto& s : t.segments)
    if (s.kind == SegmentKind::Inspect) CHECK(s.text == "ok");
}
