#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sketchloop/inspector.hpp"
#include "sketchloop/microworld.hpp"
#include "sketchloop/planner.hpp"

namespace sketchloop {

class RunError : public std::runtime_error {
 public:
  explicit RunError(const std::string& what) : std::runtime_error(what) {}
};

enum class SegmentKind : uint8_t { Plan, Vision, Refine, Inspect };

struct Segment {
  SegmentKind kind = SegmentKind::Plan;
  std::string ins_text;            // Plan
  std::string des_text;            // Plan
  std::string text;                // Refine: corrective instructions
  std::vector<Finding> findings;   // Refine: diagnosis (metadata, untokenized)
  RasterImage image;               // Vision
};

struct TrajectoryMeta {
  int steps = 0;
  int refine_rounds = 0;
  bool success = false;
  std::vector<FaultLabel> plan_faults;    // kind None entries omitted
  std::vector<FaultLabel> sketch_faults;
};

// One interleaved generation episode. Segment grammar per step:
//   plan refine? vision (refine vision)* inspect?
// with the stream ending on a vision segment. `initial` holds the starting
// image in editing mode.
struct Trajectory {
  std::string prompt;
  std::optional<RasterImage> initial;
  std::vector<Segment> segments;
  TrajectoryMeta meta;
};

// Everything the dataset compiler needs about one executed step.
struct StepTrace {
  Step planned;             // step as claimed (after any plan corruption)
  Step clean;               // intended step before corruption
  FaultLabel plan_fault;    // kind None when the plan was clean
  StepFaults sketch_faults;
  RasterImage before_image;
  RasterImage after_image;  // first render of this step
  RasterImage final_image;  // accepted render after refinement
  Verdict text_verdict;     // claim vs target
  Verdict first_alignment;  // first render vs intent
  int refine_rounds = 0;
  SimState intended_after;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<StepTrace> steps;
};

struct RunConfig {
  uint64_t seed = 0;
  FaultModel plan_faults = FaultModel::none();
  FaultModel sketch_faults = FaultModel::none();
  int max_refine_rounds = 3;  // per step; image repairs only
  std::optional<int> k_hint;
  double augmentation_ratio = 0.0;
  bool inspect_plan_before_sketch = true;
  bool force_emit_clean_inspect = false;
};

// Plans the edit program for a target scene: chain subsampling, op
// synthesis, then augmentation. Deterministic in (cfg.seed, inputs); the
// interleaved run and the single-pass baseline share it.
EditProgram plan_program(const SceneGraph& full, const RunConfig& cfg,
                         const SceneGraph& base = {},
                         const PlacementMap& base_placement = {});

// Full interleaved loop: plan each step, repair claim conflicts before
// sketching, render with fault injection, inspect the result and refine up
// to cfg.max_refine_rounds times per step. Pass `initial` for editing mode;
// its objects must form a strict subset of the prompt scene.
RunResult run_trajectory(const std::string& prompt, const RunConfig& cfg,
                         const std::optional<RasterImage>& initial =
                             std::nullopt);

// Baseline without inspection or refinement: identical planning and fault
// draws, every step rendered once and accepted as-is.
RunResult single_pass(const std::string& prompt, const RunConfig& cfg,
                      const std::optional<RasterImage>& initial =
                          std::nullopt);

// Throws RunError when the segment sequence breaks the grammar above.
void validate_trajectory(const Trajectory& t);

}  // namespace sketchloop
