#pragma once

#include <cstdint>
#include <optional>

#include "sketchloop/edit.hpp"
#include "sketchloop/microworld.hpp"
#include "sketchloop/rng.hpp"
#include "sketchloop/scene_graph.hpp"

namespace sketchloop {

// Monotone chain of closed subgraphs ending at the full target scene.
// graphs[i] is the intended scene after step i+1.
struct SubgraphChain {
  std::vector<SceneGraph> graphs;
};

class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what)
      : std::runtime_error(what) {}
};

// Applies one op with program-execution semantics: placement-level ops
// (SwapPositions, MoveObject) leave the graph unchanged, ModifyAttribute
// errors on a key collision instead of re-indexing. Throws EditError on
// unresolved references or an invalid result.
SceneGraph apply_op(const SceneGraph& g, const EditOp& op);

// Samples a chain of k closed subgraphs from `base` (empty for generation
// mode) to `full`. Each step introduces at least one object; a relation
// enters in the step where its later endpoint arrives. k defaults to a
// uniform draw from {2..5} clipped by the number of addable objects; a
// single-object target degenerates to k = 1. Every increment is
// pre-validated against the layout engine (fixed cells carried forward) and
// infeasible decompositions are resampled up to 32 times before
// InfeasibleError is thrown.
SubgraphChain subsample_chain(const SceneGraph& full, uint64_t seed,
                              std::optional<int> k_hint = std::nullopt,
                              const SceneGraph& base = {},
                              const PlacementMap& base_placement = {});

// Lowers a chain into steps: canonical AddObject ops for each increment
// (relations fused onto the arriving endpoint's add), templated ins_text,
// and des_text printed from the step's scene.
EditProgram synthesize_program(const SubgraphChain& chain,
                               const SceneGraph& base = {});

// Rewrites roughly `ratio` of the eligible steps into structurally richer
// variants that preserve the final scene: a decoy color fixed by a later
// recolor, a decoy object removed later, or a position swap corrected by a
// move. Selection is seeded; ties break toward earlier steps. des_text
// fields are recomputed for all rewritten flows.
EditProgram augment_program(const EditProgram& p, uint64_t seed, double ratio,
                            const SceneGraph& base = {},
                            const PlacementMap& base_placement = {});

// Final scene of a program when executed from `base`.
SceneGraph program_result(const EditProgram& p, const SceneGraph& base = {});

// Scene plus concrete cells, evolved together while executing a program.
struct SimState {
  SceneGraph graph;
  PlacementMap placement;
};

// First row-major cell (free or the object's own) where `target` satisfies
// every relation incident to it, other placements held fixed. Throws
// LayoutError when no such cell exists.
Cell move_target_cell(const SceneGraph& g, const PlacementMap& placed,
                      const ObjectKey& target);

// Executes one op without faults, updating graph and placement in lock
// step: adds run the layout engine with existing cells fixed, swaps exchange
// cells, moves re-place via move_target_cell.
void execute_op_clean(SimState& state, const EditOp& op);

// Step-level execution. Consecutive add ops are laid out as one unit so a
// relation fused into the step constrains where its new objects land; other
// ops run through execute_op_clean in order.
void execute_step_clean(SimState& state, const Step& step);

// Random target scene generator used by dataset emission and eval suites.
// Produces colored objects with forest-structured relations, re-sampled
// until the chain decomposition is layout-feasible.
struct SceneSamplerConfig {
  int min_objects = 3;
  int max_objects = 6;
  int min_relations = 0;
  int max_relations = 3;
  bool distinct_shapes = false;
  bool distinct_colors = false;
};
SceneGraph sample_scene(Rng& rng, const SceneSamplerConfig& cfg);

}  // namespace sketchloop
