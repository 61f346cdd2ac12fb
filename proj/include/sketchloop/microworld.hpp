#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "sketchloop/edit.hpp"
#include "sketchloop/rng.hpp"
#include "sketchloop/scene_graph.hpp"

namespace sketchloop {

constexpr int kGridSize = 6;

// Row 0 is the top row, column 0 the leftmost column.
struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  bool operator<(const Cell& o) const {
    return row != o.row ? row < o.row : col < o.col;
  }
};

// "a rel b" under the coordinate semantics: strict inequality on exactly
// one axis, the other axis unconstrained.
bool relation_holds(Relation rel, const Cell& a, const Cell& b);

struct Placement {
  ObjectKey key;
  Cell cell;
  friend bool operator==(const Placement&, const Placement&) = default;
};

// Injective key -> cell assignment, kept sorted by key.
struct PlacementMap {
  std::vector<Placement> items;

  const Cell* find(const ObjectKey& k) const;
  void put(const ObjectKey& k, const Cell& c);
  void erase(const ObjectKey& k);
  bool cell_taken(const Cell& c) const;

  friend bool operator==(const PlacementMap&, const PlacementMap&) = default;
};

class LayoutError : public std::runtime_error {
 public:
  explicit LayoutError(const std::string& what) : std::runtime_error(what) {}
};

// Places g's objects on the grid. Objects listed in `fixed` keep their exact
// cells; the rest are assigned by depth-first search over cells in row-major
// order (objects visited in canonical key order), returning the first
// complete assignment that satisfies every relation. `blocked` cells are
// unavailable without belonging to any object. Throws LayoutError when no
// assignment exists.
PlacementMap layout(const SceneGraph& g, const PlacementMap& fixed = {},
                    const std::set<Cell>& blocked = {});

// One grid cell of a rendered image: shape and color codes, both zero for an
// empty cell.
struct CellCode {
  uint8_t shape = 0;
  uint8_t color = 0;
  friend bool operator==(const CellCode&, const CellCode&) = default;
};

struct RasterImage {
  std::array<std::array<CellCode, kGridSize>, kGridSize> cells{};
  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

struct PlacedObject {
  Shape shape{};
  Color color{};
  Cell cell;
  friend bool operator==(const PlacedObject&, const PlacedObject&) = default;
};

RasterImage render(const PlacementMap& placement, const SceneGraph& g);
RasterImage render_objects(const std::vector<PlacedObject>& objs);

// Exact inverse of render: every non-empty cell becomes one object, listed
// in row-major order. Throws LayoutError on a malformed cell (shape code
// without color code or vice versa, or codes out of range).
std::vector<PlacedObject> derender(const RasterImage& img);

// Derendered objects with canonical keys: indices within each
// (shape, color) group are assigned in row-major cell order.
PlacementMap keyed_placement(const std::vector<PlacedObject>& objs,
                             SceneGraph* graph_out = nullptr);

// Compact textual image form used in records and over the wire: 36 cells in
// row-major order, each "<shape><color>" as two decimal digits, joined by
// single spaces. Empty cells are "00".
std::string image_to_wire(const RasterImage& img);
RasterImage image_from_wire(const std::string& text);

enum class FaultKind : uint8_t {
  None, WrongColor, WrongShape, RelationViolation, Omission, Duplicate,
};
const std::string& fault_kind_name(FaultKind k);

enum class FaultStage : uint8_t { Plan, Sketch };

struct FaultLabel {
  FaultKind kind = FaultKind::None;
  std::string target;  // object ref or relation description
};

// P(no corruption) = 1 - fault_rate; a corrupted op draws its kind from the
// kinds applicable to that op, weighted by kind_weights (uniform default).
struct FaultModel {
  double fault_rate = 0.0;
  std::array<double, 5> kind_weights = {1, 1, 1, 1, 1};

  static FaultModel none() { return {}; }
  static FaultModel uniform(double rate) { return {rate, {1, 1, 1, 1, 1}}; }
};

// Sketch-stage corruption plan for one op: how the renderer deviates from
// the op's clean effect.
struct SketchFault {
  size_t op_index = 0;
  FaultKind kind = FaultKind::None;
  Color wrong_color{};
  Shape wrong_shape{};
  Cell cell;        // violation target cell or duplicate cell
  FaultLabel label;
};

struct StepFaults {
  std::vector<SketchFault> faults;  // only corrupted ops are listed
};

// Execution context the sketch-fault sampler needs to pick realizable
// corruptions: the scene after the step and the cells currently occupied.
struct SketchContext {
  const SceneGraph& graph_after;
  const PlacementMap& expected_after;
  std::set<Cell> occupied;
};

// Draws per-op sketch faults for a step. Deterministic in (seed, model);
// kinds that cannot be realized for an op are excluded from its draw.
StepFaults inject_sketch_faults(const Step& step, const SketchContext& ctx,
                                uint64_t seed, const FaultModel& model);

// Plan-stage corruption: rewrites one op of the step (and both text fields)
// so the step contradicts the full target scene. Returns the corrupted step
// and the label, or kind None when the step offers no clean corruption.
struct PlanFaultResult {
  Step step;
  FaultLabel label;
};
PlanFaultResult inject_plan_fault(const Step& step, const SceneGraph& full,
                                  const SceneGraph& before, uint64_t seed,
                                  const FaultModel& model);

FaultKind draw_fault_kind(Rng& rng, const FaultModel& model,
                          const std::vector<FaultKind>& applicable);

}  // namespace sketchloop
