#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchloop/microworld.hpp"

namespace sketchloop {

enum class Category : uint8_t {
  SingleObject,
  TwoObjects,
  Counting,
  Colors,
  Position,
  ColorAttributes,
};

inline constexpr Category kAllCategories[] = {
    Category::SingleObject, Category::TwoObjects,  Category::Counting,
    Category::Colors,       Category::Position,    Category::ColorAttributes,
};

const std::string& category_name(Category c);

struct CategorySuite {
  Category category{};
  std::vector<std::string> prompts;
  uint64_t seed = 0;
};

// Deterministic prompts exercising exactly the category's construct:
// one object; two distinct objects; counts in {2..4}; colored object sets;
// one relation drawn over all four surface forms; distinct colors bound to
// several objects. All prompts are layout-feasible by construction.
CategorySuite build_suite(Category c, int n, uint64_t seed);

// Exact pass/fail: the image holds the prompt's object multiset and its
// cells satisfy every asserted relation (strict coordinate semantics).
bool score(const std::string& prompt, const RasterImage& img);

struct ModeStats {
  double accuracy = 0;
  double mean_segments = 0;
  double mean_refines = 0;
};

struct CategoryRow {
  Category category{};
  ModeStats process;
  ModeStats single;
  double closed_form = 0;  // mean (1 - p)^ops over the suite's programs
  int excluded = 0;        // infeasible prompts, reported rather than dropped
};

struct ReportTable {
  std::vector<CategoryRow> rows;
  double fault_rate = 0;
  int refine_rounds = 0;
  ModeStats overall_process;  // unweighted category means
  ModeStats overall_single;
  double overall_closed_form = 0;
};

struct EvalConfig {
  int n_per_category = 50;
  uint64_t seed = 1;
  double fault_rate = 0.3;
  int max_refine_rounds = 3;
  int workers = 1;
};

// Runs the interleaved loop and the single-pass baseline on identical
// suites, seeds and fault draws.
ReportTable compare_modes(const EvalConfig& cfg);

double closed_form_accuracy(int op_count, double fault_rate);

struct SweepRow {
  double fault_rate = 0;
  double mean_refines = 0;
  double process_accuracy = 0;
  double single_accuracy = 0;
};

std::vector<SweepRow> sweep_fault_rates(const EvalConfig& cfg,
                                        const std::vector<double>& rates);

// Mean reasoning steps per image at full scale, quoted in reports for
// context only; nothing here is expected to match it.
inline constexpr double kFullScaleMeanReasoningSteps = 2.62;

std::string report_text(const ReportTable& t);
std::string report_json(const ReportTable& t);
std::string sweep_text(const std::vector<SweepRow>& rows);
std::string sweep_json(const std::vector<SweepRow>& rows);

}  // namespace sketchloop
