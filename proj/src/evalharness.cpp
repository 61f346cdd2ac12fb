#include "sketchloop/evalharness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "sketchloop/inspector.hpp"
#include "sketchloop/orchestrator.hpp"

namespace sketchloop {

namespace {

using nlohmann::ordered_json;

const std::string kCategoryNames[] = {
    "single-object", "two-objects", "counting",
    "colors",        "position",    "color-attributes",
};

std::vector<Shape> shuffled_shapes(Rng& rng) {
  std::vector<Shape> all;
  for (int i = 1; i <= kShapeCount; ++i) all.push_back(Shape(i));
  rng.shuffle(all);
  return all;
}

std::vector<Color> shuffled_colors(Rng& rng) {
  std::vector<Color> all;
  for (int i = 1; i <= kColorCount; ++i) all.push_back(Color(i));
  rng.shuffle(all);
  return all;
}

Color random_color(Rng& rng) { return Color(rng.range(1, kColorCount)); }

std::string object_text(Color c, Shape s) {
  return color_name(c) + " " + shape_name(s);
}

void parallel_for(int workers, int n, const std::function<void(int)>& body) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto loop = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(size_t(count));
  for (int w = 0; w < count; ++w) pool.emplace_back(loop);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Per-prompt measurements for one category suite.
struct PromptOutcome {
  bool excluded = false;
  bool process_success = false;
  bool single_success = false;
  double process_segments = 0;
  double single_segments = 0;
  double process_refines = 0;
  double closed_form = 0;
};

PromptOutcome measure_prompt(const std::string& prompt, uint64_t seed,
                             const EvalConfig& cfg) {
  PromptOutcome out;
  RunConfig rc;
  rc.seed = seed;
  rc.sketch_faults = FaultModel::uniform(cfg.fault_rate);
  rc.max_refine_rounds = cfg.max_refine_rounds;
  try {
    RunResult proc = run_trajectory(prompt, rc);
    RunResult single = single_pass(prompt, rc);
    out.process_success = proc.trajectory.meta.success;
    out.single_success = single.trajectory.meta.success;
    out.process_segments = double(proc.trajectory.segments.size());
    out.single_segments = double(single.trajectory.segments.size());
    out.process_refines = double(proc.trajectory.meta.refine_rounds);
    int ops = 0;
    for (const auto& tr : proc.steps) ops += int(tr.clean.ops.size());
    out.closed_form = closed_form_accuracy(ops, cfg.fault_rate);
  } catch (const InfeasibleError&) {
    out.excluded = true;
  } catch (const LayoutError&) {
    out.excluded = true;
  }
  return out;
}

}  // namespace

const std::string& category_name(Category c) {
  return kCategoryNames[size_t(c)];
}

CategorySuite build_suite(Category c, int n, uint64_t seed) {
  CategorySuite suite;
  suite.category = c;
  suite.seed = seed;
  for (int i = 0; i < n; ++i) {
    Rng rng(hash_combine(seed, 0xB111D0000ull + uint64_t(i)));
    std::vector<Shape> shapes = shuffled_shapes(rng);
    std::string prompt;
    switch (c) {
      case Category::SingleObject:
        prompt = object_text(random_color(rng), shapes[0]);
        break;
      case Category::TwoObjects:
        prompt = object_text(random_color(rng), shapes[0]) + "; " +
                 object_text(random_color(rng), shapes[1]);
        break;
      case Category::Counting: {
        int count = rng.range(2, 4);
        prompt = std::to_string(count) + " " +
                 object_text(random_color(rng), shapes[0]);
        break;
      }
      case Category::Colors: {
        int count = rng.range(2, 4);
        for (int k = 0; k < count; ++k) {
          if (k) prompt += "; ";
          prompt += object_text(random_color(rng), shapes[size_t(k)]);
        }
        break;
      }
      case Category::Position: {
        static const char* kRelWords[] = {"above", "below", "left-of",
                                          "right-of"};
        prompt = object_text(random_color(rng), shapes[0]) + " " +
                 kRelWords[i % 4] + " " +
                 object_text(random_color(rng), shapes[1]);
        if (rng.bernoulli(0.5)) {
          prompt += "; " + object_text(random_color(rng), shapes[2]);
        }
        break;
      }
      case Category::ColorAttributes: {
        int count = rng.range(2, 4);
        std::vector<Color> colors = shuffled_colors(rng);
        for (int k = 0; k < count; ++k) {
          if (k) prompt += "; ";
          prompt += object_text(colors[size_t(k)], shapes[size_t(k)]);
        }
        break;
      }
    }
    suite.prompts.push_back(std::move(prompt));
  }
  return suite;
}

bool score(const std::string& prompt, const RasterImage& img) {
  SceneGraph g = parse_scene(prompt, ParseMode::FullPrompt);
  return image_matches_scene(g, img);
}

double closed_form_accuracy(int op_count, double fault_rate) {
  return std::pow(1.0 - fault_rate, double(op_count));
}

ReportTable compare_modes(const EvalConfig& cfg) {
  ReportTable table;
  table.fault_rate = cfg.fault_rate;
  table.refine_rounds = cfg.max_refine_rounds;
  for (Category c : kAllCategories) {
    const uint64_t cat_seed =
        hash_combine(cfg.seed, fnv1a64(category_name(c)));
    CategorySuite suite = build_suite(c, cfg.n_per_category, cat_seed);
    std::vector<PromptOutcome> outcomes(suite.prompts.size());
    parallel_for(cfg.workers, int(suite.prompts.size()), [&](int i) {
      outcomes[size_t(i)] =
          measure_prompt(suite.prompts[size_t(i)],
                         hash_combine(cat_seed, 0x5eed0000ull + uint64_t(i)),
                         cfg);
    });
    CategoryRow row;
    row.category = c;
    int included = 0;
    for (const auto& o : outcomes) {
      if (o.excluded) {
        ++row.excluded;
        continue;
      }
      ++included;
      row.process.accuracy += o.process_success ? 1 : 0;
      row.single.accuracy += o.single_success ? 1 : 0;
      row.process.mean_segments += o.process_segments;
      row.single.mean_segments += o.single_segments;
      row.process.mean_refines += o.process_refines;
      row.closed_form += o.closed_form;
    }
    if (included > 0) {
      const double d = double(included);
      row.process.accuracy /= d;
      row.single.accuracy /= d;
      row.process.mean_segments /= d;
      row.single.mean_segments /= d;
      row.process.mean_refines /= d;
      row.closed_form /= d;
    }
    table.rows.push_back(row);
  }
  // Sum first and divide once so an all-ones column stays exactly 1.0.
  const double nc = double(table.rows.size());
  for (const auto& row : table.rows) {
    table.overall_process.accuracy += row.process.accuracy;
    table.overall_process.mean_segments += row.process.mean_segments;
    table.overall_process.mean_refines += row.process.mean_refines;
    table.overall_single.accuracy += row.single.accuracy;
    table.overall_single.mean_segments += row.single.mean_segments;
    table.overall_closed_form += row.closed_form;
  }
  table.overall_process.accuracy /= nc;
  table.overall_process.mean_segments /= nc;
  table.overall_process.mean_refines /= nc;
  table.overall_single.accuracy /= nc;
  table.overall_single.mean_segments /= nc;
  table.overall_closed_form /= nc;
  return table;
}

std::vector<SweepRow> sweep_fault_rates(const EvalConfig& cfg,
                                        const std::vector<double>& rates) {
  std::vector<SweepRow> rows;
  for (double rate : rates) {
    EvalConfig sub = cfg;
    sub.fault_rate = rate;
    ReportTable t = compare_modes(sub);
    SweepRow row;
    row.fault_rate = rate;
    row.mean_refines = t.overall_process.mean_refines;
    row.process_accuracy = t.overall_process.accuracy;
    row.single_accuracy = t.overall_single.accuracy;
    rows.push_back(row);
  }
  return rows;
}

std::string report_text(const ReportTable& t) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "mode comparison (fault rate " << t.fault_rate << ", refine rounds "
      << t.refine_rounds << ")\n";
  out << std::left << std::setw(18) << "category" << std::right
      << std::setw(9) << "process" << std::setw(9) << "single" << std::setw(9)
      << "closed" << std::setw(6) << "excl" << "\n";
  for (const auto& row : t.rows) {
    out << std::left << std::setw(18) << category_name(row.category)
        << std::right << std::setw(9) << row.process.accuracy << std::setw(9)
        << row.single.accuracy << std::setw(9) << row.closed_form
        << std::setw(6) << row.excluded << "\n";
  }
  out << std::left << std::setw(18) << "overall" << std::right << std::setw(9)
      << t.overall_process.accuracy << std::setw(9)
      << t.overall_single.accuracy << std::setw(9) << t.overall_closed_form
      << std::setw(6) << 0 << "\n";
  out << "mean segments per trajectory: process "
      << t.overall_process.mean_segments << ", single "
      << t.overall_single.mean_segments << "\n";
  out << "mean refine rounds per trajectory: "
      << t.overall_process.mean_refines << "\n";
  out << "full-scale reference: " << kFullScaleMeanReasoningSteps
      << " mean reasoning steps per image (context only)\n";
  return out.str();
}

namespace {

ordered_json mode_json(const ModeStats& m) {
  return {{"accuracy", m.accuracy},
          {"mean_segments", m.mean_segments},
          {"mean_refines", m.mean_refines}};
}

}  // namespace

std::string report_json(const ReportTable& t) {
  ordered_json doc;
  doc["fault_rate"] = t.fault_rate;
  doc["refine_rounds"] = t.refine_rounds;
  ordered_json rows = ordered_json::array();
  for (const auto& row : t.rows) {
    rows.push_back({{"category", category_name(row.category)},
                    {"process", mode_json(row.process)},
                    {"single", mode_json(row.single)},
                    {"closed_form", row.closed_form},
                    {"excluded", row.excluded}});
  }
  doc["categories"] = std::move(rows);
  doc["overall"] = {{"process", mode_json(t.overall_process)},
                    {"single", mode_json(t.overall_single)},
                    {"closed_form", t.overall_closed_form}};
  doc["full_scale_reference_mean_reasoning_steps"] =
      kFullScaleMeanReasoningSteps;
  return doc.dump(2) + "\n";
}

std::string sweep_text(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << std::left << std::setw(12) << "fault rate" << std::right
      << std::setw(14) << "mean refines" << std::setw(10) << "process"
      << std::setw(10) << "single" << "\n";
  for (const auto& row : rows) {
    out << std::left << std::setw(12) << row.fault_rate << std::right
        << std::setw(14) << row.mean_refines << std::setw(10)
        << row.process_accuracy << std::setw(10) << row.single_accuracy
        << "\n";
  }
  out << "full-scale reference: " << kFullScaleMeanReasoningSteps
      << " mean reasoning steps per image (context only)\n";
  return out.str();
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& row : rows) {
    arr.push_back({{"fault_rate", row.fault_rate},
                   {"mean_refines", row.mean_refines},
                   {"process_accuracy", row.process_accuracy},
                   {"single_accuracy", row.single_accuracy}});
  }
  ordered_json doc;
  doc["sweep"] = std::move(arr);
  doc["full_scale_reference_mean_reasoning_steps"] =
      kFullScaleMeanReasoningSteps;
  return doc.dump(2) + "\n";
}

}  // namespace sketchloop
