#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sketchloop/config.hpp"
#include "sketchloop/dataset.hpp"
#include "sketchloop/evalharness.hpp"
#include "sketchloop/flowmath.hpp"
#include "sketchloop/orchestrator.hpp"
#include "sketchloop/seqcodec.hpp"

namespace {

namespace fs = std::filesystem;
using namespace sketchloop;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flags shared by the subcommands; unset optionals fall back to the config
// file (or its defaults).
struct CommonFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
};

void add_common_flags(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path,
                  "config file (default: $" + std::string(kConfigEnvVar) +
                      ")");
  sub->add_option("--seed", flags.seed, "master seed");
  sub->add_option("--scale", flags.scale,
                  "multiplier applied to the subset targets");
  sub->add_option("--out-dir", flags.out_dir, "output directory");
  sub->add_option("--workers", flags.workers, "generation worker threads");
}

AppConfig resolve_config(const CommonFlags& flags) {
  AppConfig cfg;
  std::string path = flags.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  }
  if (!path.empty()) cfg = load_config_file(path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.scale) cfg.scale = *flags.scale;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.workers) cfg.workers = *flags.workers;
  validate_config(cfg);
  return cfg;
}

char shape_letter(uint8_t code) {
  static const char letters[] = {'.', 'c', 's', 't', 'r', 'x', 'd'};
  return code <= 6 ? letters[code] : '?';
}

char color_letter(uint8_t code) {
  static const char letters[] = {'.', 'R', 'B', 'G', 'Y', 'P', 'O'};
  return code <= 6 ? letters[code] : '?';
}

std::string grid_text(const RasterImage& img, const std::string& indent) {
  std::string out;
  for (int r = 0; r < kGridSize; ++r) {
    out += indent;
    for (int c = 0; c < kGridSize; ++c) {
      if (c) out += ' ';
      const CellCode& cell = img.cells[r][c];
      if (cell.shape == 0) {
        out += "..";
      } else {
        out += shape_letter(cell.shape);
        out += color_letter(cell.color);
      }
    }
    out += '\n';
  }
  return out;
}

void print_trajectory(const Trajectory& t) {
  std::cout << "prompt: " << t.prompt << "\n";
  if (t.initial) {
    std::cout << "[initial image]\n" << grid_text(*t.initial, "  ");
  }
  for (const auto& seg : t.segments) {
    switch (seg.kind) {
      case SegmentKind::Plan:
        std::cout << "[plan] ins: " << seg.ins_text << "\n"
                  << "       des: " << seg.des_text << "\n";
        break;
      case SegmentKind::Refine:
        std::cout << "[refine] " << seg.text << "\n";
        for (const auto& f : seg.findings) {
          std::cout << "         (" << fault_kind_name(f.kind) << ") "
                    << f.text << "\n";
        }
        break;
      case SegmentKind::Inspect:
        std::cout << "[inspect] " << seg.text << "\n";
        break;
      case SegmentKind::Vision:
        std::cout << "[vision]\n" << grid_text(seg.image, "  ");
        break;
    }
  }
  std::cout << "meta: steps=" << t.meta.steps
            << " refine_rounds=" << t.meta.refine_rounds << " success="
            << (t.meta.success ? "true" : "false") << "\n";
  std::cout << "cell legend: <shape><color>, shapes c s t r x d = circle "
               "square triangle star cross diamond, colors R B G Y P O = "
               "red blue green yellow purple orange\n";
}

struct RunFlags {
  std::string prompt;
  double fault_rate = 0.0;
  double plan_fault_rate = 0.0;
  int refine_rounds = 3;
  double augmentation_ratio = 0.0;
  bool single = false;
  bool emit_json = false;
  bool force_inspect = false;
};

int cmd_run(const AppConfig& cfg, const RunFlags& flags) {
  RunConfig rc;
  rc.seed = cfg.seed;
  rc.sketch_faults = FaultModel::uniform(flags.fault_rate);
  rc.plan_faults = FaultModel::uniform(flags.plan_fault_rate);
  rc.max_refine_rounds = flags.refine_rounds;
  rc.augmentation_ratio = flags.augmentation_ratio;
  rc.force_emit_clean_inspect = flags.force_inspect;
  RunResult result = flags.single ? single_pass(flags.prompt, rc)
                                  : run_trajectory(flags.prompt, rc);
  TokenStream stream = encode_trajectory(result.trajectory);
  print_trajectory(result.trajectory);
  std::cout << "stream: " << stream_display(stream) << "\n";
  if (flags.emit_json) {
    std::cout << "stream_json: " << stream_to_json(stream) << "\n";
  }
  return kExitOk;
}

int cmd_gen_dataset(const AppConfig& cfg) {
  DatasetManifest m = emit_dataset(cfg);
  std::cout << "wrote " << cfg.out_dir << ": multiturn=" << m.multiturn.count
            << " conflict=" << m.conflict.count << " (" << m.conflict.positives
            << " pos / " << m.conflict.negatives << " neg)"
            << " alignment=" << m.alignment.count << " ("
            << m.alignment.positives << " pos / " << m.alignment.negatives
            << " neg), config digest " << m.config_digest << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::optional<int> suite_size;
  std::optional<double> fault_rate;
  std::optional<int> refine_rounds;
  std::vector<double> sweep;
};

int cmd_eval(const AppConfig& cfg, const EvalFlags& flags) {
  EvalConfig ec;
  ec.seed = cfg.seed;
  ec.workers = cfg.workers;
  ec.n_per_category = flags.suite_size.value_or(cfg.eval_suite_size);
  ec.fault_rate = flags.fault_rate.value_or(cfg.eval_fault_rate);
  ec.max_refine_rounds = flags.refine_rounds.value_or(cfg.max_refine_rounds);

  fs::create_directories(cfg.out_dir);
  ReportTable table = compare_modes(ec);
  const std::string text = report_text(table);
  std::ofstream(fs::path(cfg.out_dir) / "report.txt", std::ios::binary)
      << text;
  std::ofstream(fs::path(cfg.out_dir) / "report.json", std::ios::binary)
      << report_json(table);
  std::cout << text;
  if (!flags.sweep.empty()) {
    std::vector<SweepRow> rows = sweep_fault_rates(ec, flags.sweep);
    const std::string sweep = sweep_text(rows);
    std::ofstream(fs::path(cfg.out_dir) / "sweep.txt", std::ios::binary)
        << sweep;
    std::ofstream(fs::path(cfg.out_dir) / "sweep.json", std::ios::binary)
        << sweep_json(rows);
    std::cout << "\n" << sweep;
  }
  return kExitOk;
}

int cmd_stats(const std::string& dir) {
  DatasetManifest recomputed = stats_dataset(dir);
  AppConfig dummy;
  std::cout << "recomputed statistics for " << dir << ":\n";
  // Seed and digest are not recomputable from records; only the statistic
  // blocks participate in the comparison below.
  std::cout << manifest_json_text(recomputed, dummy);
  DatasetManifest manifest = read_manifest(dir);
  if (stats_equal(recomputed, manifest)) {
    std::cout << "stats match manifest.json\n";
    return kExitOk;
  }
  std::cerr << "stats disagree with manifest.json\n";
  return kExitRuntime;
}

int cmd_verify_math(uint64_t seed) {
  std::vector<PropertyResult> results = verify_math_properties(seed);
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    all = all && r.pass;
  }
  std::cout << (all ? "all properties hold\n" : "some properties failed\n");
  return all ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic plan-sketch-inspect-refine micro-world"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  CLI::App* gen = app.add_subcommand("gen-dataset",
                                     "emit the three training subsets");
  add_common_flags(gen, gen_flags);
  std::optional<double> gen_aug;
  std::optional<bool> gen_inline;
  gen->add_option("--augmentation-ratio", gen_aug,
                  "fraction of eligible steps rewritten into richer flows");
  gen->add_flag("--inline-critiques,!--no-inline-critiques", gen_inline,
                "embed critiques inside multiturn records");

  CommonFlags run_common;
  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "run one trajectory");
  add_common_flags(run, run_common);
  run->add_option("--prompt", run_flags.prompt, "scene DSL prompt")
      ->required();
  run->add_option("--fault-rate", run_flags.fault_rate,
                  "sketch fault probability per op");
  run->add_option("--plan-fault-rate", run_flags.plan_fault_rate,
                  "plan fault probability per step");
  run->add_option("--refine-rounds", run_flags.refine_rounds,
                  "max refine rounds per step");
  run->add_option("--augmentation-ratio", run_flags.augmentation_ratio,
                  "fraction of eligible steps rewritten");
  run->add_flag("--single-pass", run_flags.single,
                "skip inspection and refinement");
  run->add_flag("--json", run_flags.emit_json,
                "also print the token stream as JSON");
  run->add_flag("--force-inspect", run_flags.force_inspect,
                "emit clean inspection verdicts");

  CommonFlags eval_common;
  EvalFlags eval_flags;
  CLI::App* eval = app.add_subcommand("eval",
                                      "compare process vs single-pass");
  add_common_flags(eval, eval_common);
  eval->add_option("--n", eval_flags.suite_size, "prompts per category");
  eval->add_option("--fault-rate", eval_flags.fault_rate,
                   "sketch fault probability per op");
  eval->add_option("--refine-rounds", eval_flags.refine_rounds,
                   "max refine rounds per step");
  eval->add_option("--sweep", eval_flags.sweep,
                   "fault rates to sweep in addition to the main report");

  CommonFlags stats_common;
  std::optional<std::string> stats_dir;
  CLI::App* stats = app.add_subcommand("stats",
                                       "recompute dataset statistics");
  add_common_flags(stats, stats_common);
  stats->add_option("--dir", stats_dir, "dataset directory");

  CommonFlags math_common;
  CLI::App* math = app.add_subcommand("verify-math",
                                      "check the training-objective algebra");
  add_common_flags(math, math_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      AppConfig cfg = resolve_config(gen_flags);
      if (gen_aug) cfg.augmentation_ratio = *gen_aug;
      if (gen_inline) cfg.inline_critiques = *gen_inline;
      validate_config(cfg);
      return cmd_gen_dataset(cfg);
    }
    if (run->parsed()) {
      return cmd_run(resolve_config(run_common), run_flags);
    }
    if (eval->parsed()) {
      return cmd_eval(resolve_config(eval_common), eval_flags);
    }
    if (stats->parsed()) {
      AppConfig cfg = resolve_config(stats_common);
      return cmd_stats(stats_dir.value_or(cfg.out_dir));
    }
    if (math->parsed()) {
      return cmd_verify_math(resolve_config(math_common).seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << R"({"error":"config","detail":)"
              << nlohmann::json(std::string(e.what())).dump() << "}\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << R"({"error":"runtime","detail":)"
              << nlohmann::json(std::string(e.what())).dump() << "}\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
