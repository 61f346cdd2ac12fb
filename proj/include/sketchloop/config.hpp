#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sketchloop {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Environment variable naming the default config file; flags still win over
// anything loaded from it.
inline const char* kConfigEnvVar = "SKETCHLOOP_CONFIG";

// Resolved run configuration. Subset targets are full-scale totals; the
// effective counts are target * scale, with ratio parts rounded to integers
// against the scaled totals.
struct AppConfig {
  uint64_t seed = 1;
  double scale = 0.1;
  std::string out_dir = "out";
  int workers = 1;

  // scene sampling
  int min_objects = 3;
  int max_objects = 6;
  int min_relations = 0;
  int max_relations = 3;

  // process loop
  double sketch_fault_rate = 0.3;
  double plan_fault_rate = 0.5;
  int max_refine_rounds = 3;
  double augmentation_ratio = 0.0;
  double lambda_ce = 1.0;
  bool inline_critiques = false;

  // full-scale subset targets
  long multiturn_total = 32012;
  long conflict_total = 15201;
  long conflict_negative = 8296;
  long alignment_total = 15000;
  long alignment_positive = 5000;

  // evaluation
  int eval_suite_size = 50;
  double eval_fault_rate = 0.3;
};

long scaled_target(long full_total, double scale);
// Integer share of `part`/`full_total` applied to an already scaled total.
long scaled_part(long scaled_total, long part, long full_total);

// key=value lines; '#' starts a comment, blank lines ignored. Unknown keys
// and unparseable values raise ConfigError.
AppConfig load_config_file(const std::string& path);
void apply_config_entry(AppConfig& cfg, const std::string& key,
                        const std::string& value);

// Range checks; raises ConfigError with the offending field named.
void validate_config(const AppConfig& cfg);

// Stable field-ordered JSON rendering; the digest is its FNV-1a hash in
// hex. Execution-only knobs (out_dir, workers) are excluded so emitted
// artifacts stay byte-identical across worker counts and output paths.
std::string canonical_dump(const AppConfig& cfg);
std::string config_digest(const AppConfig& cfg);

}  // namespace sketchloop
