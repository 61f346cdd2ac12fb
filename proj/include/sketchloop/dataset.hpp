#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "sketchloop/config.hpp"

namespace sketchloop {

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

// Per-subset statistics. Averages are absent when no record carries the
// field (and for empty subsets). Images per sample counts the image fields
// inside a record's steps (and inline refines); the final_image copy is not
// counted again.
struct SubsetStats {
  long count = 0;
  long positives = 0;
  long negatives = 0;
  std::optional<double> avg_prompt_chars;
  std::optional<double> avg_images;
  long max_images = 0;
  friend bool operator==(const SubsetStats&, const SubsetStats&) = default;
};

struct DatasetManifest {
  SubsetStats multiturn;
  SubsetStats conflict;
  SubsetStats alignment;
  uint64_t seed = 0;
  std::string config_digest;
};

// True when the recomputable fields (the three SubsetStats blocks) agree.
bool stats_equal(const DatasetManifest& a, const DatasetManifest& b);

// Writes multiturn.jsonl, conflict.jsonl, alignment.jsonl and manifest.json
// into cfg.out_dir. Record counts follow the scaled targets; label quotas
// are filled by scanning task indices in ascending order, so the output is
// byte-identical for any worker count. Throws DatasetError when a quota
// cannot be filled within the task budget.
DatasetManifest emit_dataset(const AppConfig& cfg);

// Recomputes every manifest statistic from the record files. Corrupt
// records are reported with their file and line index.
DatasetManifest stats_dataset(const std::string& dir);

DatasetManifest read_manifest(const std::string& dir);

std::string manifest_json_text(const DatasetManifest& m, const AppConfig& cfg);

}  // namespace sketchloop
