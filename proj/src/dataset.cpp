#include "sketchloop/dataset.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "json.hpp"

#include "sketchloop/inspector.hpp"
#include "sketchloop/orchestrator.hpp"
#include "sketchloop/planner.hpp"
#include "sketchloop/seqcodec.hpp"

namespace sketchloop {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json image_to_json(const RasterImage& img) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < kGridSize; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < kGridSize; ++c) {
      row.push_back({int(img.cells[r][c].shape), int(img.cells[r][c].color)});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json findings_to_json(const std::vector<Finding>& findings) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : findings) {
    arr.push_back({{"kind", fault_kind_name(f.kind)}, {"text", f.text}});
  }
  return arr;
}

ordered_json verdict_analysis(const Verdict& v) {
  ordered_json a;
  a["status"] = inspect_status_name(v.status);
  a["findings"] = v.critique ? findings_to_json(v.critique->findings)
                             : ordered_json::array();
  return a;
}

SceneSamplerConfig sampler_config(const AppConfig& cfg) {
  SceneSamplerConfig sc;
  sc.min_objects = cfg.min_objects;
  sc.max_objects = cfg.max_objects;
  sc.min_relations = cfg.min_relations;
  sc.max_relations = cfg.max_relations;
  return sc;
}

uint64_t subset_seed(const AppConfig& cfg, const char* subset, long index) {
  return hash_combine(hash_combine(cfg.seed, fnv1a64(subset)),
                      uint64_t(index));
}

// A record serialized on the worker side, with the few fields the consumer
// needs for quotas and stats pulled out so the sequential phase stays cheap.
struct PackedRecord {
  std::string line;
  int label = 0;           // 1 positive, -1 negative, 0 unlabeled
  long prompt_chars = -1;  // -1 when the record has no prompt
  long images = 0;
};

// One task index can yield several candidate records (one per step for the
// critique subsets) or none when sampling hits an infeasible decomposition.
using TaskGen = std::function<std::vector<PackedRecord>(long)>;

// Accepts or rejects one candidate; returns false once every quota is full.
using Consumer = std::function<bool(PackedRecord&&)>;

// Runs tasks in ascending index order, generating batches in parallel and
// consuming results sequentially, so acceptance decisions never depend on
// the worker count. Throws DatasetError when the budget runs out first.
void quota_fill(const char* subset, int workers, long task_budget,
                const TaskGen& gen, const Consumer& consume) {
  const long batch = std::max<long>(64, workers * 16L);
  for (long start = 0; start < task_budget; start += batch) {
    const long count = std::min(batch, task_budget - start);
    std::vector<std::vector<PackedRecord>> results(
        static_cast<size_t>(count));
    if (workers <= 1) {
      for (long j = 0; j < count; ++j) results[size_t(j)] = gen(start + j);
    } else {
      std::atomic<long> next{0};
      std::exception_ptr failure;
      std::mutex failure_mu;
      auto body = [&] {
        for (long j = next.fetch_add(1); j < count; j = next.fetch_add(1)) {
          try {
            results[size_t(j)] = gen(start + j);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool;
      const int n = int(std::min<long>(workers, count));
      pool.reserve(size_t(n));
      for (int w = 0; w < n; ++w) pool.emplace_back(body);
      for (auto& t : pool) t.join();
      if (failure) std::rethrow_exception(failure);
    }
    for (auto& candidates : results) {
      for (auto& rec : candidates) {
        if (!consume(std::move(rec))) return;
      }
    }
  }
  throw DatasetError(std::string(subset) +
                     ": quota not reached within the task budget");
}

// Image fields inside one record, excluding the final_image copy.
template <typename Json>
long images_in_record(const Json& rec) {
  long n = 0;
  if (rec.contains("steps")) {
    for (const auto& step : rec["steps"]) {
      if (step.contains("image")) ++n;
      if (step.contains("refines")) {
        for (const auto& ref : step["refines"]) {
          if (ref.contains("image")) ++n;
        }
      }
    }
  }
  if (rec.contains("image_before")) ++n;
  if (rec.contains("image_after")) ++n;
  return n;
}

struct StatsAccum {
  long count = 0;
  long positives = 0;
  long negatives = 0;
  double prompt_chars = 0;
  long prompt_records = 0;
  long images = 0;
  long image_records = 0;
  long max_images = 0;

  template <typename Json>
  void add(const Json& rec) {
    ++count;
    if (rec.contains("label")) {
      const std::string label = rec["label"].template get<std::string>();
      if (label == "positive") ++positives;
      if (label == "negative") ++negatives;
    }
    if (rec.contains("prompt")) {
      prompt_chars +=
          double(rec["prompt"].template get<std::string>().size());
      ++prompt_records;
    }
    long imgs = images_in_record(rec);
    if (imgs > 0) {
      images += imgs;
      ++image_records;
      max_images = std::max(max_images, imgs);
    }
  }

  void add(const PackedRecord& rec) {
    ++count;
    if (rec.label > 0) ++positives;
    if (rec.label < 0) ++negatives;
    if (rec.prompt_chars >= 0) {
      prompt_chars += double(rec.prompt_chars);
      ++prompt_records;
    }
    if (rec.images > 0) {
      images += rec.images;
      ++image_records;
      max_images = std::max(max_images, rec.images);
    }
  }

  SubsetStats finish() const {
    SubsetStats s;
    s.count = count;
    s.positives = positives;
    s.negatives = negatives;
    if (prompt_records > 0) {
      s.avg_prompt_chars = prompt_chars / double(prompt_records);
    }
    if (image_records > 0) {
      s.avg_images = double(images) / double(image_records);
      s.max_images = max_images;
    }
    return s;
  }
};

// Serialization and stats extraction run here, inside the worker tasks, so
// the sequential consumer only moves strings and bumps counters.
PackedRecord pack_record(const ordered_json& rec) {
  PackedRecord p;
  p.line = rec.dump();
  if (rec.contains("label")) {
    const std::string label = rec["label"].get<std::string>();
    if (label == "positive") p.label = 1;
    if (label == "negative") p.label = -1;
  }
  if (rec.contains("prompt")) {
    p.prompt_chars = long(rec["prompt"].get<std::string>().size());
  }
  p.images = images_in_record(rec);
  return p;
}

// Builds the multi-turn record from the emitted segment list, so inline
// refine rounds keep their intermediate images.
ordered_json multiturn_record(const Trajectory& t, bool inline_critiques) {
  ordered_json rec;
  rec["prompt"] = t.prompt;
  ordered_json steps = ordered_json::array();
  ordered_json current;
  bool has_current = false;
  const RasterImage* last_image = nullptr;
  for (const auto& seg : t.segments) {
    switch (seg.kind) {
      case SegmentKind::Plan:
        if (has_current) steps.push_back(std::move(current));
        current = ordered_json();
        current["ins"] = seg.ins_text;
        current["des"] = seg.des_text;
        has_current = true;
        break;
      case SegmentKind::Vision:
        last_image = &seg.image;
        if (!has_current) break;
        if (!current.contains("image")) {
          current["image"] = image_to_json(seg.image);
        } else if (current.contains("refines") &&
                   !current["refines"].empty() &&
                   !current["refines"].back().contains("image")) {
          current["refines"].back()["image"] = image_to_json(seg.image);
        } else {
          current["image"] = image_to_json(seg.image);
        }
        break;
      case SegmentKind::Refine:
        if (!inline_critiques || !has_current) break;
        if (!current.contains("image")) {
          // Plan repair before any render: text-only correction.
          current["plan_refine"] = {
              {"findings", findings_to_json(seg.findings)},
              {"refine_ins", seg.text}};
        } else {
          if (!current.contains("refines")) {
            current["refines"] = ordered_json::array();
          }
          current["refines"].push_back(
              {{"findings", findings_to_json(seg.findings)},
               {"refine_ins", seg.text}});
        }
        break;
      case SegmentKind::Inspect:
        break;
    }
  }
  if (has_current) steps.push_back(std::move(current));
  rec["steps"] = std::move(steps);
  if (last_image != nullptr) rec["final_image"] = image_to_json(*last_image);
  return rec;
}

std::vector<PackedRecord> gen_multiturn(const AppConfig& cfg, long index) {
  uint64_t s = subset_seed(cfg, "multiturn", index);
  try {
    Rng rng(s);
    SceneGraph g = sample_scene(rng, sampler_config(cfg));
    RunConfig rc;
    rc.seed = hash_combine(s, 0x3117ull);
    rc.augmentation_ratio = cfg.augmentation_ratio;
    if (cfg.inline_critiques) {
      rc.sketch_faults = FaultModel::uniform(cfg.sketch_fault_rate);
      rc.max_refine_rounds = std::max(1, cfg.max_refine_rounds);
    }
    RunResult run = run_trajectory(print_scene(g), rc);
    std::vector<PackedRecord> out;
    out.push_back(
        pack_record(multiturn_record(run.trajectory, cfg.inline_critiques)));
    return out;
  } catch (const InfeasibleError&) {
    return {};
  } catch (const LayoutError&) {
    return {};
  }
}

std::vector<PackedRecord> gen_conflict(const AppConfig& cfg, long index) {
  uint64_t s = subset_seed(cfg, "conflict", index);
  try {
    Rng rng(s);
    SceneGraph full = sample_scene(rng, sampler_config(cfg));
    const std::string prompt = print_scene(full);
    SubgraphChain chain = subsample_chain(full, hash_combine(s, 0xc4a11ull));
    EditProgram program = synthesize_program(chain);
    if (cfg.augmentation_ratio > 0) {
      program = augment_program(program, hash_combine(s, 0xa06ull),
                                cfg.augmentation_ratio);
    }
    const FaultModel model = FaultModel::uniform(cfg.plan_fault_rate);
    std::vector<PackedRecord> out;
    SceneGraph before;
    for (size_t i = 0; i < program.steps.size(); ++i) {
      const Step& clean = program.steps[i];
      PlanFaultResult pf = inject_plan_fault(
          clean, full, before, hash_combine(s, 0x91a90000ull + i), model);
      Verdict v = check_text_conflict(full, pf.step.des_text);
      if (v.status != InspectStatus::Conflict &&
          v.status != InspectStatus::ConsistentIncomplete &&
          v.status != InspectStatus::ConsistentComplete) {
        continue;
      }
      ordered_json rec;
      rec["prompt"] = prompt;
      rec["ins"] = pf.step.ins_text;
      rec["des"] = pf.step.des_text;
      rec["label"] =
          v.status == InspectStatus::Conflict ? "negative" : "positive";
      rec["analysis"] = verdict_analysis(v);
      rec["corrective_ins"] = v.critique ? v.critique->rendered_text : "";
      out.push_back(pack_record(rec));
      for (const auto& op : clean.ops) before = apply_op(before, op);
    }
    return out;
  } catch (const InfeasibleError&) {
    return {};
  } catch (const LayoutError&) {
    return {};
  }
}

std::vector<PackedRecord> gen_alignment(const AppConfig& cfg, long index) {
  uint64_t s = subset_seed(cfg, "alignment", index);
  try {
    Rng rng(s);
    SceneGraph g = sample_scene(rng, sampler_config(cfg));
    RunConfig rc;
    rc.seed = hash_combine(s, 0xa119ull);
    rc.sketch_faults = FaultModel::uniform(cfg.sketch_fault_rate);
    rc.max_refine_rounds = std::max(1, cfg.max_refine_rounds);
    RunResult run = run_trajectory(print_scene(g), rc);
    std::vector<PackedRecord> out;
    for (const auto& tr : run.steps) {
      const Verdict& v = tr.first_alignment;
      if (v.status != InspectStatus::Aligned &&
          v.status != InspectStatus::Misaligned) {
        continue;
      }
      ordered_json rec;
      rec["ins"] = tr.planned.ins_text;
      rec["image_before"] = image_to_json(tr.before_image);
      rec["image_after"] = image_to_json(tr.after_image);
      rec["label"] =
          v.status == InspectStatus::Aligned ? "positive" : "negative";
      rec["analysis"] = verdict_analysis(v);
      rec["refine_ins"] = v.critique ? v.critique->rendered_text : "";
      out.push_back(pack_record(rec));
    }
    return out;
  } catch (const InfeasibleError&) {
    return {};
  } catch (const LayoutError&) {
    return {};
  }
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

ordered_json stats_to_json(const SubsetStats& s, const char* file,
                           bool labeled, bool imaged) {
  ordered_json doc;
  doc["file"] = file;
  doc["count"] = s.count;
  if (labeled) {
    doc["positives"] = s.positives;
    doc["negatives"] = s.negatives;
  }
  if (s.avg_prompt_chars) {
    doc["avg_prompt_chars"] = *s.avg_prompt_chars;
  } else {
    doc["avg_prompt_chars"] = nullptr;
  }
  if (imaged) {
    if (s.avg_images) {
      doc["avg_images"] = *s.avg_images;
    } else {
      doc["avg_images"] = nullptr;
    }
    doc["max_images"] = s.max_images;
  }
  return doc;
}

SubsetStats stats_from_json(const json& doc) {
  SubsetStats s;
  s.count = doc.at("count").get<long>();
  if (doc.contains("positives")) s.positives = doc["positives"].get<long>();
  if (doc.contains("negatives")) s.negatives = doc["negatives"].get<long>();
  if (doc.contains("avg_prompt_chars") && !doc["avg_prompt_chars"].is_null()) {
    s.avg_prompt_chars = doc["avg_prompt_chars"].get<double>();
  }
  if (doc.contains("avg_images") && !doc["avg_images"].is_null()) {
    s.avg_images = doc["avg_images"].get<double>();
  }
  if (doc.contains("max_images")) s.max_images = doc["max_images"].get<long>();
  return s;
}

SubsetStats stats_from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  StatsAccum acc;
  std::string line;
  long index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      acc.add(json::parse(line));
    } catch (const json::exception& e) {
      throw DatasetError(path.filename().string() + " record " +
                         std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  return acc.finish();
}

}  // namespace

bool stats_equal(const DatasetManifest& a, const DatasetManifest& b) {
  return a.multiturn == b.multiturn && a.conflict == b.conflict &&
         a.alignment == b.alignment;
}

std::string manifest_json_text(const DatasetManifest& m,
                               const AppConfig& cfg) {
  ordered_json doc;
  ordered_json subsets;
  subsets["multiturn"] =
      stats_to_json(m.multiturn, "multiturn.jsonl", false, true);
  subsets["conflict"] =
      stats_to_json(m.conflict, "conflict.jsonl", true, false);
  subsets["alignment"] =
      stats_to_json(m.alignment, "alignment.jsonl", true, true);
  doc["subsets"] = std::move(subsets);
  doc["seed"] = m.seed;
  doc["config_digest"] = m.config_digest;
  doc["config"] = ordered_json::parse(canonical_dump(cfg));
  ordered_json shapes, colors;
  for (int i = 1; i <= kShapeCount; ++i) {
    shapes[std::to_string(i)] = shape_name(Shape(i));
  }
  for (int i = 1; i <= kColorCount; ++i) {
    colors[std::to_string(i)] = color_name(Color(i));
  }
  doc["codes"] = {{"shapes", std::move(shapes)}, {"colors", std::move(colors)}};
  return doc.dump(2) + "\n";
}

DatasetManifest emit_dataset(const AppConfig& cfg) {
  validate_config(cfg);
  fs::create_directories(cfg.out_dir);

  const long mt_total = scaled_target(cfg.multiturn_total, cfg.scale);
  const long cf_total = scaled_target(cfg.conflict_total, cfg.scale);
  const long cf_neg =
      scaled_part(cf_total, cfg.conflict_negative, cfg.conflict_total);
  const long cf_pos = cf_total - cf_neg;
  const long al_total = scaled_target(cfg.alignment_total, cfg.scale);
  const long al_pos =
      scaled_part(al_total, cfg.alignment_positive, cfg.alignment_total);
  const long al_neg = al_total - al_pos;

  DatasetManifest m;
  m.seed = cfg.seed;
  m.config_digest = config_digest(cfg);

  {
    StatsAccum acc;
    std::vector<std::string> lines;
    lines.reserve(size_t(mt_total));
    if (mt_total > 0) {
      quota_fill(
          "multiturn", cfg.workers, 4 * mt_total + 1024,
          [&cfg](long i) { return gen_multiturn(cfg, i); },
          [&](PackedRecord&& rec) {
            acc.add(rec);
            lines.push_back(std::move(rec.line));
            return long(lines.size()) < mt_total;
          });
    }
    write_lines(fs::path(cfg.out_dir) / "multiturn.jsonl", lines);
    m.multiturn = acc.finish();
  }
  {
    StatsAccum acc;
    std::vector<std::string> lines;
    long pos = 0, neg = 0;
    if (cf_pos + cf_neg > 0) {
      quota_fill(
          "conflict", cfg.workers, 8 * cf_total + 1024,
          [&cfg](long i) { return gen_conflict(cfg, i); },
          [&](PackedRecord&& rec) {
            const bool positive = rec.label > 0;
            if (positive ? pos < cf_pos : neg < cf_neg) {
              (positive ? pos : neg) += 1;
              acc.add(rec);
              lines.push_back(std::move(rec.line));
            }
            return pos < cf_pos || neg < cf_neg;
          });
    }
    write_lines(fs::path(cfg.out_dir) / "conflict.jsonl", lines);
    m.conflict = acc.finish();
  }
  {
    StatsAccum acc;
    std::vector<std::string> lines;
    long pos = 0, neg = 0;
    if (al_pos + al_neg > 0) {
      quota_fill(
          "alignment", cfg.workers, 8 * al_total + 1024,
          [&cfg](long i) { return gen_alignment(cfg, i); },
          [&](PackedRecord&& rec) {
            const bool positive = rec.label > 0;
            if (positive ? pos < al_pos : neg < al_neg) {
              (positive ? pos : neg) += 1;
              acc.add(rec);
              lines.push_back(std::move(rec.line));
            }
            return pos < al_pos || neg < al_neg;
          });
    }
    write_lines(fs::path(cfg.out_dir) / "alignment.jsonl", lines);
    m.alignment = acc.finish();
  }

  std::ofstream out(fs::path(cfg.out_dir) / "manifest.json",
                    std::ios::binary);
  if (!out) throw DatasetError("cannot write manifest.json");
  out << manifest_json_text(m, cfg);
  return m;
}

DatasetManifest stats_dataset(const std::string& dir) {
  DatasetManifest m;
  m.multiturn = stats_from_file(fs::path(dir) / "multiturn.jsonl");
  m.conflict = stats_from_file(fs::path(dir) / "conflict.jsonl");
  m.alignment = stats_from_file(fs::path(dir) / "alignment.jsonl");
  return m;
}

DatasetManifest read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DatasetError("manifest.json: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    m.multiturn = stats_from_json(doc.at("subsets").at("multiturn"));
    m.conflict = stats_from_json(doc.at("subsets").at("conflict"));
    m.alignment = stats_from_json(doc.at("subsets").at("alignment"));
    m.seed = doc.at("seed").get<uint64_t>();
    m.config_digest = doc.at("config_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw DatasetError("manifest.json: " + std::string(e.what()));
  }
  return m;
}

}  // namespace sketchloop
