#include "sketchloop/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "sketchloop/rng.hpp"

namespace sketchloop {

namespace {

using nlohmann::ordered_json;

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + value + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

using Setter = std::function<void(AppConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](AppConfig& c, const std::string& v) {
         c.seed = parse_number<uint64_t>("seed", v);
       }},
      {"scale", [](AppConfig& c, const std::string& v) {
         c.scale = parse_number<double>("scale", v);
       }},
      {"out_dir", [](AppConfig& c, const std::string& v) { c.out_dir = v; }},
      {"workers", [](AppConfig& c, const std::string& v) {
         c.workers = parse_number<int>("workers", v);
       }},
      {"min_objects", [](AppConfig& c, const std::string& v) {
         c.min_objects = parse_number<int>("min_objects", v);
       }},
      {"max_objects", [](AppConfig& c, const std::string& v) {
         c.max_objects = parse_number<int>("max_objects", v);
       }},
      {"min_relations", [](AppConfig& c, const std::string& v) {
         c.min_relations = parse_number<int>("min_relations", v);
       }},
      {"max_relations", [](AppConfig& c, const std::string& v) {
         c.max_relations = parse_number<int>("max_relations", v);
       }},
      {"sketch_fault_rate", [](AppConfig& c, const std::string& v) {
         c.sketch_fault_rate = parse_number<double>("sketch_fault_rate", v);
       }},
      {"plan_fault_rate", [](AppConfig& c, const std::string& v) {
         c.plan_fault_rate = parse_number<double>("plan_fault_rate", v);
       }},
      {"max_refine_rounds", [](AppConfig& c, const std::string& v) {
         c.max_refine_rounds = parse_number<int>("max_refine_rounds", v);
       }},
      {"augmentation_ratio", [](AppConfig& c, const std::string& v) {
         c.augmentation_ratio = parse_number<double>("augmentation_ratio", v);
       }},
      {"lambda_ce", [](AppConfig& c, const std::string& v) {
         c.lambda_ce = parse_number<double>("lambda_ce", v);
       }},
      {"inline_critiques", [](AppConfig& c, const std::string& v) {
         c.inline_critiques = parse_bool("inline_critiques", v);
       }},
      {"multiturn_total", [](AppConfig& c, const std::string& v) {
         c.multiturn_total = parse_number<long>("multiturn_total", v);
       }},
      {"conflict_total", [](AppConfig& c, const std::string& v) {
         c.conflict_total = parse_number<long>("conflict_total", v);
       }},
      {"conflict_negative", [](AppConfig& c, const std::string& v) {
         c.conflict_negative = parse_number<long>("conflict_negative", v);
       }},
      {"alignment_total", [](AppConfig& c, const std::string& v) {
         c.alignment_total = parse_number<long>("alignment_total", v);
       }},
      {"alignment_positive", [](AppConfig& c, const std::string& v) {
         c.alignment_positive = parse_number<long>("alignment_positive", v);
       }},
      {"eval_suite_size", [](AppConfig& c, const std::string& v) {
         c.eval_suite_size = parse_number<int>("eval_suite_size", v);
       }},
      {"eval_fault_rate", [](AppConfig& c, const std::string& v) {
         c.eval_fault_rate = parse_number<double>("eval_fault_rate", v);
       }},
  };
  return table;
}

}  // namespace

long scaled_target(long full_total, double scale) {
  return llround(double(full_total) * scale);
}

long scaled_part(long scaled_total, long part, long full_total) {
  if (full_total <= 0) return 0;
  return llround(double(scaled_total) * double(part) / double(full_total));
}

void apply_config_entry(AppConfig& cfg, const std::string& key,
                        const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key: " + key);
  it->second(cfg, value);
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  AppConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = trim(line);
    size_t hash = body.find('#');
    if (hash != std::string::npos) body = trim(body.substr(0, hash));
    if (body.empty()) continue;
    size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    }
    apply_config_entry(cfg, trim(body.substr(0, eq)),
                       trim(body.substr(eq + 1)));
  }
  return cfg;
}

void validate_config(const AppConfig& cfg) {
  auto prob = [](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
    }
  };
  prob("sketch_fault_rate", cfg.sketch_fault_rate);
  prob("plan_fault_rate", cfg.plan_fault_rate);
  prob("augmentation_ratio", cfg.augmentation_ratio);
  prob("eval_fault_rate", cfg.eval_fault_rate);
  if (!(cfg.scale > 0.0)) throw ConfigError("scale must be positive");
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.max_refine_rounds < 0) {
    throw ConfigError("max_refine_rounds must be nonnegative");
  }
  if (cfg.lambda_ce < 0) throw ConfigError("lambda_ce must be nonnegative");
  if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects ||
      cfg.max_objects > 12) {
    throw ConfigError("object bounds must satisfy 1 <= min <= max <= 12");
  }
  if (cfg.min_relations < 0 || cfg.max_relations < cfg.min_relations) {
    throw ConfigError("relation bounds must satisfy 0 <= min <= max");
  }
  for (auto [name, v] : {std::pair<const char*, long>{
                             "multiturn_total", cfg.multiturn_total},
                         {"conflict_total", cfg.conflict_total},
                         {"conflict_negative", cfg.conflict_negative},
                         {"alignment_total", cfg.alignment_total},
                         {"alignment_positive", cfg.alignment_positive}}) {
    if (v < 0) throw ConfigError(std::string(name) + " must be nonnegative");
  }
  if (cfg.conflict_negative > cfg.conflict_total) {
    throw ConfigError("conflict_negative exceeds conflict_total");
  }
  if (cfg.alignment_positive > cfg.alignment_total) {
    throw ConfigError("alignment_positive exceeds alignment_total");
  }
  if (cfg.eval_suite_size < 1) {
    throw ConfigError("eval_suite_size must be at least 1");
  }
}

std::string canonical_dump(const AppConfig& cfg) {
  ordered_json doc;
  doc["seed"] = cfg.seed;
  doc["scale"] = cfg.scale;
  doc["min_objects"] = cfg.min_objects;
  doc["max_objects"] = cfg.max_objects;
  doc["min_relations"] = cfg.min_relations;
  doc["max_relations"] = cfg.max_relations;
  doc["sketch_fault_rate"] = cfg.sketch_fault_rate;
  doc["plan_fault_rate"] = cfg.plan_fault_rate;
  doc["max_refine_rounds"] = cfg.max_refine_rounds;
  doc["augmentation_ratio"] = cfg.augmentation_ratio;
  doc["lambda_ce"] = cfg.lambda_ce;
  doc["inline_critiques"] = cfg.inline_critiques;
  doc["multiturn_total"] = cfg.multiturn_total;
  doc["conflict_total"] = cfg.conflict_total;
  doc["conflict_negative"] = cfg.conflict_negative;
  doc["alignment_total"] = cfg.alignment_total;
  doc["alignment_positive"] = cfg.alignment_positive;
  doc["eval_suite_size"] = cfg.eval_suite_size;
  doc["eval_fault_rate"] = cfg.eval_fault_rate;
  return doc.dump(2);
}

std::string config_digest(const AppConfig& cfg) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << fnv1a64(canonical_dump(cfg));
  return out.str();
}

}  // namespace sketchloop
