#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "sketchloop/config.hpp"

using namespace sketchloop;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& text) {
    path = fs::temp_directory_path() /
           ("sketchloop_cfg_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++) + ".cfg");
    std::ofstream out(path);
    out << text;
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

}  // namespace

TEST_CASE("config files override defaults field by field") {
  TempFile f(
      "# run shape\n"
      "seed = 42\n"
      "scale = 0.5   # half size\n"
      "out_dir = artifacts\n"
      "workers = 2\n"
      "sketch_fault_rate = 0.25\n"
      "inline_critiques = true\n"
      "\n"
      "multiturn_total = 100\n");
  AppConfig cfg = load_config_file(f.path.string());
  CHECK(cfg.seed == 42);
  CHECK(cfg.scale == 0.5);
  CHECK(cfg.out_dir == "artifacts");
  CHECK(cfg.workers == 2);
  CHECK(cfg.sketch_fault_rate == 0.25);
  CHECK(cfg.inline_critiques);
  CHECK(cfg.multiturn_total == 100);
  // Untouched fields keep their defaults.
  CHECK(cfg.plan_fault_rate == 0.5);
  CHECK(cfg.conflict_total == 15201);
}

TEST_CASE("unknown keys and bad values are rejected with the line named") {
  TempFile unknown("seed = 1\nmystery_knob = 3\n");
  CHECK_THROWS_AS(load_config_file(unknown.path.string()), ConfigError);
  try {
    load_config_file(unknown.path.string());
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mystery_knob") != std::string::npos);
  }

  TempFile bad("seed = banana\n");
  CHECK_THROWS_AS(load_config_file(bad.path.string()), ConfigError);

  TempFile no_eq("seed 1\n");
  CHECK_THROWS_AS(load_config_file(no_eq.path.string()), ConfigError);

  CHECK_THROWS_AS(load_config_file("/nonexistent/sketchloop.cfg"),
                  ConfigError);
}

TEST_CASE("validation names the offending field") {
  AppConfig cfg;
  cfg.sketch_fault_rate = 1.5;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);

  AppConfig workers;
  workers.workers = 0;
  CHECK_THROWS_AS(validate_config(workers), ConfigError);

  AppConfig objects;
  objects.min_objects = 5;
  objects.max_objects = 4;
  CHECK_THROWS_AS(validate_config(objects), ConfigError);

  AppConfig neg;
  neg.conflict_negative = 16000;  // above conflict_total
  CHECK_THROWS_AS(validate_config(neg), ConfigError);

  AppConfig scale;
  scale.scale = 0.0;
  CHECK_THROWS_AS(validate_config(scale), ConfigError);

  CHECK_NOTHROW(validate_config(AppConfig{}));
}

TEST_CASE("the digest tracks content, not execution knobs") {
  AppConfig a;
  AppConfig b;
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a).size() == 16);

  b.workers = 8;
  b.out_dir = "elsewhere";
  CHECK(config_digest(a) == config_digest(b));
  CHECK(canonical_dump(a) == canonical_dump(b));

  b.seed = 2;
  CHECK(config_digest(a) != config_digest(b));

  AppConfig c;
  c.scale = 0.2;
  CHECK(config_digest(a) != config_digest(c));
}

TEST_CASE("scaled targets follow round-half arithmetic") {
  CHECK(scaled_target(32012, 0.1) == 3201);
  CHECK(scaled_target(15201, 0.1) == 1520);
  CHECK(scaled_target(15000, 0.1) == 1500);
  CHECK(scaled_target(100, 1.0) == 100);
  CHECK(scaled_target(5, 0.1) == 1);  // llround(0.5) rounds away from zero

  // Negative share carries the full-scale ratio onto the scaled total.
  CHECK(scaled_part(1520, 8296, 15201) == 830);
  CHECK(scaled_part(1500, 5000, 15000) == 500);
  CHECK(scaled_part(0, 8296, 15201) == 0);
  CHECK(scaled_part(100, 100, 100) == 100);
}
