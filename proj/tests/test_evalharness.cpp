#include <iterator>
#include <set>

#include "doctest.h"

#include "sketchloop/evalharness.hpp"

using namespace sketchloop;

TEST_CASE("every category builds parseable prompts with its own shape") {
  for (Category cat : kAllCategories) {
    CAPTURE(category_name(cat));
    CategorySuite suite = build_suite(cat, 40, 123);
    REQUIRE(suite.prompts.size() == 40);
    for (const auto& prompt : suite.prompts) {
      SceneGraph g = parse_scene(prompt);
      switch (cat) {
        case Category::SingleObject:
          CHECK(g.objects.size() == 1);
          break;
        case Category::TwoObjects: {
          CHECK(g.objects.size() == 2);
          CHECK(g.objects[0].shape != g.objects[1].shape);
          break;
        }
        case Category::Counting: {
          CHECK(g.objects.size() >= 2);
          CHECK(g.objects.size() <= 4);
          std::set<Shape> shapes;
          for (const auto& o : g.objects) shapes.insert(o.shape);
          CHECK(shapes.size() == 1);
          break;
        }
        case Category::Colors: {
          CHECK(g.objects.size() >= 2);
          CHECK(g.objects.size() <= 4);
          std::set<Shape> shapes;
          for (const auto& o : g.objects) shapes.insert(o.shape);
          CHECK(shapes.size() == g.objects.size());
          break;
        }
        case Category::Position: {
          CHECK(g.objects.size() >= 2);
          CHECK(g.objects.size() <= 3);
          CHECK(g.relations.size() == 1);
          break;
        }
        case Category::ColorAttributes: {
          std::set<Shape> shapes;
          std::set<Color> colors;
          for (const auto& o : g.objects) {
            shapes.insert(o.shape);
            colors.insert(o.color);
          }
          CHECK(shapes.size() == g.objects.size());
          CHECK(colors.size() == g.objects.size());
          break;
        }
      }
    }
  }
}

TEST_CASE("position prompts cycle through all four relation words") {
  CategorySuite suite = build_suite(Category::Position, 8, 5);
  int above = 0, below = 0, left = 0, right = 0;
  for (const auto& prompt : suite.prompts) {
    if (prompt.find(" above ") != std::string::npos) ++above;
    if (prompt.find(" below ") != std::string::npos) ++below;
    if (prompt.find(" left-of ") != std::string::npos) ++left;
    if (prompt.find(" right-of ") != std::string::npos) ++right;
  }
  CHECK(above == 2);
  CHECK(below == 2);
  CHECK(left == 2);
  CHECK(right == 2);
}

TEST_CASE("suites are deterministic in the seed") {
  CategorySuite a = build_suite(Category::Colors, 20, 77);
  CategorySuite b = build_suite(Category::Colors, 20, 77);
  CHECK(a.prompts == b.prompts);
  CategorySuite c = build_suite(Category::Colors, 20, 78);
  CHECK(a.prompts != c.prompts);
}

TEST_CASE("scoring accepts clean renders and rejects wrong ones") {
  SceneGraph g = parse_scene("2 red circle; blue square");
  CHECK(score("2 red circle; blue square", render(layout(g), g)));

  SceneGraph fewer = parse_scene("red circle; blue square");
  CHECK(!score("2 red circle; blue square", render(layout(fewer), fewer)));

  SceneGraph pair = parse_scene("red circle; blue square");
  PlacementMap pm;
  pm.put({Shape::Circle, Color::Red, 1}, {2, 2});
  pm.put({Shape::Square, Color::Blue, 1}, {2, 3});
  CHECK(score("red circle left-of blue square", render(pm, pair)));
  CHECK(!score("red circle right-of blue square", render(pm, pair)));
  CHECK(!score("red circle above blue square", render(pm, pair)));
}

TEST_CASE("with no faults both modes are perfect") {
  EvalConfig cfg;
  cfg.n_per_category = 6;
  cfg.seed = 3;
  cfg.fault_rate = 0.0;
  ReportTable table = compare_modes(cfg);
  REQUIRE(table.rows.size() == std::size(kAllCategories));
  for (const auto& row : table.rows) {
    CAPTURE(category_name(row.category));
    CHECK(row.process.accuracy == 1.0);
    CHECK(row.single.accuracy == 1.0);
    CHECK(row.closed_form == 1.0);
    CHECK(row.process.mean_refines == 0.0);
  }
  CHECK(table.overall_process.accuracy == 1.0);
  CHECK(table.overall_single.accuracy == 1.0);
}

TEST_CASE("without refinement the process matches the baseline") {
  EvalConfig cfg;
  cfg.n_per_category = 12;
  cfg.seed = 11;
  cfg.fault_rate = 0.3;
  cfg.max_refine_rounds = 0;
  ReportTable table = compare_modes(cfg);
  for (const auto& row : table.rows) {
    CAPTURE(category_name(row.category));
    CHECK(row.process.accuracy ==
          doctest::Approx(row.single.accuracy).epsilon(0.011));
  }
}

TEST_CASE("with refinement the process dominates at small n") {
  EvalConfig cfg;
  cfg.n_per_category = 12;
  cfg.seed = 19;
  cfg.fault_rate = 0.4;
  cfg.max_refine_rounds = 3;
  ReportTable table = compare_modes(cfg);
  for (const auto& row : table.rows) {
    CAPTURE(category_name(row.category));
    CHECK(row.process.accuracy >= row.single.accuracy);
  }
  CHECK(table.overall_process.accuracy > table.overall_single.accuracy);
}

TEST_CASE("the closed form is the fault free power law") {
  CHECK(closed_form_accuracy(4, 0.0) == 1.0);
  CHECK(closed_form_accuracy(4, 0.3) == doctest::Approx(0.2401));
  CHECK(closed_form_accuracy(1, 0.3) == doctest::Approx(0.7));
  CHECK(closed_form_accuracy(2, 1.0) == 0.0);
}

TEST_CASE("sweeps report increasing refine effort") {
  EvalConfig cfg;
  cfg.n_per_category = 6;
  cfg.seed = 23;
  std::vector<SweepRow> rows = sweep_fault_rates(cfg, {0.0, 0.3});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fault_rate == 0.0);
  CHECK(rows[0].mean_refines == 0.0);
  CHECK(rows[1].mean_refines > 0.0);
  CHECK(rows[0].process_accuracy == 1.0);
}

TEST_CASE("reports render in both text and json form") {
  EvalConfig cfg;
  cfg.n_per_category = 4;
  cfg.seed = 29;
  cfg.fault_rate = 0.3;
  ReportTable table = compare_modes(cfg);
  std::string text = report_text(table);
  CHECK(text.find("single-object") != std::string::npos);
  CHECK(text.find("overall") != std::string::npos);
  std::string j = report_json(table);
  CHECK(j.find("\"overall\"") != std::string::npos);
  CHECK(j.find("\"closed_form\"") != std::string::npos);

  std::vector<SweepRow> rows = sweep_fault_rates(cfg, {0.0, 0.2});
  CHECK(sweep_text(rows).find("0.2") != std::string::npos);
  CHECK(sweep_json(rows).find("fault_rate") != std::string::npos);
}
