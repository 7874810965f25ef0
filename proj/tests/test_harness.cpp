#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dsse/error.hpp"
#include "dsse/harness.hpp"
#include "support.hpp"

using namespace dsse;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ScenarioConfig small(double e_v, double e_i, Preference p, int count) {
  ScenarioConfig cfg;
  cfg.e_v = e_v;
  cfg.e_i = e_i;
  cfg.preference = p;
  cfg.dispatch_count = count;
  cfg.master_seed = 42;
  return cfg;
}

GridConfig one_cell(int count) {
  GridConfig g;
  g.e_v_list = {0.003};
  g.e_i_list = {0.001};
  g.base.dispatch_count = count;
  g.base.master_seed = 3;
  return g;
}

}  // namespace

TEST_CASE("error statistics by hand") {
  StateVector truth{{1.0, 0.81}, {1.0, -1.0, 0.5, -0.5}, {0.5, -0.5, 0.25, -0.25}};
  StateVector est = truth;
  est.v_sq[0] = 1.01 * 1.01;
  est.flow_p[0] = 1.1;

  const auto e = compute_errors(est, truth, Normalization::class_mean);
  // Magnitudes 1 and 0.9, mean 0.95; only the first is off by 0.01.
  CHECK(e.max_err_v == doctest::Approx(0.01 / 0.95).epsilon(1e-12));
  CHECK(e.mean_err_v == doctest::Approx(0.005 / 0.95).epsilon(1e-12));
  // Eight flows with mean |m| 0.5625; one is off by 0.1.
  CHECK(e.max_err_f == doctest::Approx(0.1 / 0.5625).epsilon(1e-12));
  CHECK(e.mean_err_f == doctest::Approx(0.1 / 8 / 0.5625).epsilon(1e-12));
  // 0.1 exceeds five times the mean flow error of 0.0125.
  CHECK(e.outlier_count == 1);
  CHECK(compute_errors(est, truth, Normalization::class_mean, 10.0).outlier_count == 0);

  const auto pe = compute_errors(est, truth, Normalization::per_element);
  CHECK(pe.max_err_v == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(pe.max_err_f == doctest::Approx(0.1).epsilon(1e-12));

  const auto zero = compute_errors(truth, truth, Normalization::class_mean);
  CHECK(zero == RunErrors{});
}

TEST_CASE("per-element normalization skips zero references") {
  StateVector truth{{1.0}, {0.0, 0.2}, {0.0, 0.1}};
  StateVector est = truth;
  est.flow_p[0] = 0.05;
  est.flow_p[1] = 0.22;
  const auto e = compute_errors(est, truth, Normalization::per_element);
  CHECK(std::isfinite(e.max_err_f));
  CHECK(e.max_err_f == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("property: max is at least mean in every run") {
  const auto net = testing::fixture();
  for (auto p : {Preference::nodal, Preference::edge}) {
    const auto cfg = small(0.006, 0.006, p, 10);
    for (int i = 0; i < cfg.dispatch_count; ++i) {
      const auto e = run_one(net, cfg, i);
      CHECK(e.max_err_v >= e.mean_err_v);
      CHECK(e.max_err_f >= e.mean_err_f);
      CHECK(e.mean_err_v >= 0.0);
      CHECK(e.selection_attempts >= 1);
    }
  }
}

TEST_CASE("zero noise and full measurements on a linear truth are exact") {
  const auto net = testing::fixture();
  auto cfg = small(0.0, 0.0, Preference::nodal, 5);
  cfg.fractions = Fractions{1.0, 1.0};
  cfg.truth = FlowMethod::linear;
  for (int i = 0; i < cfg.dispatch_count; ++i) {
    const auto e = run_one(net, cfg, i);
    CHECK(e.max_err_v < 1e-8);
    CHECK(e.max_err_f < 1e-8);
  }
}

TEST_CASE("zero noise on an exact truth leaves only the linearization gap") {
  const auto net = testing::fixture();
  auto cfg = small(0.0, 0.0, Preference::nodal, 5);
  cfg.fractions = Fractions{1.0, 1.0};
  auto noisy = cfg;
  noisy.e_v = noisy.e_i = 0.01;
  for (int i = 0; i < cfg.dispatch_count; ++i) {
    const auto gap = run_one(net, cfg, i);
    CHECK(gap.mean_err_f > 0.0);
    CHECK(gap.mean_err_v > 0.0);
    CHECK(gap.max_err_v < 0.01);
    CHECK(gap.mean_err_f < run_one(net, noisy, i).mean_err_f);
  }
}

TEST_CASE("runs are reproducible and independent of the worker count") {
  const auto net = testing::fixture();
  const auto cfg = small(0.001, 0.001, Preference::nodal, 12);
  CHECK(run_one(net, cfg, 4) == run_one(net, cfg, 4));
  const auto one = run_batch(net, cfg, 1);
  const auto three = run_batch(net, cfg, 3);
  REQUIRE(one.size() == 12);
  for (std::size_t k = 0; k < one.size(); ++k) {
    REQUIRE(one[k].errors);
    CHECK(*one[k].errors == *three[k].errors);
  }
  CHECK(run_one(net, cfg, 4) != run_one(net, cfg, 5));
}

TEST_CASE("a single-run scenario equals that run") {
  const auto net = testing::fixture();
  const auto cfg = small(0.003, 0.006, Preference::edge, 1);
  const auto e = run_one(net, cfg, 0);
  const auto s = run_scenario(net, cfg);
  CHECK(s.runs == 1);
  CHECK(s.avg_of_mean_v == e.mean_err_v);
  CHECK(s.avg_of_max_v == e.max_err_v);
  CHECK(s.avg_of_mean_f == e.mean_err_f);
  CHECK(s.avg_of_max_f == e.max_err_f);
  CHECK(s.median_outliers == e.outlier_count);
}

TEST_CASE("summary statistics") {
  std::vector<RunOutcome> outs;
  for (int k = 0; k < 4; ++k) {
    RunErrors e;
    e.mean_err_v = k;
    e.max_err_v = 2 * k;
    e.outlier_count = k;
    e.selection_attempts = k % 2 ? 3 : 1;
    outs.push_back({e, ""});
  }
  const auto s = summarize(outs);
  CHECK(s.avg_of_mean_v == 1.5);
  CHECK(s.avg_of_max_v == 3.0);
  CHECK(s.median_outliers == 1.5);
  CHECK(s.first_draw_observable == 0.5);
  // Sample std of {0,1,2,3} is sqrt(5/3).
  CHECK(s.hw_mean_v == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("more than 1% observability failures abort the scenario") {
  std::vector<RunOutcome> outs(100, RunOutcome{RunErrors{}, ""});
  outs[3] = {std::nullopt, "dispatch 3: unobservable"};
  const auto s = summarize(outs);
  CHECK(s.failures == 1);
  CHECK(s.runs == 99);
  outs[7] = {std::nullopt, "dispatch 7: unobservable"};
  CHECK_THROWS_AS(summarize(outs), Error);
}

TEST_CASE("unobservable fractions fail every run with the index attached") {
  const auto net = testing::fixture();
  auto cfg = small(0.001, 0.001, Preference::nodal, 3);
  cfg.fractions = Fractions{0.0, 0.0};
  cfg.selection.max_resamples = 1;
  const auto outs = run_batch(net, cfg, 2);
  for (int k = 0; k < 3; ++k) {
    CHECK_FALSE(outs[k].errors);
    CHECK(outs[k].failure.find("dispatch " + std::to_string(k)) != std::string::npos);
  }
  CHECK_THROWS_AS(run_scenario(net, cfg), Error);
  try {
    run_one(net, cfg, 2);
    FAIL("expected a run failure");
  } catch (const RunFailure& e) {
    CHECK(e.index() == 2);
    CHECK(e.observability());
  }
}

TEST_CASE("grid config parse, dump and rejection") {
  const auto g = parse_grid_config(R"({"e_v_list": [0.001, 0.01], "e_i_list": [0.003], "preferences": ["edge"],
    "dispatch_count": 200, "master_seed": 9, "fractions": {"edge": [0.4, 0.95]}, "postfilter": false,
    "normalization": "per_element"})");
  CHECK(g.e_v_list == std::vector<double>{0.001, 0.01});
  CHECK(g.preferences == std::vector<Preference>{Preference::edge});
  CHECK(g.base.dispatch_count == 200);
  CHECK(g.base.master_seed == 9);
  CHECK_FALSE(g.base.postfilter);
  CHECK(g.base.normalization == Normalization::per_element);
  CHECK(g.cell(0.01, 0.003, Preference::edge).effective_fractions() == Fractions{0.4, 0.95});
  CHECK(g.cell(0.01, 0.003, Preference::nodal).effective_fractions() == Fractions{0.6, 0.8});

  const auto again = parse_grid_config(dump_grid_config(g));
  CHECK(dump_grid_config(again) == dump_grid_config(g));

  const auto defaults = parse_grid_config("{}");
  CHECK(defaults.e_v_list.size() == 4);
  CHECK(defaults.preferences.size() == 2);
  CHECK(defaults.base.dispatch_count == 1500);

  CHECK_THROWS_AS(parse_grid_config(R"({"e_v_list": [0.2]})"), ParseError);
  CHECK_THROWS_AS(parse_grid_config(R"({"unknown": 1})"), ParseError);
  CHECK_THROWS_AS(parse_grid_config(R"({"preferences": ["both"]})"), ParseError);
  CHECK_THROWS_AS(parse_grid_config(R"({"dispatch_count": 0})"), ParseError);
  CHECK_THROWS_AS(parse_grid_config(R"({"fractions": {"nodal": [1.5, 0.2]}})"), ParseError);
  CHECK_THROWS_AS(parse_grid_config("[1, 2"), ParseError);
}

TEST_CASE("a one-cell grid gives eight one-cell tables") {
  const auto net = testing::fixture();
  const auto r = run_grid(net, one_cell(4), 2);
  REQUIRE(r.cells.size() == 2);
  CHECK(r.complete());
  const auto csv = render_table_csv(r, TableStat::mean_v, Preference::nodal);
  const auto nl = csv.find('\n');
  CHECK(csv.substr(0, nl) == "e_i\\e_v,0.3%");
  CHECK(csv.substr(nl + 1, 5) == "0.1%,");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  const auto dir = std::filesystem::temp_directory_path() / "dsse_grid_one";
  std::filesystem::remove_all(dir);
  write_grid(r, dir);
  int tables = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir / "tables")) tables += f.path().extension() == ".csv";
  CHECK(tables == 8);
  CHECK(std::filesystem::exists(dir / "tables" / "table_max_f_edge.md"));
  const auto side = nlohmann::json::parse(slurp(dir / "sidecar.json"));
  CHECK(side["complete"] == true);
  CHECK(side["cells"].size() == 2);
  CHECK(side["cells"][0]["runs"] == 4);
  CHECK(side["cells"][0].contains("half_width"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("full grid layout: e_i rows by e_v columns") {
  GridResult r;
  r.config = GridConfig{};
  for (auto p : r.config.preferences) {
    for (double e_i : r.config.e_i_list) {
      for (double e_v : r.config.e_v_list) {
        ScenarioStats s;
        s.avg_of_mean_v = e_v + 10 * e_i;
        r.cells.push_back({e_v, e_i, p, s, ""});
      }
    }
  }
  r.cells[1].stats.reset();
  r.cells[1].error = "boom";
  const auto csv = render_table_csv(r, TableStat::mean_v, Preference::nodal);
  CHECK(csv ==
        "e_i\\e_v,0.1%,0.3%,0.6%,1%\n"
        "0.1%,1.1000,FAILED,1.6000,2.0000\n"
        "0.3%,3.1000,3.3000,3.6000,4.0000\n"
        "0.6%,6.1000,6.3000,6.6000,7.0000\n"
        "1%,10.1000,10.3000,10.6000,11.0000\n");
  CHECK_FALSE(r.complete());
  const auto md = render_table_markdown(r, TableStat::mean_v, Preference::nodal);
  CHECK(md.find("| 10.1000 |") != std::string::npos);
}

TEST_CASE("same seed, same table bytes; jobs do not matter") {
  const auto net = testing::fixture();
  auto g = one_cell(6);
  g.e_i_list = {0.001, 0.01};
  const auto a = run_grid(net, g, 1);
  const auto b = run_grid(net, g, 3);
  for (auto stat : {TableStat::mean_v, TableStat::mean_f, TableStat::max_v, TableStat::max_f}) {
    for (auto p : {Preference::nodal, Preference::edge}) CHECK(render_table_csv(a, stat, p) == render_table_csv(b, stat, p));
  }
  CHECK(render_sidecar(a) == render_sidecar(b));
}
