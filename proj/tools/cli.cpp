#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dsse/harness.hpp"
#include "dsse/io.hpp"

#ifndef DSSE_DEFAULT_NETWORK
#define DSSE_DEFAULT_NETWORK "fixtures/ieee123_balanced.json"
#endif

namespace dsse::cli {

namespace {

using nlohmann::json;

std::string default_network() {
  if (const char* env = std::getenv("DSSE_NETWORK"); env && *env) return env;
  return DSSE_DEFAULT_NETWORK;
}

// Flags shared by estimate and grid; unset values leave the config alone.
struct ScenarioFlags {
  std::optional<bool> postfilter;
  std::optional<double> threshold;
  std::optional<std::string> normalization;
  std::optional<std::string> distribution;
  std::optional<double> sigma_factor;
  std::optional<int> max_resamples;
  std::optional<double> outlier_factor;
  std::optional<std::string> truth;
  std::optional<int> dispatches;
  bool antisymmetry_rows = false;

  void add_to(CLI::App* app, bool with_batch) {
    app->add_flag("--postfilter,!--no-postfilter", postfilter, "Antisymmetry post-filter (default off)");
    app->add_option("--threshold", threshold, "Post-filter mismatch threshold, relative to mean |flow|");
    app->add_option("--normalization", normalization, "class_mean or per_element")
        ->check(CLI::IsMember({"class_mean", "per_element"}));
    app->add_option("--distribution", distribution, "Noise distribution")->check(CLI::IsMember({"uniform", "gaussian"}));
    app->add_option("--sigma-factor", sigma_factor, "Gaussian sd as a fraction of the bound");
    app->add_option("--max-resamples", max_resamples, "Selection redraws on rank deficiency");
    app->add_option("--outlier-factor", outlier_factor, "Outlier multiple of the mean flow error");
    app->add_flag("--antisymmetry-rows", antisymmetry_rows, "Add structural antisymmetry rows");
    if (with_batch) {
      app->add_option("--truth-method", truth, "Ground truth solver")->check(CLI::IsMember({"exact", "linear"}));
      app->add_option("--dispatches", dispatches, "Dispatches per scenario")->check(CLI::PositiveNumber);
    }
  }

  void apply(ScenarioConfig& c) const {
    if (postfilter) c.postfilter = *postfilter;
    if (threshold) c.postfilter_threshold = *threshold;
    if (normalization) c.normalization = *parse_normalization(*normalization);
    if (distribution) c.distribution = *distribution == "gaussian" ? NoiseDistribution::gaussian : NoiseDistribution::uniform;
    if (sigma_factor) c.gaussian_sigma_factor = *sigma_factor;
    if (max_resamples) c.selection.max_resamples = *max_resamples;
    if (outlier_factor) c.outlier_factor = *outlier_factor;
    if (truth) c.truth = *truth == "linear" ? FlowMethod::linear : FlowMethod::exact;
    if (dispatches) c.dispatch_count = *dispatches;
    if (antisymmetry_rows) c.selection.antisymmetry_rows = true;
  }
};

json errors_json(const RunErrors& e) {
  return {{"mean_err_v", e.mean_err_v}, {"max_err_v", e.max_err_v},           {"mean_err_f", e.mean_err_f},
          {"max_err_f", e.max_err_f},   {"outlier_count", e.outlier_count}, {"selection_attempts", e.selection_attempts}};
}

int cmd_check(const std::string& network, bool quiet, std::ostream& out, std::ostream& err) {
  auto data = read_network_data(network);
  const auto report = validate_radial(data);
  if (!report.ok()) {
    for (const auto& f : report.findings) {
      err << f.code << ": " << f.message << (f.element.empty() ? "" : " [" + f.element + "]") << "\n";
    }
    return kDomainError;
  }
  if (!quiet) {
    const NetworkModel net(std::move(data));
    out << (net.data().name.empty() ? std::filesystem::path(network).stem().string() : net.data().name) << ": "
        << net.bus_count() << " buses, " << net.line_count() << " lines\n";
  }
  return kOk;
}

struct SolveArgs {
  std::string network;
  std::optional<std::string> dispatch;
  std::uint64_t seed = 1;
  std::string method = "exact";
  std::string out_path;
  std::optional<std::string> dispatch_out;
  int max_iter = ExactOptions{}.max_iter;
  double tol = ExactOptions{}.tol;
};

int cmd_solve(const SolveArgs& a, bool quiet, std::ostream& out, std::ostream& err) {
  const auto net = load_network(a.network);
  Dispatch d;
  if (a.dispatch) {
    d = read_dispatch(net, *a.dispatch);
  } else {
    auto rng = make_stream(a.seed, 0, StreamTag::dispatch);
    d = generate_dispatch(net, rng, {});
  }
  PowerFlowSolution s;
  if (a.method == "linear") {
    s = solve_linear(net, d);
  } else {
    s = solve_exact(net, d, {a.tol, a.max_iter});
    if (!s.converged) {
      err << "power flow did not converge after " << s.iterations << " iteration(s) (tol " << a.tol << ")\n";
      return kDomainError;
    }
  }
  if (a.dispatch_out) write_file_atomic(*a.dispatch_out, dump_dispatch(net, d));
  write_file_atomic(a.out_path, dump_solution(net, s));
  if (!quiet) {
    double v_min = 1e300;
    for (double v : s.v_sq) v_min = std::min(v_min, v);
    out << a.method << " solution: " << s.iterations << " iteration(s), min |V| " << std::sqrt(v_min) << " pu\n";
  }
  return kOk;
}

struct EstimateArgs {
  std::string network;
  std::string truth;
  double e_v = 0.001;
  double e_i = 0.001;
  std::string preference = "nodal";
  std::uint64_t seed = 1;
  std::optional<double> node_fraction;
  std::optional<double> flow_fraction;
  std::string out_path;
  std::optional<std::string> measurements_out;
  std::optional<std::string> measurements;
  ScenarioFlags flags;
};

int cmd_estimate(const EstimateArgs& a, bool quiet, std::ostream& out, std::ostream& err) {
  const auto net = load_network(a.network);
  const auto truth = read_solution(net, a.truth);
  if (!truth.converged) {
    err << "truth file is marked as not converged\n";
    return kDomainError;
  }
  ScenarioConfig cfg;
  cfg.e_v = a.e_v;
  cfg.e_i = a.e_i;
  cfg.preference = *parse_preference(a.preference);
  a.flags.apply(cfg);
  if (a.node_fraction || a.flow_fraction) {
    const auto base = default_fractions(cfg.preference);
    cfg.fractions = Fractions{a.node_fraction.value_or(base.node), a.flow_fraction.value_or(base.flow)};
  }
  cfg.noise().validate();

  RunDetail detail;
  if (a.measurements) {
    // Replay: the stored set replaces noise synthesis and selection.
    detail.truth = truth;
    detail.set = read_measurement_set(net, *a.measurements);
    detail.estimate = solve_wls(assemble(net, detail.set));
    if (cfg.postfilter) detail.estimate = postfilter_antisymmetry(detail.estimate, net, cfg.postfilter_threshold);
    detail.errors = compute_errors(detail.estimate.state, state_from_solution(truth), cfg.normalization,
                                   cfg.outlier_factor);
    detail.errors.selection_attempts = detail.set.attempts;
  } else {
    detail = estimate_from_truth(net, truth, cfg, a.seed);
  }

  json doc = json::parse(dump_estimate(net, detail.estimate));
  doc["errors"] = errors_json(detail.errors);
  doc["selection"] = {{"preference", std::string(to_string(detail.set.preference))},
                      {"node_fraction", detail.set.fractions.node},
                      {"flow_fraction", detail.set.fractions.flow},
                      {"seed", detail.set.seed},
                      {"attempts", detail.set.attempts},
                      {"rows", detail.set.measurements.size()}};
  doc["noise"] = {{"e_v", cfg.e_v}, {"e_i", cfg.e_i}, {"distribution", std::string(to_string(cfg.distribution))}};
  if (a.measurements_out) write_file_atomic(*a.measurements_out, dump_measurement_set(net, detail.set));
  write_file_atomic(a.out_path, doc.dump(2) + "\n");
  if (!quiet) {
    const auto& e = detail.errors;
    out << "mean/max voltage error " << e.mean_err_v * 100 << "% / " << e.max_err_v * 100 << "%, mean/max flow error "
        << e.mean_err_f * 100 << "% / " << e.max_err_f * 100 << "%, " << e.outlier_count << " outlier flow(s)\n";
  }
  return kOk;
}

struct GridArgs {
  std::string network;
  std::optional<std::string> config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  ScenarioFlags flags;
};

int cmd_grid(const GridArgs& a, int jobs, bool quiet, std::ostream& out, std::ostream& err) {
  const auto net = load_network(a.network);
  GridConfig cfg = a.config ? read_grid_config(*a.config) : GridConfig{};
  a.flags.apply(cfg.base);
  if (a.seed) cfg.base.master_seed = *a.seed;
  const auto result = run_grid(net, cfg, jobs);
  write_grid(result, a.out_dir);
  if (!result.complete()) {
    for (const auto& c : result.cells) {
      if (!c.stats) {
        err << "cell " << to_string(c.preference) << " e_v=" << c.e_v << " e_i=" << c.e_i << " failed: " << c.error
            << "\n";
      }
    }
    return kDomainError;
  }
  if (!quiet) out << "wrote " << result.cells.size() << " scenarios to " << a.out_dir << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Angle-free state estimation for radial distribution feeders"};
  app.name("dsse");
  app.require_subcommand(1);

  bool quiet = false;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_flag("-q,--quiet", quiet, "Suppress summaries");
  app.add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string check_network = default_network();
  auto* check = app.add_subcommand("check", "Validate a network file");
  check->add_option("--network", check_network, "Network file")->capture_default_str();

  SolveArgs solve_args;
  solve_args.network = default_network();
  auto* solve = app.add_subcommand("solve", "Power flow for one dispatch");
  solve->add_option("--network", solve_args.network, "Network file")->capture_default_str();
  auto* dispatch_opt = solve->add_option("--dispatch", solve_args.dispatch, "Dispatch file");
  solve->add_option("--seed", solve_args.seed, "Seed of a random dispatch")->excludes(dispatch_opt);
  solve->add_option("--method", solve_args.method, "exact or linear")->check(CLI::IsMember({"exact", "linear"}));
  solve->add_option("--out", solve_args.out_path, "Solution file")->required();
  solve->add_option("--dispatch-out", solve_args.dispatch_out, "Also write the dispatch used");
  solve->add_option("--max-iter", solve_args.max_iter, "Sweep iteration limit")->check(CLI::NonNegativeNumber);
  solve->add_option("--tol", solve_args.tol, "Convergence tolerance")->check(CLI::PositiveNumber);

  EstimateArgs est_args;
  est_args.network = default_network();
  auto* estimate = app.add_subcommand("estimate", "Estimate the state from synthetic measurements of a truth");
  estimate->add_option("--network", est_args.network, "Network file")->capture_default_str();
  estimate->add_option("--truth", est_args.truth, "Solution file used as ground truth")->required();
  estimate->add_option("--ev", est_args.e_v, "Voltage error bound")->check(CLI::Range(0.0, 0.05));
  estimate->add_option("--ei", est_args.e_i, "Current error bound")->check(CLI::Range(0.0, 0.05));
  estimate->add_option("--preference", est_args.preference, "nodal or edge")->check(CLI::IsMember({"nodal", "edge"}));
  estimate->add_option("--seed", est_args.seed, "Seed of noise and selection draws");
  estimate->add_option("--node-fraction", est_args.node_fraction, "Share of non-slack buses measured")
      ->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--flow-fraction", est_args.flow_fraction, "Share of directed ends measured")
      ->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--out", est_args.out_path, "Estimate file")->required();
  estimate->add_option("--measurements-out", est_args.measurements_out, "Write the measurement set");
  estimate->add_option("--measurements", est_args.measurements, "Replay a stored measurement set");
  est_args.flags.add_to(estimate, false);

  GridArgs grid_args;
  grid_args.network = default_network();
  auto* grid = app.add_subcommand("grid", "Monte Carlo grid and error tables");
  grid->add_option("--network", grid_args.network, "Network file")->capture_default_str();
  grid->add_option("--config", grid_args.config, "Grid config file");
  grid->add_option("--out-dir", grid_args.out_dir, "Output directory")->required();
  grid->add_option("--seed", grid_args.seed, "Master seed (overrides the config)");
  grid_args.flags.add_to(grid, true);

  // Common flags are also accepted after the subcommand name.
  for (auto* sub : {check, solve, estimate, grid}) {
    sub->add_flag("-q,--quiet", quiet, "Suppress summaries");
    sub->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (*check) return cmd_check(check_network, quiet, out, err);
    if (*solve) return cmd_solve(solve_args, quiet, out, err);
    if (*estimate) return cmd_estimate(est_args, quiet, out, err);
    if (*grid) return cmd_grid(grid_args, jobs, quiet, out, err);
  } catch (const FileError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}

}  // namespace dsse::cli
