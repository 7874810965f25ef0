#include "dsse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace dsse {

std::string_view to_string(Normalization n) {
  return n == Normalization::class_mean ? "class_mean" : "per_element";
}

std::optional<Normalization> parse_normalization(std::string_view text) {
  if (text == "class_mean") return Normalization::class_mean;
  if (text == "per_element") return Normalization::per_element;
  return std::nullopt;
}

namespace {

struct ClassErrors {
  double mean = 0.0;
  double max = 0.0;
  double mean_abs_error = 0.0;
};

ClassErrors class_errors(const std::vector<double>& x, const std::vector<double>& m, Normalization normalization) {
  ClassErrors out;
  const auto n = x.size();
  if (n == 0) return out;
  double sum_abs_m = 0.0;
  double sum_abs_e = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sum_abs_m += std::abs(m[k]);
    sum_abs_e += std::abs(x[k] - m[k]);
  }
  out.mean_abs_error = sum_abs_e / static_cast<double>(n);
  if (normalization == Normalization::class_mean) {
    const double scale = sum_abs_m / static_cast<double>(n);
    if (scale > 0.0) {
      for (std::size_t k = 0; k < n; ++k) out.max = std::max(out.max, std::abs(x[k] - m[k]) / scale);
      out.mean = out.mean_abs_error / scale;
    }
    return out;
  }
  // Per-element ratios; entries with |m| at round-off level are skipped.
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(m[k]) <= 1e-12) continue;
    const double e = std::abs(x[k] - m[k]) / std::abs(m[k]);
    sum += e;
    out.max = std::max(out.max, e);
    ++used;
  }
  out.mean = used ? sum / static_cast<double>(used) : 0.0;
  return out;
}

std::uint64_t selection_seed(std::uint64_t seed, int index) {
  auto rng = make_stream(seed, static_cast<std::uint64_t>(index), StreamTag::selection);
  return rng();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double half_width(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

RunErrors compute_errors(const StateVector& estimate, const StateVector& truth, Normalization normalization,
                         double outlier_factor) {
  std::vector<double> xv(truth.v_sq.size());
  std::vector<double> mv(truth.v_sq.size());
  for (std::size_t b = 0; b < truth.v_sq.size(); ++b) {
    xv[b] = std::sqrt(std::max(estimate.v_sq[b], 0.0));
    mv[b] = std::sqrt(truth.v_sq[b]);
  }
  std::vector<double> xf = estimate.flow_p;
  xf.insert(xf.end(), estimate.flow_q.begin(), estimate.flow_q.end());
  std::vector<double> mf = truth.flow_p;
  mf.insert(mf.end(), truth.flow_q.begin(), truth.flow_q.end());

  const auto v = class_errors(xv, mv, normalization);
  const auto f = class_errors(xf, mf, normalization);

  RunErrors out;
  out.mean_err_v = v.mean;
  out.max_err_v = v.max;
  out.mean_err_f = f.mean;
  out.max_err_f = f.max;
  const double limit = outlier_factor * f.mean_abs_error;
  for (std::size_t k = 0; k < xf.size(); ++k) {
    if (std::abs(xf[k] - mf[k]) > limit) ++out.outlier_count;
  }
  return out;
}

RunDetail estimate_from_truth(const NetworkModel& net, const PowerFlowSolution& truth, const ScenarioConfig& cfg,
                              std::uint64_t seed, int index) {
  RunDetail detail;
  detail.truth = truth;
  auto noise_rng = make_stream(seed, static_cast<std::uint64_t>(index), StreamTag::noise);
  const auto pool = synthesize_pool(truth, net, cfg.noise(), noise_rng);
  detail.set = select_set(pool, net, cfg.preference, cfg.effective_fractions(), selection_seed(seed, index),
                          cfg.selection);
  const auto sys = assemble(net, detail.set);
  detail.estimate = solve_wls(sys);
  if (cfg.postfilter) detail.estimate = postfilter_antisymmetry(detail.estimate, net, cfg.postfilter_threshold);
  detail.errors = compute_errors(detail.estimate.state, state_from_solution(truth), cfg.normalization,
                                 cfg.outlier_factor);
  detail.errors.selection_attempts = detail.set.attempts;
  return detail;
}

RunDetail run_one_detailed(const NetworkModel& net, const ScenarioConfig& cfg, int dispatch_index) {
  try {
    auto rng = make_stream(cfg.master_seed, static_cast<std::uint64_t>(dispatch_index), StreamTag::dispatch);
    const Dispatch d = generate_dispatch(net, rng, cfg.dispatch);
    PowerFlowSolution truth =
        cfg.truth == FlowMethod::linear ? solve_linear(net, d) : solve_exact(net, d, cfg.exact);
    if (!truth.converged) {
      throw ConvergenceError("power flow did not converge in " + std::to_string(truth.iterations) + " iterations");
    }
    auto detail = estimate_from_truth(net, truth, cfg, cfg.master_seed, dispatch_index);
    detail.dispatch = d;
    return detail;
  } catch (const RunFailure&) {
    throw;
  } catch (const ObservabilityError& e) {
    throw RunFailure(dispatch_index, true, e.what());
  } catch (const RankDeficiencyError& e) {
    // The weighted factorization disagreed with the selection rank check.
    throw RunFailure(dispatch_index, true, e.what());
  } catch (const Error& e) {
    throw RunFailure(dispatch_index, false, e.what());
  }
}

RunErrors run_one(const NetworkModel& net, const ScenarioConfig& cfg, int dispatch_index) {
  return run_one_detailed(net, cfg, dispatch_index).errors;
}

std::vector<RunOutcome> run_batch(const NetworkModel& net, const ScenarioConfig& cfg, int jobs) {
  if (cfg.dispatch_count < 1) throw Error("dispatch_count must be at least 1");
  const int n = cfg.dispatch_count;
  std::vector<RunOutcome> outcomes(n);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  int error_index = n;
  std::exception_ptr error;

  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        outcomes[i].errors = run_one(net, cfg, i);
      } catch (const RunFailure& f) {
        if (f.observability()) {
          outcomes[i].failure = f.what();
          continue;
        }
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return outcomes;
}

ScenarioStats summarize(const std::vector<RunOutcome>& outcomes) {
  ScenarioStats s;
  std::vector<double> mean_v, mean_f, max_v, max_f, outliers;
  int first_draw = 0;
  for (const auto& o : outcomes) {
    if (!o.errors) {
      ++s.failures;
      continue;
    }
    mean_v.push_back(o.errors->mean_err_v);
    mean_f.push_back(o.errors->mean_err_f);
    max_v.push_back(o.errors->max_err_v);
    max_f.push_back(o.errors->max_err_f);
    outliers.push_back(o.errors->outlier_count);
    if (o.errors->selection_attempts == 1) ++first_draw;
  }
  const auto total = static_cast<int>(outcomes.size());
  if (s.failures * 100 > total) {
    throw Error(std::to_string(s.failures) + " of " + std::to_string(total) +
                " runs failed observability after resampling (limit 1%)");
  }
  s.runs = static_cast<int>(mean_v.size());
  s.avg_of_mean_v = mean_of(mean_v);
  s.avg_of_mean_f = mean_of(mean_f);
  s.avg_of_max_v = mean_of(max_v);
  s.avg_of_max_f = mean_of(max_f);
  s.hw_mean_v = half_width(mean_v);
  s.hw_mean_f = half_width(mean_f);
  s.hw_max_v = half_width(max_v);
  s.hw_max_f = half_width(max_f);
  if (!outliers.empty()) {
    std::sort(outliers.begin(), outliers.end());
    const auto m = outliers.size();
    s.median_outliers = m % 2 ? outliers[m / 2] : 0.5 * (outliers[m / 2 - 1] + outliers[m / 2]);
    s.first_draw_observable = static_cast<double>(first_draw) / static_cast<double>(s.runs);
  }
  return s;
}

ScenarioStats run_scenario(const NetworkModel& net, const ScenarioConfig& cfg, int jobs) {
  return summarize(run_batch(net, cfg, jobs));
}

ScenarioConfig GridConfig::cell(double e_v, double e_i, Preference p) const {
  ScenarioConfig c = base;
  c.e_v = e_v;
  c.e_i = e_i;
  c.preference = p;
  const auto& f = p == Preference::nodal ? nodal_fractions : edge_fractions;
  c.fractions = f ? f : base.fractions;
  return c;
}

const GridCell* GridResult::find(double e_v, double e_i, Preference p) const {
  for (const auto& c : cells) {
    if (c.e_v == e_v && c.e_i == e_i && c.preference == p) return &c;
  }
  return nullptr;
}

bool GridResult::complete() const {
  return std::all_of(cells.begin(), cells.end(), [](const GridCell& c) { return c.stats.has_value(); });
}

GridResult run_grid(const NetworkModel& net, const GridConfig& cfg, int jobs) {
  GridResult result;
  result.config = cfg;
  for (Preference p : cfg.preferences) {
    for (double e_i : cfg.e_i_list) {
      for (double e_v : cfg.e_v_list) {
        GridCell cell{e_v, e_i, p, std::nullopt, {}};
        try {
          cell.stats = run_scenario(net, cfg.cell(e_v, e_i, p), jobs);
        } catch (const Error& e) {
          cell.error = e.what();
        }
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

}  // namespace dsse
