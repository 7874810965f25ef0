// End-to-end acceptance run on the 61-bus fixture. Prints one PASS/FAIL line
// per criterion and exits nonzero if any criterion fails.
//
// Usage: dsse_acceptance [output dir for the full grid tables]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "dsse/harness.hpp"

using namespace dsse;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<double> kLevels{0.001, 0.003, 0.006, 0.01};
const std::vector<TableStat> kStats{TableStat::mean_v, TableStat::mean_f, TableStat::max_v, TableStat::max_f};
const std::vector<Preference> kPrefs{Preference::nodal, Preference::edge};

const ScenarioStats& cell(const GridResult& r, double e_v, double e_i, Preference p) {
  const auto* c = r.find(e_v, e_i, p);
  if (!c || !c->stats) throw Error("grid cell missing: " + fmt("%g/%g %s", e_v, e_i, std::string(to_string(p)).c_str()));
  return *c->stats;
}

GridConfig grid(int dispatches) {
  GridConfig g;
  g.base.dispatch_count = dispatches;
  g.base.master_seed = 1;
  return g;
}

bool same_tables(const GridResult& a, const GridResult& b) {
  for (auto s : kStats) {
    for (auto p : kPrefs) {
      if (render_table_csv(a, s, p) != render_table_csv(b, s, p)) return false;
    }
  }
  return true;
}

double max_state_gap(const StateVector& a, const StateVector& b) {
  double g = 0.0;
  for (std::size_t k = 0; k < a.v_sq.size(); ++k) g = std::max(g, std::abs(a.v_sq[k] - b.v_sq[k]));
  for (std::size_t k = 0; k < a.flow_p.size(); ++k) {
    g = std::max({g, std::abs(a.flow_p[k] - b.flow_p[k]), std::abs(a.flow_q[k] - b.flow_q[k])});
  }
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : "acceptance_grid";
  const NetworkModel net = load_network(DSSE_FIXTURE);
  const int jobs = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  std::printf("fixture: %d buses, %d lines; %d worker thread(s)\n", net.bus_count(), net.line_count(), jobs);

  // 1. Zero noise, full set, linear truth.
  {
    const auto t0 = Clock::now();
    ScenarioConfig cfg;
    cfg.e_v = cfg.e_i = 0.0;
    cfg.fractions = Fractions{1.0, 1.0};
    cfg.truth = FlowMethod::linear;
    cfg.postfilter = false;
    double worst = 0.0;
    const int n = 10;
    for (int i = 0; i < n; ++i) {
      const auto d = run_one_detailed(net, cfg, i);
      worst = std::max(worst, max_state_gap(d.estimate.state, state_from_solution(d.truth)));
    }
    const double per_run = seconds_since(t0) / n;
    report(1, worst < 1e-8 && per_run < 1.0, "consistency",
           fmt("max state error %.2e over %d dispatches (< 1e-08), %.3f s per estimate (< 1 s)", worst, n, per_run));
  }

  // 2. Linear vs exact voltage magnitudes.
  {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      auto rng = make_stream(1, static_cast<std::uint64_t>(i), StreamTag::dispatch);
      const auto d = generate_dispatch(net, rng, {});
      const auto e = solve_exact(net, d);
      const auto l = solve_linear(net, d);
      for (int b = 0; b < net.bus_count(); ++b) worst = std::max(worst, std::abs(std::sqrt(e.v_sq[b]) - std::sqrt(l.v_sq[b])));
    }
    const double dt = seconds_since(t0);
    report(2, worst < 0.01 && dt < 10.0, "linearization quality",
           fmt("max |V| gap %.4f pu over 100 dispatches (< 0.01), %.2f s (< 10 s)", worst, dt));
  }

  // Reduced grid twice for 10 and 11; the second run uses a different
  // worker count (4 threads even on a single core).
  const auto t_reduced = Clock::now();
  const auto reduced = run_grid(net, grid(200), jobs);
  const double reduced_s = seconds_since(t_reduced);
  const int other_jobs = jobs == 1 ? 4 : 1;
  const auto reduced_other = run_grid(net, grid(200), other_jobs);
  std::printf("reduced grid: %.1f s with %d worker(s)\n", reduced_s, jobs);

  const auto t_full = Clock::now();
  const auto full = run_grid(net, grid(1500), jobs);
  const double full_s = seconds_since(t_full);
  std::printf("full grid: %.1f s with %d worker(s)\n", full_s, jobs);
  write_grid(full, out_dir);
  std::printf("full grid tables written to %s\n", out_dir.string().c_str());
  if (!full.complete()) {
    for (const auto& c : full.cells) {
      if (!c.stats) std::printf("failed cell %g/%g %s: %s\n", c.e_v, c.e_i, std::string(to_string(c.preference)).c_str(), c.error.c_str());
    }
  }

  auto guarded = [&](int id, const std::string& title, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      report(id, false, title, e.what());
    }
  };

  // 3. Voltage error level at 0.1%/0.1% and proportionality to e_v.
  guarded(3, "voltage error level and linearity", [&] {
    const double anchor = cell(full, 0.001, 0.001, Preference::nodal).avg_of_mean_v;
    std::vector<double> ratios;
    for (double e_i : kLevels) {
      for (double e_v : kLevels) ratios.push_back(cell(full, e_v, e_i, Preference::nodal).avg_of_mean_v / e_v);
    }
    double sum = 0.0;
    for (double r : ratios) sum += r;
    const double mean = sum / static_cast<double>(ratios.size());
    double dev = 0.0;
    for (double r : ratios) dev = std::max(dev, std::abs(r / mean - 1.0));
    const bool level = anchor >= 0.0002 && anchor <= 0.0008;
    report(3, level && dev <= 0.25, "voltage error level and linearity",
           fmt("nodal 0.1%%/0.1%% avg_of_mean_v %.4f%% (in [0.02%%, 0.08%%]: %s); ratio to e_v %.3f, max deviation "
               "%.1f%% (<= 25%%: %s)",
               anchor * 100, level ? "yes" : "no", mean, dev * 100, dev <= 0.25 ? "yes" : "no"));
  });

  // 4. Insensitivity of voltage errors to e_i.
  guarded(4, "voltage error insensitive to e_i", [&] {
    double worst = 0.0;
    std::string where;
    for (auto p : kPrefs) {
      for (double e_v : kLevels) {
        double lo = 1e300, hi = 0.0, sum = 0.0;
        for (double e_i : kLevels) {
          const double v = cell(full, e_v, e_i, p).avg_of_mean_v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
          sum += v;
        }
        const double spread = (hi - lo) / (sum / 4.0);
        if (spread > worst) {
          worst = spread;
          where = fmt("%s e_v=%g%%", std::string(to_string(p)).c_str(), e_v * 100);
        }
      }
    }
    report(4, worst < 0.15, "voltage error insensitive to e_i",
           fmt("largest relative spread %.1f%% at %s (< 15%%)", worst * 100, where.c_str()));
  });

  // 5. Edge preference lowers the maximum flow error.
  guarded(5, "edge preference lowers max flow error", [&] {
    int wins = 0;
    for (double e_i : kLevels) {
      for (double e_v : kLevels) {
        wins += cell(full, e_v, e_i, Preference::edge).avg_of_max_f < cell(full, e_v, e_i, Preference::nodal).avg_of_max_f;
      }
    }
    const auto& e = cell(full, 0.001, 0.001, Preference::edge);
    const auto& n = cell(full, 0.001, 0.001, Preference::nodal);
    report(5, wins >= 14, "edge preference lowers max flow error",
           fmt("%d/16 cells (>= 14); at 0.1%%/0.1%% edge %.3f%% vs nodal %.3f%%", wins, e.avg_of_max_f * 100,
               n.avg_of_max_f * 100));
  });

  // 6. Voltage maxima at e_v = 1%.
  guarded(6, "voltage maximum error bound", [&] {
    double worst = 0.0;
    for (auto p : kPrefs) {
      for (double e_i : kLevels) worst = std::max(worst, cell(full, 0.01, e_i, p).avg_of_max_v);
    }
    report(6, worst <= 0.02, "voltage maximum error bound", fmt("largest avg_of_max_v at e_v=1%% is %.4f%% (<= 2%%)", worst * 100));
  });

  // 7. Flow errors grow with e_i.
  guarded(7, "flow error monotone in e_i", [&] {
    std::string detail;
    bool ok = true;
    for (auto p : kPrefs) {
      int inversions = 0;
      for (double e_v : kLevels) {
        for (std::size_t k = 1; k < kLevels.size(); ++k) {
          inversions += cell(full, e_v, kLevels[k], p).avg_of_mean_f < cell(full, e_v, kLevels[k - 1], p).avg_of_mean_f;
        }
      }
      ok = ok && inversions <= 1;
      detail += fmt("%s%s %d inversion(s)", detail.empty() ? "" : ", ", std::string(to_string(p)).c_str(), inversions);
    }
    report(7, ok, "flow error monotone in e_i", detail + " (<= 1 per table)");
  });

  // 8. First-draw observability, over every run of the full grid.
  guarded(8, "first-draw observability", [&] {
    std::string detail;
    bool ok = true;
    for (auto p : kPrefs) {
      double observable = 0.0;
      double runs = 0.0;
      for (double e_i : kLevels) {
        for (double e_v : kLevels) {
          const auto& s = cell(full, e_v, e_i, p);
          observable += s.first_draw_observable * s.runs;
          runs += s.runs;
        }
      }
      const double share = observable / runs;
      ok = ok && share >= 0.95;
      detail += fmt("%s%s %.1f%% of %.0f draws", detail.empty() ? "" : ", ", std::string(to_string(p)).c_str(),
                    share * 100, runs);
    }
    report(8, ok, "first-draw observability", detail + " (>= 95%)");
  });

  // 9. Outliers and the post-filter, at 1%/1%.
  guarded(9, "outlier count and post-filter", [&] {
    std::string detail;
    bool ok = true;
    for (auto p : kPrefs) {
      const auto& raw = cell(full, 0.01, 0.01, p);
      auto cfg = full.config.cell(0.01, 0.01, p);
      cfg.postfilter = true;
      const auto filtered = run_scenario(net, cfg, jobs);
      const bool median_ok = raw.median_outliers <= 2.0;
      const bool filter_ok = filtered.avg_of_max_f < raw.avg_of_max_f && filtered.avg_of_mean_v <= raw.avg_of_mean_v;
      ok = ok && median_ok && filter_ok;
      detail += fmt("%s%s: median outliers %.1f (<= 2), avg_of_max_f %.3f%% filtered vs %.3f%% raw, avg_of_mean_v "
                    "%.4f%% vs %.4f%%",
                    detail.empty() ? "" : "; ", std::string(to_string(p)).c_str(), raw.median_outliers,
                    filtered.avg_of_max_f * 100, raw.avg_of_max_f * 100, filtered.avg_of_mean_v * 100,
                    raw.avg_of_mean_v * 100);
    }
    report(9, ok, "outlier count and post-filter", detail);
  });

  // 10. Runtime envelope.
  report(10, reduced_s < 300.0 && full_s < 2400.0, "runtime envelope",
         fmt("reduced grid %.1f s (< 300 s), full grid %.1f s (< 2400 s) on %d worker(s)", reduced_s, full_s, jobs));

  // 11. Determinism across worker counts.
  report(11, reduced.complete() && same_tables(reduced, reduced_other) &&
                 render_sidecar(reduced) == render_sidecar(reduced_other),
         "determinism", fmt("reduced grid tables and sidecar byte-identical for %d and %d worker(s)", jobs, other_jobs));

  std::printf("%d criterion/criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
