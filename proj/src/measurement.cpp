#include "dsse/measurement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include "dsse/error.hpp"
#include "dsse/estimator.hpp"

namespace dsse {

namespace {

struct KindName {
  MeasurementKind kind;
  std::string_view name;
};

constexpr std::array<KindName, 10> kKindNames{{
    {MeasurementKind::v_sq, "V_SQ"},
    {MeasurementKind::inj_p, "INJ_P"},
    {MeasurementKind::inj_q, "INJ_Q"},
    {MeasurementKind::flow_p, "FLOW_P"},
    {MeasurementKind::flow_q, "FLOW_Q"},
    {MeasurementKind::virtual_drop, "VIRTUAL_DROP"},
    {MeasurementKind::virtual_zero_inj_p, "VIRTUAL_ZERO_INJ_P"},
    {MeasurementKind::virtual_zero_inj_q, "VIRTUAL_ZERO_INJ_Q"},
    {MeasurementKind::virtual_antisym_p, "VIRTUAL_ANTISYM_P"},
    {MeasurementKind::virtual_antisym_q, "VIRTUAL_ANTISYM_Q"},
}};

constexpr double kZeroInjection = 1e-12;

/// Unit-scale error draw; the caller multiplies by the bound e.
double unit_error(Rng& rng, const NoiseConfig& noise) {
  if (noise.distribution == NoiseDistribution::uniform) return uniform(rng, -1.0, 1.0);
  if (noise.gaussian_sigma_factor <= 0.0) return 0.0;
  std::normal_distribution<double> normal(0.0, noise.gaussian_sigma_factor);
  for (;;) {
    const double u = normal(rng);
    if (std::abs(u) <= 1.0) return u;
  }
}

double spread(const NoiseConfig& noise) {
  return noise.distribution == NoiseDistribution::uniform ? 1.0 / std::sqrt(3.0) : noise.gaussian_sigma_factor;
}

Measurement make_physical(MeasurementKind kind, int target, double value, double rel_bound, const NoiseConfig& noise) {
  const double sigma = std::max(rel_bound * std::abs(value) * spread(noise), kSigmaFloor);
  return {kind, target, value, 1.0 / (sigma * sigma), sigma};
}

int sample_count(double fraction, int population) {
  const int k = static_cast<int>(std::ceil(fraction * population - 1e-9));
  return std::clamp(k, 0, population);
}

/// First k entries of a partial Fisher-Yates shuffle, sorted.
std::vector<int> sample_without_replacement(std::vector<int> items, int k, Rng& rng) {
  const auto n = items.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + uniform_index(rng, n - i);
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  std::sort(items.begin(), items.end());
  return items;
}

}  // namespace

std::string_view to_string(MeasurementKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

std::optional<MeasurementKind> parse_measurement_kind(std::string_view text) {
  for (const auto& k : kKindNames) {
    if (k.name == text) return k.kind;
  }
  return std::nullopt;
}

TargetType target_type(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::flow_p:
    case MeasurementKind::flow_q:
      return TargetType::end;
    case MeasurementKind::virtual_drop:
    case MeasurementKind::virtual_antisym_p:
    case MeasurementKind::virtual_antisym_q:
      return TargetType::line;
    default:
      return TargetType::bus;
  }
}

bool is_virtual(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::virtual_drop:
    case MeasurementKind::virtual_zero_inj_p:
    case MeasurementKind::virtual_zero_inj_q:
    case MeasurementKind::virtual_antisym_p:
    case MeasurementKind::virtual_antisym_q:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(NoiseDistribution d) {
  return d == NoiseDistribution::uniform ? "uniform" : "gaussian";
}

void NoiseConfig::validate() const {
  auto in_range = [](double e) { return e >= 0.0 && e <= 0.05; };
  if (!in_range(e_v) || !in_range(e_i)) throw Error("noise bounds must lie in [0, 0.05]");
  if (!(gaussian_sigma_factor >= 0.0)) throw Error("gaussian_sigma_factor must be non-negative");
}

std::string_view to_string(Preference p) {
  return p == Preference::nodal ? "nodal" : "edge";
}

std::optional<Preference> parse_preference(std::string_view text) {
  if (text == "nodal") return Preference::nodal;
  if (text == "edge") return Preference::edge;
  return std::nullopt;
}

Fractions default_fractions(Preference p) {
  return p == Preference::nodal ? Fractions{0.60, 0.80} : Fractions{0.30, 0.90};
}

MeasurementPool synthesize_pool(const PowerFlowSolution& truth, const NetworkModel& net, const NoiseConfig& noise,
                                Rng& rng) {
  noise.validate();
  if (!truth.converged) throw Error("cannot synthesize measurements from a non-converged solution");

  const int nb = net.bus_count();
  const int ne = net.end_count();
  const double power_bound = (1.0 + noise.e_v) * (1.0 + noise.e_i) - 1.0;
  const double vsq_bound = (1.0 + noise.e_v) * (1.0 + noise.e_v) - 1.0;

  MeasurementPool pool;
  pool.noise = noise;
  pool.v_sq.resize(nb);
  pool.inj_p.resize(nb);
  pool.inj_q.resize(nb);
  pool.flow_p.resize(ne);
  pool.flow_q.resize(ne);
  pool.true_inj_p.assign(nb, 0.0);
  pool.true_inj_q.assign(nb, 0.0);

  auto power_factor = [&] {
    const double ev = noise.e_v * unit_error(rng, noise);
    const double ei = noise.e_i * unit_error(rng, noise);
    return (1.0 + ev) * (1.0 + ei);
  };

  for (int b : net.rooted_order()) {
    const double v = std::sqrt(truth.v_sq[b]) * (1.0 + noise.e_v * unit_error(rng, noise));
    pool.v_sq[b] = make_physical(MeasurementKind::v_sq, b, v * v, vsq_bound, noise);

    const double p = truth.injection_p(net, b);
    const double q = truth.injection_q(net, b);
    pool.true_inj_p[b] = p;
    pool.true_inj_q[b] = q;
    pool.inj_p[b] = make_physical(MeasurementKind::inj_p, b, p * power_factor(), power_bound, noise);
    pool.inj_q[b] = make_physical(MeasurementKind::inj_q, b, q * power_factor(), power_bound, noise);
  }
  for (int e = 0; e < ne; ++e) {
    pool.flow_p[e] = make_physical(MeasurementKind::flow_p, e, truth.flow_p[e] * power_factor(), power_bound, noise);
    pool.flow_q[e] = make_physical(MeasurementKind::flow_q, e, truth.flow_q[e] * power_factor(), power_bound, noise);
  }
  return pool;
}

MeasurementSet draw_set(const MeasurementPool& pool, const NetworkModel& net, Preference preference,
                        Fractions fractions, std::uint64_t seed, int attempt, const SelectionOptions& opt) {
  if (!(fractions.node >= 0.0 && fractions.node <= 1.0 && fractions.flow >= 0.0 && fractions.flow <= 1.0)) {
    throw Error("measurement fractions must lie in [0, 1]");
  }
  if (static_cast<int>(pool.v_sq.size()) != net.bus_count() || static_cast<int>(pool.flow_p.size()) != net.end_count()) {
    throw Error("measurement pool does not match the network");
  }
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));

  std::vector<int> candidates;
  for (int b : net.rooted_order()) {
    if (b != net.slack()) candidates.push_back(net.rooted_position(b));
  }
  const int bus_k = sample_count(fractions.node, static_cast<int>(candidates.size()));
  const auto bus_positions = sample_without_replacement(std::move(candidates), bus_k, rng);

  std::vector<int> ends(net.end_count());
  std::iota(ends.begin(), ends.end(), 0);
  const int end_k = sample_count(fractions.flow, net.end_count());
  const auto chosen_ends = sample_without_replacement(std::move(ends), end_k, rng);

  MeasurementSet set;
  set.preference = preference;
  set.fractions = fractions;
  set.seed = seed;
  set.attempts = attempt + 1;
  set.sampled_buses = bus_k;
  set.sampled_ends = end_k;
  auto& m = set.measurements;

  m.push_back(pool.v_sq[net.slack()]);
  for (int b : bus_positions) {
    const int bus = net.rooted_order()[b];
    m.push_back(pool.v_sq[bus]);
    m.push_back(pool.inj_p[bus]);
    m.push_back(pool.inj_q[bus]);
  }
  for (int e : chosen_ends) {
    m.push_back(pool.flow_p[e]);
    m.push_back(pool.flow_q[e]);
  }

  std::vector<double> ws;
  for (const auto& x : m) ws.push_back(x.weight);
  std::nth_element(ws.begin(), ws.begin() + ws.size() / 2, ws.end());
  const double ref = ws.empty() ? 1.0 : ws[ws.size() / 2];
  const double virtual_weight = opt.virtual_weight_factor * (ref > 0.0 ? ref : 1.0);
  auto add_virtual = [&](MeasurementKind kind, int target) { m.push_back({kind, target, 0.0, virtual_weight, 0.0}); };

  for (int b : net.rooted_order()) {
    if (b == net.slack()) continue;
    add_virtual(MeasurementKind::virtual_drop, net.parent_line(b));
  }
  for (int b : net.rooted_order()) {
    if (b == net.slack()) continue;
    if (std::abs(pool.true_inj_p[b]) <= kZeroInjection) add_virtual(MeasurementKind::virtual_zero_inj_p, b);
    if (std::abs(pool.true_inj_q[b]) <= kZeroInjection) add_virtual(MeasurementKind::virtual_zero_inj_q, b);
  }
  if (opt.antisymmetry_rows) {
    for (int b : net.rooted_order()) {
      if (b == net.slack()) continue;
      add_virtual(MeasurementKind::virtual_antisym_p, net.parent_line(b));
      add_virtual(MeasurementKind::virtual_antisym_q, net.parent_line(b));
    }
  }
  return set;
}

MeasurementSet select_set(const MeasurementPool& pool, const NetworkModel& net, Preference preference,
                          Fractions fractions, std::uint64_t seed, const SelectionOptions& opt) {
  const int dim = make_layout(net).dim();
  int best_rank = 0;
  int best_structural = -1;
  std::optional<MeasurementSet> best_screened;
  for (int attempt = 0; attempt <= std::max(opt.max_resamples, 0); ++attempt) {
    auto set = draw_set(pool, net, preference, fractions, seed, attempt, opt);
    const auto sys = assemble(net, set);
    // Structural rank bounds the numerical rank from above, so a draw that
    // fails it can skip the factorization.
    const int structural = structural_rank(sys.H);
    if (structural < dim) {
      if (structural > best_structural) {
        best_structural = structural;
        best_screened = std::move(set);
      }
      continue;
    }
    const int rank = numerical_rank(sys.H);
    if (rank == dim) return set;
    best_rank = std::max(best_rank, rank);
  }
  if (best_screened && best_structural > best_rank) {
    best_rank = std::max(best_rank, check_observability(net, *best_screened).rank);
  }
  throw ObservabilityError(best_rank, dim, std::max(opt.max_resamples, 0) + 1);
}

ObservabilityReport check_observability(const NetworkModel& net, std::span<const Measurement> measurements) {
  const auto sys = assemble(net, measurements);
  ObservabilityReport report;
  report.state_dim = sys.layout.dim();
  report.rank = sys.H.rows() == 0 ? 0 : numerical_rank(sys.H);
  report.observable = report.rank == report.state_dim;
  return report;
}

ObservabilityReport check_observability(const NetworkModel& net, const MeasurementSet& set) {
  return check_observability(net, std::span<const Measurement>(set.measurements));
}

}  // namespace dsse
