#include "dsse/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseQR>
#include <nlohmann/json.hpp>

#include "dsse/error.hpp"

namespace dsse {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

void check_target(const NetworkModel& net, const Measurement& m, std::size_t index) {
  int limit = 0;
  switch (target_type(m.kind)) {
    case TargetType::bus:
      limit = net.bus_count();
      break;
    case TargetType::line:
      limit = net.line_count();
      break;
    case TargetType::end:
      limit = net.end_count();
      break;
  }
  if (m.target < 0 || m.target >= limit) {
    throw ReferenceError("measurement #" + std::to_string(index) + " (" + std::string(to_string(m.kind)) +
                         ") refers to unknown element " + std::to_string(m.target));
  }
}

// Scale every column to unit norm so the pivot threshold is relative to
// each state's own scale rather than to the heaviest weighted column.
Eigen::VectorXd equilibrate(SpMat& a) {
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(a.cols());
  for (int c = 0; c < a.outerSize(); ++c) {
    double sq = 0.0;
    for (SpMat::InnerIterator it(a, c); it; ++it) sq += it.value() * it.value();
    if (sq > 0.0) scale[c] = 1.0 / std::sqrt(sq);
  }
  a = a * scale.asDiagonal();
  a.makeCompressed();
  return scale;
}

double rank_threshold(const SpMat& a) {
  return static_cast<double>(a.cols()) * std::numeric_limits<double>::epsilon();
}

bool is_injection_row(MeasurementKind kind, bool reactive) {
  if (reactive) return kind == MeasurementKind::inj_q || kind == MeasurementKind::virtual_zero_inj_q;
  return kind == MeasurementKind::inj_p || kind == MeasurementKind::virtual_zero_inj_p;
}

}  // namespace

StateLayout make_layout(const NetworkModel& net) {
  StateLayout layout;
  layout.bus_count = net.bus_count();
  layout.end_count = net.end_count();
  layout.bus_column.resize(net.bus_count());
  for (int b = 0; b < net.bus_count(); ++b) layout.bus_column[b] = net.rooted_position(b);
  return layout;
}

StateVector state_from_solution(const PowerFlowSolution& s) {
  return {s.v_sq, s.flow_p, s.flow_q};
}

Eigen::VectorXd to_flat(const StateLayout& layout, const StateVector& x) {
  Eigen::VectorXd flat(layout.dim());
  for (int b = 0; b < layout.bus_count; ++b) flat[layout.col_v(b)] = x.v_sq[b];
  for (int e = 0; e < layout.end_count; ++e) {
    flat[layout.col_p(e)] = x.flow_p[e];
    flat[layout.col_q(e)] = x.flow_q[e];
  }
  return flat;
}

StateVector from_flat(const StateLayout& layout, const Eigen::VectorXd& flat) {
  StateVector x;
  x.v_sq.resize(layout.bus_count);
  x.flow_p.resize(layout.end_count);
  x.flow_q.resize(layout.end_count);
  for (int b = 0; b < layout.bus_count; ++b) x.v_sq[b] = flat[layout.col_v(b)];
  for (int e = 0; e < layout.end_count; ++e) {
    x.flow_p[e] = flat[layout.col_p(e)];
    x.flow_q[e] = flat[layout.col_q(e)];
  }
  return x;
}

DesignSystem assemble(const NetworkModel& net, std::span<const Measurement> measurements) {
  DesignSystem sys;
  sys.layout = make_layout(net);
  const auto& L = sys.layout;

  std::vector<Triplet> entries;
  std::vector<double> z;
  std::vector<double> w;
  entries.reserve(measurements.size() * 3);

  auto add_row = [&](const Measurement& m, int index, bool mirrored) {
    sys.rows.push_back({m.kind, m.target, index, mirrored});
    z.push_back(m.value);
    w.push_back(m.weight);
    return static_cast<int>(z.size()) - 1;
  };

  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const Measurement& m = measurements[i];
    check_target(net, m, i);
    const int idx = static_cast<int>(i);
    switch (m.kind) {
      case MeasurementKind::v_sq: {
        const int r = add_row(m, idx, false);
        entries.emplace_back(r, L.col_v(m.target), 1.0);
        break;
      }
      case MeasurementKind::inj_p:
      case MeasurementKind::virtual_zero_inj_p: {
        const int r = add_row(m, idx, false);
        for (int e : net.ends_leaving(m.target)) entries.emplace_back(r, L.col_p(e), 1.0);
        break;
      }
      case MeasurementKind::inj_q:
      case MeasurementKind::virtual_zero_inj_q: {
        const int r = add_row(m, idx, false);
        for (int e : net.ends_leaving(m.target)) entries.emplace_back(r, L.col_q(e), 1.0);
        break;
      }
      case MeasurementKind::flow_p: {
        const int r1 = add_row(m, idx, false);
        entries.emplace_back(r1, L.col_p(m.target), 1.0);
        const int r2 = add_row(m, idx, true);
        entries.emplace_back(r2, L.col_p(NetworkModel::opposite_end(m.target)), -1.0);
        break;
      }
      case MeasurementKind::flow_q: {
        const int r1 = add_row(m, idx, false);
        entries.emplace_back(r1, L.col_q(m.target), 1.0);
        const int r2 = add_row(m, idx, true);
        entries.emplace_back(r2, L.col_q(NetworkModel::opposite_end(m.target)), -1.0);
        break;
      }
      case MeasurementKind::virtual_drop: {
        const Line& line = net.lines()[m.target];
        const int fwd = net.forward_end(m.target);
        const int r = add_row(m, idx, false);
        entries.emplace_back(r, L.col_v(net.upstream(m.target)), -1.0);
        entries.emplace_back(r, L.col_v(net.downstream(m.target)), 1.0);
        entries.emplace_back(r, L.col_p(fwd), 2.0 * line.r);
        entries.emplace_back(r, L.col_q(fwd), 2.0 * line.x);
        break;
      }
      case MeasurementKind::virtual_antisym_p: {
        const int r = add_row(m, idx, false);
        entries.emplace_back(r, L.col_p(net.forward_end(m.target)), 1.0);
        entries.emplace_back(r, L.col_p(net.reverse_end(m.target)), 1.0);
        break;
      }
      case MeasurementKind::virtual_antisym_q: {
        const int r = add_row(m, idx, false);
        entries.emplace_back(r, L.col_q(net.forward_end(m.target)), 1.0);
        entries.emplace_back(r, L.col_q(net.reverse_end(m.target)), 1.0);
        break;
      }
    }
  }

  sys.H.resize(static_cast<Eigen::Index>(z.size()), L.dim());
  sys.H.setFromTriplets(entries.begin(), entries.end());
  sys.H.makeCompressed();
  sys.z = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  sys.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return sys;
}

DesignSystem assemble(const NetworkModel& net, const MeasurementSet& set) {
  return assemble(net, std::span<const Measurement>(set.measurements));
}

Eigen::VectorXd evaluate(const NetworkModel& net, std::span<const RowTag> rows, const StateVector& x) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RowTag& t = rows[i];
    double value = 0.0;
    switch (t.kind) {
      case MeasurementKind::v_sq:
        value = x.v_sq[t.target];
        break;
      case MeasurementKind::inj_p:
      case MeasurementKind::virtual_zero_inj_p:
        for (int e : net.ends_leaving(t.target)) value += x.flow_p[e];
        break;
      case MeasurementKind::inj_q:
      case MeasurementKind::virtual_zero_inj_q:
        for (int e : net.ends_leaving(t.target)) value += x.flow_q[e];
        break;
      case MeasurementKind::flow_p:
        value = t.mirrored ? -x.flow_p[NetworkModel::opposite_end(t.target)] : x.flow_p[t.target];
        break;
      case MeasurementKind::flow_q:
        value = t.mirrored ? -x.flow_q[NetworkModel::opposite_end(t.target)] : x.flow_q[t.target];
        break;
      case MeasurementKind::virtual_drop: {
        const Line& line = net.lines()[t.target];
        const int fwd = net.forward_end(t.target);
        value = x.v_sq[net.downstream(t.target)] - x.v_sq[net.upstream(t.target)] + 2.0 * line.r * x.flow_p[fwd] +
                2.0 * line.x * x.flow_q[fwd];
        break;
      }
      case MeasurementKind::virtual_antisym_p:
        value = x.flow_p[net.forward_end(t.target)] + x.flow_p[net.reverse_end(t.target)];
        break;
      case MeasurementKind::virtual_antisym_q:
        value = x.flow_q[net.forward_end(t.target)] + x.flow_q[net.reverse_end(t.target)];
        break;
    }
    h[static_cast<Eigen::Index>(i)] = value;
  }
  return h;
}

int numerical_rank(const Eigen::SparseMatrix<double>& a) {
  if (a.cols() == 0) return 0;
  SpMat m = a;
  if (m.rows() < m.cols()) m.conservativeResize(m.cols(), m.cols());
  equilibrate(m);
  Eigen::SparseQR<SpMat, Eigen::COLAMDOrdering<int>> qr;
  qr.setPivotThreshold(rank_threshold(m));
  qr.compute(m);
  if (qr.info() != Eigen::Success) return 0;
  return static_cast<int>(qr.rank());
}

int structural_rank(const Eigen::SparseMatrix<double>& a) {
  // Kuhn's augmenting paths; rows are matched to columns.
  const int cols = static_cast<int>(a.cols());
  std::vector<int> row_match(a.rows(), -1);
  std::vector<int> visited(a.rows(), -1);
  std::vector<std::pair<int, SpMat::InnerIterator>> stack;
  int rank = 0;
  for (int c0 = 0; c0 < cols; ++c0) {
    // Iterative DFS: each frame is a column and its position in the column.
    std::vector<int> path_cols{c0};
    stack.clear();
    stack.emplace_back(c0, SpMat::InnerIterator(a, c0));
    bool found = false;
    while (!stack.empty() && !found) {
      auto& [c, it] = stack.back();
      while (it && (it.value() == 0.0 || visited[it.row()] == c0)) ++it;
      if (!it) {
        stack.pop_back();
        continue;
      }
      const int r = static_cast<int>(it.row());
      visited[r] = c0;
      if (row_match[r] < 0) {
        // Flip the path: each column on the stack takes the row it points at.
        for (auto& frame : stack) {
          row_match[frame.second.row()] = frame.first;
        }
        found = true;
      } else {
        const int next = row_match[r];
        stack.emplace_back(next, SpMat::InnerIterator(a, next));
      }
    }
    if (found) ++rank;
  }
  return rank;
}

StateEstimate solve_wls(const DesignSystem& sys) {
  const int n = sys.layout.dim();
  if (!sys.z.allFinite() || !sys.w.allFinite()) throw NumericError("non-finite measurement value or weight");
  for (int c = 0; c < sys.H.outerSize(); ++c) {
    for (SpMat::InnerIterator it(sys.H, c); it; ++it) {
      if (!std::isfinite(it.value())) throw NumericError("non-finite design matrix entry");
    }
  }
  if ((sys.w.array() < 0.0).any()) throw NumericError("negative measurement weight");
  if (sys.H.rows() < n) throw RankDeficiencyError(static_cast<int>(sys.H.rows()), n);

  const Eigen::VectorXd sqrt_w = sys.w.cwiseSqrt();
  SpMat a = sqrt_w.asDiagonal() * sys.H;
  const Eigen::VectorXd scale = equilibrate(a);
  const Eigen::VectorXd b = sqrt_w.cwiseProduct(sys.z);

  Eigen::SparseQR<SpMat, Eigen::COLAMDOrdering<int>> qr;
  qr.setPivotThreshold(rank_threshold(a));
  qr.compute(a);
  if (qr.info() != Eigen::Success) throw NumericError("sparse QR factorization failed");
  const int rank = static_cast<int>(qr.rank());
  if (rank < n) throw RankDeficiencyError(rank, n);

  Eigen::VectorXd y = qr.solve(b);
  if (qr.info() != Eigen::Success || !y.allFinite()) throw NumericError("least-squares solve failed");
  // One refinement step against the scaled system.
  const Eigen::VectorXd dy = qr.solve(Eigen::VectorXd(b - a * y));
  if (dy.allFinite()) y += dy;
  const Eigen::VectorXd x = scale.cwiseProduct(y);

  StateEstimate est;
  est.state = from_flat(sys.layout, x);
  est.residuals = sys.z - sys.H * x;
  est.weighted_cost = sys.w.dot(est.residuals.cwiseAbs2());
  est.rank = rank;
  est.rows = sys.rows;
  est.z = sys.z;
  est.w = sys.w;
  return est;
}

namespace {

double mean_abs(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

}  // namespace

int count_antisymmetry_violations(const StateVector& x, const NetworkModel& net, double threshold) {
  int count = 0;
  for (const auto* flows : {&x.flow_p, &x.flow_q}) {
    const double bound = threshold * mean_abs(*flows);
    for (int k = 0; k < net.line_count(); ++k) {
      const double mismatch = std::abs((*flows)[net.forward_end(k)] + (*flows)[net.reverse_end(k)]);
      if (mismatch > bound) ++count;
    }
  }
  return count;
}

StateEstimate postfilter_antisymmetry(const StateEstimate& est, const NetworkModel& net, double threshold) {
  StateEstimate out = est;
  out.postfiltered = true;
  if (std::isinf(threshold) && threshold > 0.0) return out;

  const auto h = evaluate(net, est.rows, est.state);
  const Eigen::VectorXd residuals = est.z - h;

  // Worst nodal balance residual per bus and component; +inf where no
  // balance row exists.
  constexpr double kNone = std::numeric_limits<double>::infinity();
  std::vector<double> worst_p(net.bus_count(), -1.0);
  std::vector<double> worst_q(net.bus_count(), -1.0);
  for (std::size_t i = 0; i < est.rows.size(); ++i) {
    const auto& t = est.rows[i];
    const double r = std::abs(residuals[static_cast<Eigen::Index>(i)]);
    if (is_injection_row(t.kind, false)) worst_p[t.target] = std::max(worst_p[t.target], r);
    if (is_injection_row(t.kind, true)) worst_q[t.target] = std::max(worst_q[t.target], r);
  }
  for (auto* v : {&worst_p, &worst_q}) {
    for (double& r : *v) {
      if (r < 0.0) r = kNone;
    }
  }

  auto repair = [&](std::vector<double>& flows, const std::vector<double>& worst) {
    const double bound = threshold * mean_abs(flows);
    for (int k = 0; k < net.line_count(); ++k) {
      const int fwd = net.forward_end(k);
      const int rev = net.reverse_end(k);
      if (!(std::abs(flows[fwd] + flows[rev]) > bound)) continue;
      const double score_fwd = worst[net.upstream(k)];
      const double score_rev = worst[net.downstream(k)];
      if (score_fwd > score_rev) {
        flows[fwd] = -flows[rev];
      } else {
        flows[rev] = -flows[fwd];
      }
    }
  };
  repair(out.state.flow_p, worst_p);
  repair(out.state.flow_q, worst_q);

  out.residuals = est.z - evaluate(net, out.rows, out.state);
  out.weighted_cost = out.w.dot(out.residuals.cwiseAbs2());
  return out;
}

std::string dump_estimate(const NetworkModel& net, const StateEstimate& est) {
  using nlohmann::json;
  json v_sq = json::object();
  for (int b : net.rooted_order()) v_sq[net.buses()[b].id] = est.state.v_sq[b];
  json flows = json::object();
  for (int k = 0; k < net.line_count(); ++k) {
    const Line& line = net.lines()[k];
    const int fwd = net.end_from(k, line.from);
    const int rev = net.end_from(k, line.to);
    flows[line.id] = {{"forward", json::array({est.state.flow_p[fwd], est.state.flow_q[fwd]})},
                      {"reverse", json::array({est.state.flow_p[rev], est.state.flow_q[rev]})}};
  }
  json residuals = json::array();
  for (std::size_t i = 0; i < est.rows.size(); ++i) {
    const auto& t = est.rows[i];
    residuals.push_back({{"kind", std::string(to_string(t.kind))},
                         {"target", target_label(net, t.kind, t.target)},
                         {"mirrored", t.mirrored},
                         {"residual", est.residuals[static_cast<Eigen::Index>(i)]}});
  }
  json doc;
  doc["v_sq"] = std::move(v_sq);
  doc["flows"] = std::move(flows);
  doc["method"] = "estimate";
  doc["converged"] = true;
  doc["iterations"] = 1;
  doc["residuals"] = std::move(residuals);
  doc["weighted_cost"] = est.weighted_cost;
  doc["rank"] = est.rank;
  doc["postfiltered"] = est.postfiltered;
  return doc.dump(2) + "\n";
}

}  // namespace dsse
