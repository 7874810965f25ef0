#pragma once

// Shared fixtures and independent oracles for the unit tests. Only the state
// layout is shared with the library; assembly and solvers are not used.

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "dsse/estimator.hpp"
#include "dsse/measurement.hpp"
#include "dsse/network.hpp"
#include "dsse/powerflow.hpp"

#ifndef DSSE_FIXTURE
#define DSSE_FIXTURE "fixtures/ieee123_balanced.json"
#endif

namespace testing {

inline dsse::NetworkModel fixture() { return dsse::load_network(DSSE_FIXTURE); }

/// slack 0 -(0.01, 0.02)- 1 -(0.01, 0.01)- 2, load (0.1, 0.05) pu at bus 2.
inline dsse::NetworkModel three_bus_chain() {
  return dsse::NetworkModel(dsse::network_from_per_unit(
      {{"0", dsse::BusKind::slack}, {"1", dsse::BusKind::pq}, {"2", dsse::BusKind::pq, 0.1, 0.05}},
      {{"a", "0", "1", 0.01, 0.02}, {"b", "1", "2", 0.01, 0.01}}));
}

inline dsse::Dispatch three_bus_dispatch() { return {{0.0, 0.0, -0.1}, {0.0, 0.0, -0.05}}; }

/// Random radial feeder: bus k > 0 hangs off a random earlier bus. Ids and
/// line order are shuffled so nothing relies on file order.
inline dsse::NetworkData random_feeder(std::uint64_t seed, int buses) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<dsse::PerUnitBus> b;
  std::vector<dsse::PerUnitLine> l;
  for (int k = 0; k < buses; ++k) {
    dsse::PerUnitBus bus{std::to_string(k), k == 0 ? dsse::BusKind::slack : dsse::BusKind::pq};
    if (k > 0) {
      bus.load_p = 0.002 + 0.02 * u(rng);
      bus.load_q = 0.5 * bus.load_p * u(rng);
      bus.dg_p = u(rng) < 0.6 ? 0.03 * u(rng) : 0.0;
      const int parent = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
      l.push_back({"L" + std::to_string(k), std::to_string(parent), std::to_string(k), 0.002 + 0.01 * u(rng),
                   0.002 + 0.01 * u(rng)});
    }
    b.push_back(bus);
  }
  std::shuffle(b.begin(), b.end(), rng);
  std::shuffle(l.begin(), l.end(), rng);
  return dsse::network_from_per_unit(b, l);
}

/// Nodal Gauss-Seidel power flow on the complex bus admittance matrix.
/// Returns v_sq per bus and sending-end flows keyed like PowerFlowSolution.
struct OracleFlow {
  std::vector<double> v_sq;
  std::vector<double> flow_p;
  std::vector<double> flow_q;
};

inline OracleFlow gauss_seidel(const dsse::NetworkModel& net, const dsse::Dispatch& d, double tol = 1e-15) {
  using C = std::complex<double>;
  const int n = net.bus_count();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& line : net.lines()) {
    const C y = 1.0 / C(line.r, line.x);
    Y(line.from, line.from) += y;
    Y(line.to, line.to) += y;
    Y(line.from, line.to) -= y;
    Y(line.to, line.from) -= y;
  }
  std::vector<C> V(n, C(1.0, 0.0));
  for (int it = 0; it < 200000; ++it) {
    double change = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == net.slack()) continue;
      C sum = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j != k) sum += Y(k, j) * V[j];
      }
      const C s(d.inj_p[k], d.inj_q[k]);
      const C next = (std::conj(s) / std::conj(V[k]) - sum) / Y(k, k);
      change = std::max(change, std::abs(next - V[k]));
      V[k] = next;
    }
    if (change < tol) break;
  }
  OracleFlow out;
  for (int k = 0; k < n; ++k) out.v_sq.push_back(std::norm(V[k]));
  out.flow_p.assign(net.end_count(), 0.0);
  out.flow_q.assign(net.end_count(), 0.0);
  for (int e = 0; e < net.end_count(); ++e) {
    const auto& end = net.directed_ends()[e];
    const auto& line = net.lines()[end.line];
    const C s = V[end.from] * std::conj((V[end.from] - V[end.to]) / C(line.r, line.x));
    out.flow_p[e] = s.real();
    out.flow_q[e] = s.imag();
  }
  return out;
}

/// Dense weighted normal equations in long double with a few rounds of
/// iterative refinement.
inline Eigen::VectorXd dense_wls(const Eigen::MatrixXd& H, const Eigen::VectorXd& z, const Eigen::VectorXd& w) {
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const MatL h = H.cast<long double>();
  const VecL zz = z.cast<long double>();
  const VecL ww = w.cast<long double>();
  const MatL g = h.transpose() * ww.asDiagonal() * h;
  const Eigen::FullPivLU<MatL> lu(g);
  VecL x = lu.solve(h.transpose() * ww.asDiagonal() * zz);
  for (int k = 0; k < 5; ++k) {
    const VecL r = h.transpose() * ww.asDiagonal() * (zz - h * x);
    x += lu.solve(r);
  }
  return x.cast<double>();
}

/// Rank from singular values: sigma > dim * eps * sigma_max.
inline int svd_rank(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double cut = static_cast<double>(a.cols()) * std::numeric_limits<double>::epsilon() * s[0];
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) r += s[k] > cut;
  return r;
}

// Dense design matrix built directly from the row definitions.
inline Eigen::MatrixXd dense_rows(const dsse::NetworkModel& net, const std::vector<dsse::Measurement>& ms) {
  const auto layout = dsse::make_layout(net);
  std::vector<Eigen::RowVectorXd> rows;
  auto row = [&] { return Eigen::RowVectorXd::Zero(layout.dim()).eval(); };
  for (const auto& m : ms) {
    switch (m.kind) {
      case dsse::MeasurementKind::v_sq: {
        auto r = row();
        r[layout.col_v(m.target)] = 1;
        rows.push_back(r);
        break;
      }
      case dsse::MeasurementKind::inj_p:
      case dsse::MeasurementKind::virtual_zero_inj_p:
      case dsse::MeasurementKind::inj_q:
      case dsse::MeasurementKind::virtual_zero_inj_q: {
        const bool reactive = m.kind == dsse::MeasurementKind::inj_q || m.kind == dsse::MeasurementKind::virtual_zero_inj_q;
        auto r = row();
        for (const auto& line : net.lines()) {
          if (line.from != m.target && line.to != m.target) continue;
          const int e = net.end_from(static_cast<int>(&line - net.lines().data()), m.target);
          r[reactive ? layout.col_q(e) : layout.col_p(e)] = 1;
        }
        rows.push_back(r);
        break;
      }
      case dsse::MeasurementKind::flow_p:
      case dsse::MeasurementKind::flow_q: {
        const bool reactive = m.kind == dsse::MeasurementKind::flow_q;
        auto a = row();
        auto b = row();
        a[reactive ? layout.col_q(m.target) : layout.col_p(m.target)] = 1;
        b[reactive ? layout.col_q(m.target ^ 1) : layout.col_p(m.target ^ 1)] = -1;
        rows.push_back(a);
        rows.push_back(b);
        break;
      }
      case dsse::MeasurementKind::virtual_drop: {
        const auto& line = net.lines()[m.target];
        const int child = net.parent(line.to) == line.from ? line.to : line.from;
        const int parent = child == line.to ? line.from : line.to;
        const int fwd = net.end_from(m.target, parent);
        auto r = row();
        r[layout.col_v(parent)] = -1;
        r[layout.col_v(child)] = 1;
        r[layout.col_p(fwd)] = 2 * line.r;
        r[layout.col_q(fwd)] = 2 * line.x;
        rows.push_back(r);
        break;
      }
      case dsse::MeasurementKind::virtual_antisym_p:
      case dsse::MeasurementKind::virtual_antisym_q: {
        const bool reactive = m.kind == dsse::MeasurementKind::virtual_antisym_q;
        auto r = row();
        for (int e : {net.forward_end(m.target), net.reverse_end(m.target)}) {
          r[reactive ? layout.col_q(e) : layout.col_p(e)] = 1;
        }
        rows.push_back(r);
        break;
      }
    }
  }
  Eigen::MatrixXd h(static_cast<Eigen::Index>(rows.size()), layout.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = rows[i];
  return h;
}

}  // namespace testing
