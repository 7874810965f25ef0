#include "dsse/powerflow.hpp"

#include <algorithm>
#include <cmath>

#include "dsse/error.hpp"

namespace dsse {

std::string_view to_string(FlowMethod m) {
  switch (m) {
    case FlowMethod::exact:
      return "exact";
    case FlowMethod::linear:
      return "linear";
    case FlowMethod::estimate:
      return "estimate";
  }
  return "?";
}

Dispatch nominal_dispatch(const NetworkModel& net) {
  Dispatch d;
  d.inj_p.assign(net.bus_count(), 0.0);
  d.inj_q.assign(net.bus_count(), 0.0);
  for (int b = 0; b < net.bus_count(); ++b) {
    if (b == net.slack()) continue;
    d.inj_p[b] = -net.buses()[b].load_p;
    d.inj_q[b] = -net.buses()[b].load_q;
  }
  return d;
}

Dispatch generate_dispatch(const NetworkModel& net, Rng& rng, const DispatchConfig& cfg) {
  const double q_ratio = std::tan(std::acos(std::clamp(cfg.power_factor, 0.0, 1.0)));
  Dispatch d;
  d.inj_p.assign(net.bus_count(), 0.0);
  d.inj_q.assign(net.bus_count(), 0.0);
  // Draws happen in rooted order so the stream layout follows topology,
  // not file order. Every bus consumes the same number of draws.
  for (int b : net.rooted_order()) {
    if (b == net.slack()) continue;
    const Bus& bus = net.buses()[b];
    const double load_scale = uniform(rng, cfg.load_scale_min, cfg.load_scale_max);
    const double dg_scale = uniform(rng, cfg.dg_scale_min, cfg.dg_scale_max);
    const double pf_side = uniform(rng, -1.0, 1.0);
    const double gen_p = bus.dg_capacity_p * dg_scale;
    const double gen_q = gen_p * q_ratio * pf_side;
    d.inj_p[b] = gen_p - load_scale * bus.load_p;
    d.inj_q[b] = gen_q - load_scale * bus.load_q;
  }
  return d;
}

double PowerFlowSolution::injection_p(const NetworkModel& net, int bus) const {
  double s = 0.0;
  for (int e : net.ends_leaving(bus)) s += flow_p[e];
  return s;
}

double PowerFlowSolution::injection_q(const NetworkModel& net, int bus) const {
  double s = 0.0;
  for (int e : net.ends_leaving(bus)) s += flow_q[e];
  return s;
}

PowerFlowSolution solve_exact(const NetworkModel& net, const Dispatch& d, const ExactOptions& opt) {
  const int nb = net.bus_count();
  const int nl = net.line_count();
  const auto& order = net.rooted_order();

  std::vector<double> v_sq(nb, 1.0);
  std::vector<double> send_p(nb, 0.0);  // flow on the parent line, indexed by child bus
  std::vector<double> send_q(nb, 0.0);
  std::vector<double> current_sq(nb, 0.0);  // squared current magnitude, by child bus

  PowerFlowSolution sol;
  sol.method = FlowMethod::exact;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    // Backward: subtree demand plus the losses of the previous iterate.
    for (auto pos = order.rbegin(); pos != order.rend(); ++pos) {
      const int j = *pos;
      if (j == net.slack()) continue;
      const Line& line = net.lines()[net.parent_line(j)];
      double p = -d.inj_p[j] + line.r * current_sq[j];
      double q = -d.inj_q[j] + line.x * current_sq[j];
      for (int k : net.children(j)) {
        p += send_p[k];
        q += send_q[k];
      }
      send_p[j] = p;
      send_q[j] = q;
    }
    // Forward: voltages from the root.
    double change = 0.0;
    for (int j : order) {
      if (j == net.slack()) continue;
      const int i = net.parent(j);
      const Line& line = net.lines()[net.parent_line(j)];
      const double p = send_p[j];
      const double q = send_q[j];
      const double l_new = (p * p + q * q) / v_sq[i];
      const double v_new = v_sq[i] - 2.0 * (line.r * p + line.x * q) + (line.r * line.r + line.x * line.x) * l_new;
      if (!(v_new > 0.0)) throw VoltageCollapseError(net.buses()[j].id, it + 1);
      change = std::max(change, std::abs(std::sqrt(v_new) - std::sqrt(v_sq[j])));
      change = std::max(change, std::abs(l_new - current_sq[j]));
      v_sq[j] = v_new;
      current_sq[j] = l_new;
    }
    if (change < opt.tol) {
      sol.converged = true;
      ++it;
      break;
    }
  }
  sol.iterations = it;
  sol.v_sq = std::move(v_sq);
  sol.v_sq[net.slack()] = 1.0;
  sol.flow_p.assign(2 * nl, 0.0);
  sol.flow_q.assign(2 * nl, 0.0);
  for (int k = 0; k < nl; ++k) {
    const int j = net.downstream(k);
    const Line& line = net.lines()[k];
    const int fwd = net.forward_end(k);
    const int rev = net.reverse_end(k);
    sol.flow_p[fwd] = send_p[j];
    sol.flow_q[fwd] = send_q[j];
    sol.flow_p[rev] = -(send_p[j] - line.r * current_sq[j]);
    sol.flow_q[rev] = -(send_q[j] - line.x * current_sq[j]);
  }
  return sol;
}

PowerFlowSolution solve_linear(const NetworkModel& net, const Dispatch& d) {
  const int nb = net.bus_count();
  const int nl = net.line_count();
  const auto& order = net.rooted_order();

  std::vector<double> send_p(nb, 0.0);
  std::vector<double> send_q(nb, 0.0);
  for (auto pos = order.rbegin(); pos != order.rend(); ++pos) {
    const int j = *pos;
    if (j == net.slack()) continue;
    double p = -d.inj_p[j];
    double q = -d.inj_q[j];
    for (int k : net.children(j)) {
      p += send_p[k];
      q += send_q[k];
    }
    send_p[j] = p;
    send_q[j] = q;
  }

  PowerFlowSolution sol;
  sol.method = FlowMethod::linear;
  sol.converged = true;
  sol.iterations = 1;
  sol.v_sq.assign(nb, 1.0);
  for (int j : order) {
    if (j == net.slack()) continue;
    const Line& line = net.lines()[net.parent_line(j)];
    sol.v_sq[j] = sol.v_sq[net.parent(j)] - 2.0 * send_p[j] * line.r - 2.0 * send_q[j] * line.x;
  }
  sol.flow_p.assign(2 * nl, 0.0);
  sol.flow_q.assign(2 * nl, 0.0);
  for (int k = 0; k < nl; ++k) {
    const int j = net.downstream(k);
    sol.flow_p[net.forward_end(k)] = send_p[j];
    sol.flow_q[net.forward_end(k)] = send_q[j];
    sol.flow_p[net.reverse_end(k)] = -send_p[j];
    sol.flow_q[net.reverse_end(k)] = -send_q[j];
  }
  return sol;
}

}  // namespace dsse
