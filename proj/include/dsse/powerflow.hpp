#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dsse/network.hpp"
#include "dsse/rng.hpp"

namespace dsse {

/// Net injections per bus index (generation positive, load negative).
/// The slack entries are ignored by the solvers.
struct Dispatch {
  std::vector<double> inj_p;
  std::vector<double> inj_q;

  bool operator==(const Dispatch&) const = default;
};

struct DispatchConfig {
  double load_scale_min = 0.5;
  double load_scale_max = 1.0;
  /// Generation is dg_capacity_p times a factor drawn from this range.
  double dg_scale_min = 0.0;
  double dg_scale_max = 1.0;
  /// DG reactive output stays inside this power factor, lagging or leading.
  double power_factor = 0.95;
};

/// Draw one operating point. Deterministic for a given stream state.
Dispatch generate_dispatch(const NetworkModel& net, Rng& rng, const DispatchConfig& cfg = {});

/// Nominal loads only, no generation.
Dispatch nominal_dispatch(const NetworkModel& net);

/// `estimate` marks a state written by the estimator in solution layout.
enum class FlowMethod { exact, linear, estimate };

std::string_view to_string(FlowMethod m);

/// Squared voltages per bus index and sending-end flows per directed end.
struct PowerFlowSolution {
  std::vector<double> v_sq;
  std::vector<double> flow_p;
  std::vector<double> flow_q;
  bool converged = false;
  int iterations = 0;
  FlowMethod method = FlowMethod::exact;

  /// Sum of sending-end flows leaving `bus` (its net injection).
  double injection_p(const NetworkModel& net, int bus) const;
  double injection_q(const NetworkModel& net, int bus) const;
};

struct ExactOptions {
  double tol = 1e-10;
  int max_iter = 100;
};

/// Backward/forward sweep on the branch-flow (DistFlow) equations.
/// Returns converged = false with the last iterate when max_iter runs out;
/// throws VoltageCollapseError if any squared voltage becomes non-positive.
PowerFlowSolution solve_exact(const NetworkModel& net, const Dispatch& d, const ExactOptions& opt = {});

/// Lossless linear branch-flow model.
PowerFlowSolution solve_linear(const NetworkModel& net, const Dispatch& d);

// Documents.

std::string dump_dispatch(const NetworkModel& net, const Dispatch& d);
Dispatch parse_dispatch(const NetworkModel& net, std::string_view text);
Dispatch read_dispatch(const NetworkModel& net, const std::filesystem::path& path);

std::string dump_solution(const NetworkModel& net, const PowerFlowSolution& s);
PowerFlowSolution parse_solution(const NetworkModel& net, std::string_view text);
PowerFlowSolution read_solution(const NetworkModel& net, const std::filesystem::path& path);

}  // namespace dsse
