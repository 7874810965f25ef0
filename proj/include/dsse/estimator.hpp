#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "dsse/measurement.hpp"
#include "dsse/network.hpp"
#include "dsse/powerflow.hpp"

namespace dsse {

/// Column layout of the state: squared voltages in rooted order, then the
/// active flows of every directed end, then the reactive flows.
struct StateLayout {
  int bus_count = 0;
  int end_count = 0;
  std::vector<int> bus_column;  // by bus index

  int dim() const noexcept { return bus_count + 2 * end_count; }
  int col_v(int bus) const { return bus_column[bus]; }
  int col_p(int end) const noexcept { return bus_count + end; }
  int col_q(int end) const noexcept { return bus_count + end_count + end; }
};

StateLayout make_layout(const NetworkModel& net);

/// Estimated or true state, keyed by bus index and directed-end index.
struct StateVector {
  std::vector<double> v_sq;
  std::vector<double> flow_p;
  std::vector<double> flow_q;

  bool operator==(const StateVector&) const = default;
};

StateVector state_from_solution(const PowerFlowSolution& s);
Eigen::VectorXd to_flat(const StateLayout& layout, const StateVector& x);
StateVector from_flat(const StateLayout& layout, const Eigen::VectorXd& flat);

/// Where a design-matrix row came from. Flow measurements produce a direct
/// row and a mirrored row on the opposite directed end.
struct RowTag {
  MeasurementKind kind = MeasurementKind::v_sq;
  int target = -1;
  int measurement = -1;
  bool mirrored = false;
};

struct DesignSystem {
  StateLayout layout;
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd z;
  Eigen::VectorXd w;
  std::vector<RowTag> rows;
};

/// Linear measurement model h(x) = H x, one or two rows per measurement,
/// in measurement order. Throws ReferenceError on a bad target.
DesignSystem assemble(const NetworkModel& net, std::span<const Measurement> measurements);
DesignSystem assemble(const NetworkModel& net, const MeasurementSet& set);

/// h(x) row by row from the tags, without forming H.
Eigen::VectorXd evaluate(const NetworkModel& net, std::span<const RowTag> rows, const StateVector& x);

/// Rank of a sparse matrix from a column-pivoted sparse QR on the
/// column-equilibrated matrix. Pivots below cols * eps count as dependent.
int numerical_rank(const Eigen::SparseMatrix<double>& a);

/// Maximum matching between rows and columns over the nonzero pattern. An
/// upper bound on the numerical rank that costs microseconds.
int structural_rank(const Eigen::SparseMatrix<double>& a);

struct StateEstimate {
  StateVector state;
  Eigen::VectorXd residuals;  // z - h(x), per row
  double weighted_cost = 0.0;
  int rank = 0;
  bool postfiltered = false;
  std::vector<RowTag> rows;
  Eigen::VectorXd z;
  Eigen::VectorXd w;
};

/// Weighted least squares via sparse QR of W^(1/2) H. Throws
/// RankDeficiencyError or NumericError.
StateEstimate solve_wls(const DesignSystem& sys);

/// Repair lines whose two directed flows disagree by more than `threshold`
/// times the mean absolute flow: the direction with the worse nodal
/// balance residual is replaced by the negated other direction.
StateEstimate postfilter_antisymmetry(const StateEstimate& est, const NetworkModel& net, double threshold);

/// Lines (per component) with |forward + reverse| above threshold * mean |flow|.
int count_antisymmetry_violations(const StateVector& x, const NetworkModel& net, double threshold);

std::string dump_estimate(const NetworkModel& net, const StateEstimate& est);

}  // namespace dsse
