#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsse/error.hpp"
#include "dsse/estimator.hpp"
#include "dsse/measurement.hpp"
#include "dsse/network.hpp"
#include "dsse/powerflow.hpp"

namespace dsse {

/// How |x - m| is scaled within a quantity class (voltages, flows).
enum class Normalization {
  class_mean,   // divide by the class mean of |m|
  per_element,  // divide each entry by its own |m|
};

std::string_view to_string(Normalization n);
std::optional<Normalization> parse_normalization(std::string_view text);

struct ScenarioConfig {
  double e_v = 0.001;
  double e_i = 0.001;
  Preference preference = Preference::nodal;
  int dispatch_count = 1500;
  std::uint64_t master_seed = 1;
  /// Unset means default_fractions(preference).
  std::optional<Fractions> fractions;
  bool postfilter = false;
  double postfilter_threshold = 0.5;
  Normalization normalization = Normalization::class_mean;
  NoiseDistribution distribution = NoiseDistribution::uniform;
  double gaussian_sigma_factor = 1.0 / 3.0;
  DispatchConfig dispatch;
  ExactOptions exact;
  /// Ground truth solver; `linear` gives the model-consistent baseline.
  FlowMethod truth = FlowMethod::exact;
  SelectionOptions selection;
  /// A flow is an outlier when its error exceeds this multiple of the
  /// run's mean flow error.
  double outlier_factor = 5.0;

  Fractions effective_fractions() const { return fractions.value_or(default_fractions(preference)); }
  NoiseConfig noise() const { return {e_v, e_i, distribution, gaussian_sigma_factor}; }
};

/// Error statistics of one estimation run.
struct RunErrors {
  double mean_err_v = 0.0;
  double max_err_v = 0.0;
  double mean_err_f = 0.0;
  double max_err_f = 0.0;
  int outlier_count = 0;
  int selection_attempts = 0;

  bool operator==(const RunErrors&) const = default;
};

/// Compare an estimate with the truth. Voltage errors are taken on
/// magnitudes (square roots), flow errors over every directed p and q entry.
RunErrors compute_errors(const StateVector& estimate, const StateVector& truth, Normalization normalization,
                         double outlier_factor = 5.0);

/// One pipeline run failed; carries the dispatch index.
class RunFailure : public Error {
 public:
  RunFailure(int index, bool observability, const std::string& what)
      : Error("dispatch " + std::to_string(index) + ": " + what), index_(index), observability_(observability) {}

  int index() const noexcept { return index_; }
  bool observability() const noexcept { return observability_; }

 private:
  int index_;
  bool observability_;
};

struct RunDetail {
  Dispatch dispatch;
  PowerFlowSolution truth;
  MeasurementSet set;
  StateEstimate estimate;
  RunErrors errors;
};

/// dispatch -> truth -> pool -> selection -> WLS (-> postfilter) -> errors.
RunDetail run_one_detailed(const NetworkModel& net, const ScenarioConfig& cfg, int dispatch_index);
RunErrors run_one(const NetworkModel& net, const ScenarioConfig& cfg, int dispatch_index);

/// Noise, selection, estimation and errors for a given truth. Draws come
/// from the streams of (seed, index).
RunDetail estimate_from_truth(const NetworkModel& net, const PowerFlowSolution& truth, const ScenarioConfig& cfg,
                              std::uint64_t seed, int index = 0);

/// Per-index outcome of a batch; `errors` is empty when the run failed
/// its observability check.
struct RunOutcome {
  std::optional<RunErrors> errors;
  std::string failure;
};

/// Run dispatch indices [0, dispatch_count) on `jobs` threads. Results are
/// ordered by index and do not depend on `jobs`.
std::vector<RunOutcome> run_batch(const NetworkModel& net, const ScenarioConfig& cfg, int jobs = 1);

struct ScenarioStats {
  double avg_of_mean_v = 0.0;
  double avg_of_mean_f = 0.0;
  double avg_of_max_v = 0.0;
  double avg_of_max_f = 0.0;
  /// 95% normal-approximation half-widths of the four averages.
  double hw_mean_v = 0.0;
  double hw_mean_f = 0.0;
  double hw_max_v = 0.0;
  double hw_max_f = 0.0;
  int runs = 0;
  int failures = 0;
  double median_outliers = 0.0;
  /// Share of runs whose first measurement draw was already observable.
  double first_draw_observable = 0.0;
};

/// Aggregate a batch. Throws Error when more than 1% of runs failed.
ScenarioStats summarize(const std::vector<RunOutcome>& outcomes);
ScenarioStats run_scenario(const NetworkModel& net, const ScenarioConfig& cfg, int jobs = 1);

struct GridConfig {
  std::vector<double> e_v_list{0.001, 0.003, 0.006, 0.01};
  std::vector<double> e_i_list{0.001, 0.003, 0.006, 0.01};
  std::vector<Preference> preferences{Preference::nodal, Preference::edge};
  std::optional<Fractions> nodal_fractions;
  std::optional<Fractions> edge_fractions;
  /// Shared settings; e_v, e_i, preference and fractions are overridden per cell.
  ScenarioConfig base;

  ScenarioConfig cell(double e_v, double e_i, Preference p) const;
};

GridConfig parse_grid_config(std::string_view text);
GridConfig read_grid_config(const std::filesystem::path& path);
std::string dump_grid_config(const GridConfig& cfg);

struct GridCell {
  double e_v = 0.0;
  double e_i = 0.0;
  Preference preference = Preference::nodal;
  std::optional<ScenarioStats> stats;
  std::string error;
};

struct GridResult {
  GridConfig config;
  std::vector<GridCell> cells;

  const GridCell* find(double e_v, double e_i, Preference p) const;
  bool complete() const;
};

GridResult run_grid(const NetworkModel& net, const GridConfig& cfg, int jobs = 1);

enum class TableStat { mean_v, mean_f, max_v, max_f };

std::string_view to_string(TableStat s);
double stat_value(const ScenarioStats& s, TableStat stat);

/// e_i rows by e_v columns, values in percent.
std::string render_table_csv(const GridResult& r, TableStat stat, Preference p);
std::string render_table_markdown(const GridResult& r, TableStat stat, Preference p);
std::string render_sidecar(const GridResult& r);

/// tables/table_{stat}_{pref}.csv and .md plus sidecar.json under `dir`.
void write_grid(const GridResult& r, const std::filesystem::path& dir);

}  // namespace dsse
