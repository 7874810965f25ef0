#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsse/network.hpp"
#include "dsse/powerflow.hpp"
#include "dsse/rng.hpp"

namespace dsse {

/// Row types of the measurement model. Physical kinds carry a measured
/// value; virtual kinds encode structure and always have value 0.
enum class MeasurementKind {
  v_sq,                // squared voltage at a bus
  inj_p,               // net injection at a bus
  inj_q,
  flow_p,              // sending-end flow at a directed end (two rows)
  flow_q,
  virtual_drop,        // voltage drop along a line, parent -> child
  virtual_zero_inj_p,  // zero-injection bus
  virtual_zero_inj_q,
  virtual_antisym_p,   // forward + reverse flow of a line = 0
  virtual_antisym_q,
};

enum class TargetType { bus, line, end };

std::string_view to_string(MeasurementKind kind);
std::optional<MeasurementKind> parse_measurement_kind(std::string_view text);
TargetType target_type(MeasurementKind kind);
bool is_virtual(MeasurementKind kind);

struct Measurement {
  MeasurementKind kind = MeasurementKind::v_sq;
  int target = -1;  // bus, line or directed-end index depending on kind
  double value = 0.0;
  double weight = 1.0;
  double sigma = 0.0;

  bool operator==(const Measurement&) const = default;
};

enum class NoiseDistribution { uniform, gaussian };

std::string_view to_string(NoiseDistribution d);

/// Relative error bounds of the instruments (fractions, 0.001 = 0.1%).
struct NoiseConfig {
  double e_v = 0.0;
  double e_i = 0.0;
  NoiseDistribution distribution = NoiseDistribution::uniform;
  /// Gaussian draws use sigma = e * factor, truncated at +-e.
  double gaussian_sigma_factor = 1.0 / 3.0;

  /// Throws Error when a bound is outside [0, 0.05].
  void validate() const;
};

/// Standard deviation below which weights are capped (per-unit).
inline constexpr double kSigmaFloor = 1e-6;

/// Noisy candidates for every bus and directed end of a network.
struct MeasurementPool {
  std::vector<Measurement> v_sq;   // per bus
  std::vector<Measurement> inj_p;  // per bus
  std::vector<Measurement> inj_q;
  std::vector<Measurement> flow_p;  // per directed end
  std::vector<Measurement> flow_q;
  std::vector<double> true_inj_p;  // per bus, from the ground truth
  std::vector<double> true_inj_q;
  NoiseConfig noise;
};

MeasurementPool synthesize_pool(const PowerFlowSolution& truth, const NetworkModel& net, const NoiseConfig& noise,
                                Rng& rng);

enum class Preference { nodal, edge };

std::string_view to_string(Preference p);
std::optional<Preference> parse_preference(std::string_view text);

struct Fractions {
  double node = 0.0;
  double flow = 0.0;

  bool operator==(const Fractions&) const = default;
};

/// (0.60, 0.80) for nodal preference, (0.30, 0.90) for edge preference.
Fractions default_fractions(Preference p);

struct SelectionOptions {
  int max_resamples = 100;
  /// Add a structural antisymmetry row for both components of every line.
  bool antisymmetry_rows = false;
  /// Virtual rows weigh this much more than the median physical row.
  double virtual_weight_factor = 1e6;
};

struct MeasurementSet {
  std::vector<Measurement> measurements;
  Preference preference = Preference::nodal;
  Fractions fractions;
  std::uint64_t seed = 0;
  int attempts = 1;
  int sampled_buses = 0;
  int sampled_ends = 0;
};

/// Draw an observable measurement set from the pool. Throws
/// ObservabilityError when no draw within the resample budget is observable.
MeasurementSet select_set(const MeasurementPool& pool, const NetworkModel& net, Preference preference,
                          Fractions fractions, std::uint64_t seed, const SelectionOptions& opt = {});

/// One draw without any observability check (attempt `attempt` of `seed`).
MeasurementSet draw_set(const MeasurementPool& pool, const NetworkModel& net, Preference preference,
                        Fractions fractions, std::uint64_t seed, int attempt, const SelectionOptions& opt = {});

struct ObservabilityReport {
  bool observable = false;
  int rank = 0;
  int state_dim = 0;
};

ObservabilityReport check_observability(const NetworkModel& net, std::span<const Measurement> measurements);
ObservabilityReport check_observability(const NetworkModel& net, const MeasurementSet& set);

// Documents. Targets are bus ids, line ids, or "<line id>:<from bus id>"
// for directed ends.

std::string target_label(const NetworkModel& net, MeasurementKind kind, int target);
int resolve_target(const NetworkModel& net, MeasurementKind kind, std::string_view label);

std::string dump_measurement_set(const NetworkModel& net, const MeasurementSet& set);
MeasurementSet parse_measurement_set(const NetworkModel& net, std::string_view text);
MeasurementSet read_measurement_set(const NetworkModel& net, const std::filesystem::path& path);

}  // namespace dsse
