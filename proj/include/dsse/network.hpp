#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dsse {

enum class BusKind { slack, pq };

std::string_view to_string(BusKind kind);

// Records in physical units, exactly as stored in a network document.

struct BusRecord {
  std::string id;
  BusKind kind = BusKind::pq;
  double load_p_kw = 0.0;
  double load_q_kvar = 0.0;
  double dg_p_kw = 0.0;

  bool operator==(const BusRecord&) const = default;
};

struct LineRecord {
  std::string id;
  std::string from;
  std::string to;
  double r_ohm = 0.0;
  double x_ohm = 0.0;

  bool operator==(const LineRecord&) const = default;
};

/// Unvalidated network description. Feed it to validate_radial() for a
/// findings report, or to NetworkModel for a checked, per-unit model.
struct NetworkData {
  std::string name;
  double base_mva = 5.0;
  double base_kv = 4.16;
  std::vector<BusRecord> buses;
  std::vector<LineRecord> lines;

  bool operator==(const NetworkData&) const = default;
};

/// Bus in per-unit on the system base.
struct Bus {
  std::string id;
  BusKind kind = BusKind::pq;
  double load_p = 0.0;
  double load_q = 0.0;
  double dg_capacity_p = 0.0;
};

/// Line in per-unit; from/to are bus indices.
struct Line {
  std::string id;
  int from = -1;
  int to = -1;
  double r = 0.0;
  double x = 0.0;
};

/// One orientation of a line. `from` is the bus the flow leaves.
struct DirectedEnd {
  int line = -1;
  int from = -1;
  int to = -1;
  bool downstream = true;  // parent -> child
};

struct Finding {
  std::string code;
  std::string element;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const noexcept { return findings.empty(); }
};

/// Check every structural invariant of a radial feeder description.
ValidationReport validate_radial(const NetworkData& data);

/// Ordering of bus ids: all-digit ids numerically, then the rest lexically.
bool natural_less(std::string_view a, std::string_view b);

/// Validated radial feeder rooted at its slack bus. Immutable.
class NetworkModel {
 public:
  /// Throws ValidationError naming every finding.
  explicit NetworkModel(NetworkData data);

  const NetworkData& data() const noexcept { return data_; }
  double base_mva() const noexcept { return data_.base_mva; }
  double base_kv() const noexcept { return data_.base_kv; }
  double impedance_base() const noexcept { return data_.base_kv * data_.base_kv / data_.base_mva; }

  const std::vector<Bus>& buses() const noexcept { return buses_; }
  const std::vector<Line>& lines() const noexcept { return lines_; }
  int bus_count() const noexcept { return static_cast<int>(buses_.size()); }
  int line_count() const noexcept { return static_cast<int>(lines_.size()); }
  int slack() const noexcept { return slack_; }

  /// Bus index for an id; -1 if absent.
  int find_bus(std::string_view id) const;
  /// Line index for an id; -1 if absent.
  int find_line(std::string_view id) const;

  /// Bus indices, slack first, children visited in natural id order.
  const std::vector<int>& rooted_order() const noexcept { return order_; }
  int rooted_position(int bus) const { return position_[bus]; }
  int parent(int bus) const { return parent_[bus]; }
  /// Line joining a bus to its parent; -1 for the slack.
  int parent_line(int bus) const { return parent_line_[bus]; }
  const std::vector<int>& children(int bus) const { return children_[bus]; }

  /// Upstream (parent) and downstream (child) bus of a line.
  int upstream(int line) const { return upstream_[line]; }
  int downstream(int line) const { return downstream_[line]; }

  /// All 2*|lines| directed ends, both orientations of a line adjacent,
  /// parent->child first, lines in rooted order of their child bus.
  const std::vector<DirectedEnd>& directed_ends() const noexcept { return ends_; }
  int end_count() const noexcept { return static_cast<int>(ends_.size()); }
  int forward_end(int line) const { return 2 * line_rank_[line]; }
  int reverse_end(int line) const { return 2 * line_rank_[line] + 1; }
  static int opposite_end(int end) { return end ^ 1; }
  /// Directed end of `line` leaving `bus`; -1 if `bus` is not an endpoint.
  int end_from(int line, int bus) const;
  /// Directed ends whose flow leaves `bus`.
  const std::vector<int>& ends_leaving(int bus) const { return leaving_[bus]; }

  bool operator==(const NetworkModel& other) const { return data_ == other.data_; }

 private:
  NetworkData data_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::unordered_map<std::string, int> bus_index_;
  std::unordered_map<std::string, int> line_index_;
  int slack_ = -1;
  std::vector<int> order_;
  std::vector<int> position_;
  std::vector<int> parent_;
  std::vector<int> parent_line_;
  std::vector<std::vector<int>> children_;
  std::vector<int> upstream_;
  std::vector<int> downstream_;
  std::vector<int> line_rank_;
  std::vector<DirectedEnd> ends_;
  std::vector<std::vector<int>> leaving_;
};

/// Directed ends in canonical order (same as NetworkModel::directed_ends()).
std::vector<DirectedEnd> directed_line_index(const NetworkModel& net);

ValidationReport validate_radial(const NetworkModel& net);

/// Build a model from per-unit quantities (loads, DG and impedances on the
/// given bases). Mostly for tests and small studies.
struct PerUnitBus {
  std::string id;
  BusKind kind = BusKind::pq;
  double load_p = 0.0;
  double load_q = 0.0;
  double dg_p = 0.0;
};
struct PerUnitLine {
  std::string id;
  std::string from;
  std::string to;
  double r = 0.0;
  double x = 0.0;
};
NetworkData network_from_per_unit(const std::vector<PerUnitBus>& buses, const std::vector<PerUnitLine>& lines,
                                  double base_mva = 5.0, double base_kv = 4.16);

// Network documents (JSON).

NetworkData read_network_data(const std::filesystem::path& path);
NetworkData parse_network_data(std::string_view text);
NetworkModel load_network(const std::filesystem::path& path);
std::string dump_network(const NetworkData& data);
void save_network(const NetworkModel& net, const std::filesystem::path& path);

}  // namespace dsse
