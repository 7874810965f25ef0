#include "dsse/network.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "dsse/error.hpp"

namespace dsse {

std::string_view to_string(BusKind kind) {
  return kind == BusKind::slack ? "slack" : "pq";
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string_view strip_zeros(std::string_view s) {
  while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
  return s;
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

bool natural_less(std::string_view a, std::string_view b) {
  const bool na = all_digits(a);
  const bool nb = all_digits(b);
  if (na != nb) return na;
  if (na) {
    const auto sa = strip_zeros(a);
    const auto sb = strip_zeros(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

ValidationReport validate_radial(const NetworkData& data) {
  ValidationReport report;
  auto add = [&](std::string code, std::string element, std::string message) {
    report.findings.push_back({std::move(code), std::move(element), std::move(message)});
  };

  if (!(data.base_mva > 0.0)) add("base", "base_mva", "base_mva must be positive");
  if (!(data.base_kv > 0.0)) add("base", "base_kv", "base_kv must be positive");

  std::unordered_map<std::string, int> index;
  int slack_count = 0;
  for (int i = 0; i < static_cast<int>(data.buses.size()); ++i) {
    const auto& b = data.buses[i];
    if (!index.emplace(b.id, i).second) add("duplicate_id", b.id, "duplicate bus id '" + b.id + "'");
    if (b.kind == BusKind::slack) ++slack_count;
    if (b.load_p_kw < 0.0) add("negative_load", b.id, "bus '" + b.id + "' has negative active load");
    if (b.dg_p_kw < 0.0) add("negative_dg", b.id, "bus '" + b.id + "' has negative DG capacity");
  }
  if (slack_count == 0) add("slack_count", "", "no slack bus");
  if (slack_count > 1) add("slack_count", "", "multiple slack buses (" + std::to_string(slack_count) + ")");

  std::set<std::string> line_ids;
  std::set<std::pair<int, int>> pairs;
  DisjointSets sets(static_cast<int>(data.buses.size()));
  std::vector<std::vector<int>> adjacency(data.buses.size());
  for (const auto& l : data.lines) {
    if (!line_ids.insert(l.id).second) add("duplicate_id", l.id, "duplicate line id '" + l.id + "'");
    if (l.r_ohm < 0.0) add("negative_resistance", l.id, "line '" + l.id + "' has negative resistance");
    const auto fa = index.find(l.from);
    const auto fb = index.find(l.to);
    if (fa == index.end() || fb == index.end()) {
      const std::string& missing = fa == index.end() ? l.from : l.to;
      add("unknown_bus", l.id, "line '" + l.id + "' refers to unknown bus '" + missing + "'");
      continue;
    }
    const int a = fa->second;
    const int b = fb->second;
    if (a == b) {
      add("self_loop", l.id, "line '" + l.id + "' connects bus '" + l.from + "' to itself");
      continue;
    }
    const auto key = std::minmax(a, b);
    if (!pairs.insert(key).second) {
      add("cycle", l.id, "parallel line creates cycle: '" + l.id + "' duplicates " + l.from + "-" + l.to);
      continue;
    }
    if (!sets.unite(a, b)) {
      add("cycle", l.id, "cycle detected: line '" + l.id + "' closes a loop");
      continue;
    }
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }

  if (!data.buses.empty()) {
    int root = 0;
    for (int i = 0; i < static_cast<int>(data.buses.size()); ++i) {
      if (data.buses[i].kind == BusKind::slack) {
        root = i;
        break;
      }
    }
    std::vector<char> seen(data.buses.size(), 0);
    std::vector<int> stack{root};
    seen[root] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adjacency[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    for (std::size_t i = 0; i < data.buses.size(); ++i) {
      if (!seen[i]) add("disconnected", data.buses[i].id, "disconnected bus '" + data.buses[i].id + "'");
    }
  }
  return report;
}

NetworkModel::NetworkModel(NetworkData data) : data_(std::move(data)) {
  const auto report = validate_radial(data_);
  if (!report.ok()) {
    std::ostringstream msg;
    msg << "invalid network";
    if (!data_.name.empty()) msg << " '" << data_.name << "'";
    msg << ":";
    for (const auto& f : report.findings) msg << "\n  " << f.message;
    throw ValidationError(msg.str());
  }

  const double s_base_kw = data_.base_mva * 1000.0;
  const double z_base = impedance_base();
  const int nb = static_cast<int>(data_.buses.size());
  const int nl = static_cast<int>(data_.lines.size());

  buses_.reserve(nb);
  for (int i = 0; i < nb; ++i) {
    const auto& r = data_.buses[i];
    buses_.push_back({r.id, r.kind, r.load_p_kw / s_base_kw, r.load_q_kvar / s_base_kw, r.dg_p_kw / s_base_kw});
    bus_index_.emplace(r.id, i);
    if (r.kind == BusKind::slack) slack_ = i;
  }
  lines_.reserve(nl);
  std::vector<std::vector<std::pair<int, int>>> adjacency(nb);  // (neighbor, line)
  for (int k = 0; k < nl; ++k) {
    const auto& r = data_.lines[k];
    Line line{r.id, bus_index_.at(r.from), bus_index_.at(r.to), r.r_ohm / z_base, r.x_ohm / z_base};
    adjacency[line.from].emplace_back(line.to, k);
    adjacency[line.to].emplace_back(line.from, k);
    lines_.push_back(std::move(line));
    line_index_.emplace(r.id, k);
  }
  for (auto& adj : adjacency) {
    std::sort(adj.begin(), adj.end(), [&](const auto& a, const auto& b) {
      return natural_less(buses_[a.first].id, buses_[b.first].id);
    });
  }

  // Depth-first preorder from the slack; children in natural id order.
  parent_.assign(nb, -1);
  parent_line_.assign(nb, -1);
  children_.assign(nb, {});
  position_.assign(nb, -1);
  upstream_.assign(nl, -1);
  downstream_.assign(nl, -1);
  order_.reserve(nb);
  std::vector<int> stack{slack_};
  std::vector<char> seen(nb, 0);
  seen[slack_] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    position_[u] = static_cast<int>(order_.size());
    order_.push_back(u);
    for (auto it = adjacency[u].rbegin(); it != adjacency[u].rend(); ++it) {
      const auto [v, k] = *it;
      if (seen[v]) continue;
      seen[v] = 1;
      parent_[v] = u;
      parent_line_[v] = k;
      upstream_[k] = u;
      downstream_[k] = v;
      stack.push_back(v);
    }
  }
  for (int u : order_) {
    if (parent_[u] >= 0) children_[parent_[u]].push_back(u);
  }

  line_rank_.assign(nl, -1);
  ends_.reserve(2 * nl);
  leaving_.assign(nb, {});
  for (int u : order_) {
    const int k = parent_line_[u];
    if (k < 0) continue;
    line_rank_[k] = static_cast<int>(ends_.size() / 2);
    const int p = parent_[u];
    leaving_[p].push_back(static_cast<int>(ends_.size()));
    ends_.push_back({k, p, u, true});
    leaving_[u].push_back(static_cast<int>(ends_.size()));
    ends_.push_back({k, u, p, false});
  }
  for (auto& l : leaving_) std::sort(l.begin(), l.end());
}

int NetworkModel::find_bus(std::string_view id) const {
  const auto it = bus_index_.find(std::string(id));
  return it == bus_index_.end() ? -1 : it->second;
}

int NetworkModel::find_line(std::string_view id) const {
  const auto it = line_index_.find(std::string(id));
  return it == line_index_.end() ? -1 : it->second;
}

int NetworkModel::end_from(int line, int bus) const {
  if (upstream_[line] == bus) return forward_end(line);
  if (downstream_[line] == bus) return reverse_end(line);
  return -1;
}

std::vector<DirectedEnd> directed_line_index(const NetworkModel& net) {
  return net.directed_ends();
}

ValidationReport validate_radial(const NetworkModel& net) {
  return validate_radial(net.data());
}

NetworkData network_from_per_unit(const std::vector<PerUnitBus>& buses, const std::vector<PerUnitLine>& lines,
                                  double base_mva, double base_kv) {
  NetworkData data;
  data.base_mva = base_mva;
  data.base_kv = base_kv;
  const double s_base_kw = base_mva * 1000.0;
  const double z_base = base_kv * base_kv / base_mva;
  for (const auto& b : buses) {
    data.buses.push_back({b.id, b.kind, b.load_p * s_base_kw, b.load_q * s_base_kw, b.dg_p * s_base_kw});
  }
  for (const auto& l : lines) {
    data.lines.push_back({l.id, l.from, l.to, l.r * z_base, l.x * z_base});
  }
  return data;
}

}  // namespace dsse
