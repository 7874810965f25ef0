#include <nlohmann/json.hpp>

#include "dsse/error.hpp"
#include "dsse/io.hpp"
#include "dsse/measurement.hpp"

namespace dsse {

using nlohmann::json;

std::string target_label(const NetworkModel& net, MeasurementKind kind, int target) {
  switch (target_type(kind)) {
    case TargetType::bus:
      return net.buses().at(target).id;
    case TargetType::line:
      return net.lines().at(target).id;
    case TargetType::end: {
      const auto& e = net.directed_ends().at(target);
      return net.lines()[e.line].id + ":" + net.buses()[e.from].id;
    }
  }
  return {};
}

int resolve_target(const NetworkModel& net, MeasurementKind kind, std::string_view label) {
  switch (target_type(kind)) {
    case TargetType::bus: {
      const int b = net.find_bus(label);
      if (b < 0) throw ReferenceError("unknown bus '" + std::string(label) + "'");
      return b;
    }
    case TargetType::line: {
      const int k = net.find_line(label);
      if (k < 0) throw ReferenceError("unknown line '" + std::string(label) + "'");
      return k;
    }
    case TargetType::end: {
      const auto colon = label.rfind(':');
      if (colon == std::string_view::npos) {
        throw ReferenceError("directed end '" + std::string(label) + "' must read <line>:<from bus>");
      }
      const int k = net.find_line(label.substr(0, colon));
      const int b = net.find_bus(label.substr(colon + 1));
      const int e = (k < 0 || b < 0) ? -1 : net.end_from(k, b);
      if (e < 0) throw ReferenceError("unknown directed end '" + std::string(label) + "'");
      return e;
    }
  }
  return -1;
}

std::string dump_measurement_set(const NetworkModel& net, const MeasurementSet& set) {
  json rows = json::array();
  for (const auto& m : set.measurements) {
    rows.push_back({{"kind", std::string(to_string(m.kind))},
                    {"target", target_label(net, m.kind, m.target)},
                    {"value", m.value},
                    {"weight", m.weight},
                    {"sigma", m.sigma}});
  }
  json doc;
  doc["preference"] = std::string(to_string(set.preference));
  doc["node_fraction"] = set.fractions.node;
  doc["flow_fraction"] = set.fractions.flow;
  doc["seed"] = set.seed;
  doc["attempts"] = set.attempts;
  doc["sampled_buses"] = set.sampled_buses;
  doc["sampled_ends"] = set.sampled_ends;
  doc["measurements"] = std::move(rows);
  return doc.dump(2) + "\n";
}

MeasurementSet parse_measurement_set(const NetworkModel& net, std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("measurement document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("measurements") || !doc["measurements"].is_array()) {
    throw ParseError("measurement document: expected an object with a 'measurements' array");
  }
  MeasurementSet set;
  try {
    const auto pref = parse_preference(doc.value("preference", std::string("nodal")));
    if (!pref) throw ParseError("measurement document: unknown preference");
    set.preference = *pref;
    set.fractions = {doc.value("node_fraction", 0.0), doc.value("flow_fraction", 0.0)};
    set.seed = doc.value("seed", std::uint64_t{0});
    set.attempts = doc.value("attempts", 1);
    set.sampled_buses = doc.value("sampled_buses", 0);
    set.sampled_ends = doc.value("sampled_ends", 0);
    for (const auto& row : doc["measurements"]) {
      const auto kind = parse_measurement_kind(row.at("kind").get<std::string>());
      if (!kind) throw ParseError("measurement document: unknown kind '" + row.at("kind").get<std::string>() + "'");
      Measurement m;
      m.kind = *kind;
      m.target = resolve_target(net, *kind, row.at("target").get<std::string>());
      m.value = row.value("value", 0.0);
      m.weight = row.value("weight", 1.0);
      m.sigma = row.value("sigma", 0.0);
      if (is_virtual(m.kind) && m.value != 0.0) {
        throw ParseError("measurement document: virtual row " + std::string(to_string(m.kind)) + " must have value 0");
      }
      if (!(m.weight >= 0.0)) throw ParseError("measurement document: weights must be non-negative");
      set.measurements.push_back(m);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("measurement document: ") + e.what());
  }
  return set;
}

MeasurementSet read_measurement_set(const NetworkModel& net, const std::filesystem::path& path) {
  return parse_measurement_set(net, read_text_file(path));
}

}  // namespace dsse
