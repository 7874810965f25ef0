#include <nlohmann/json.hpp>

#include "dsse/error.hpp"
#include "dsse/io.hpp"
#include "dsse/powerflow.hpp"

namespace dsse {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

std::pair<double, double> read_pair(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ParseError(where + ": expected [p, q]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

std::string dump_dispatch(const NetworkModel& net, const Dispatch& d) {
  json doc = json::object();
  for (int b : net.rooted_order()) {
    if (b == net.slack()) continue;
    doc[net.buses()[b].id] = json::array({d.inj_p[b], d.inj_q[b]});
  }
  return doc.dump(2) + "\n";
}

Dispatch parse_dispatch(const NetworkModel& net, std::string_view text) {
  const json doc = parse_json(text, "dispatch document");
  if (!doc.is_object()) throw ParseError("dispatch document: top level must be an object");
  Dispatch d;
  d.inj_p.assign(net.bus_count(), 0.0);
  d.inj_q.assign(net.bus_count(), 0.0);
  std::vector<char> seen(net.bus_count(), 0);
  for (const auto& [id, value] : doc.items()) {
    const int b = net.find_bus(id);
    if (b < 0) throw ReferenceError("dispatch document: unknown bus '" + id + "'");
    const auto [p, q] = read_pair(value, "dispatch entry '" + id + "'");
    d.inj_p[b] = p;
    d.inj_q[b] = q;
    seen[b] = 1;
  }
  for (int b = 0; b < net.bus_count(); ++b) {
    if (b != net.slack() && !seen[b]) {
      throw ParseError("dispatch document: no entry for bus '" + net.buses()[b].id + "'");
    }
  }
  d.inj_p[net.slack()] = 0.0;
  d.inj_q[net.slack()] = 0.0;
  return d;
}

Dispatch read_dispatch(const NetworkModel& net, const std::filesystem::path& path) {
  return parse_dispatch(net, read_text_file(path));
}

std::string dump_solution(const NetworkModel& net, const PowerFlowSolution& s) {
  json v_sq = json::object();
  for (int b : net.rooted_order()) v_sq[net.buses()[b].id] = s.v_sq[b];
  json flows = json::object();
  for (int k = 0; k < net.line_count(); ++k) {
    const Line& line = net.lines()[k];
    const int fwd = net.end_from(k, line.from);
    const int rev = net.end_from(k, line.to);
    flows[line.id] = {{"forward", json::array({s.flow_p[fwd], s.flow_q[fwd]})},
                      {"reverse", json::array({s.flow_p[rev], s.flow_q[rev]})}};
  }
  json doc;
  doc["v_sq"] = std::move(v_sq);
  doc["flows"] = std::move(flows);
  doc["method"] = std::string(to_string(s.method));
  doc["converged"] = s.converged;
  doc["iterations"] = s.iterations;
  return doc.dump(2) + "\n";
}

PowerFlowSolution parse_solution(const NetworkModel& net, std::string_view text) {
  const json doc = parse_json(text, "solution document");
  if (!doc.is_object()) throw ParseError("solution document: top level must be an object");
  PowerFlowSolution s;
  s.v_sq.assign(net.bus_count(), 0.0);
  s.flow_p.assign(net.end_count(), 0.0);
  s.flow_q.assign(net.end_count(), 0.0);

  const auto v = doc.find("v_sq");
  const auto f = doc.find("flows");
  if (v == doc.end() || !v->is_object()) throw ParseError("solution document: 'v_sq' must be an object");
  if (f == doc.end() || !f->is_object()) throw ParseError("solution document: 'flows' must be an object");
  std::vector<char> bus_seen(net.bus_count(), 0);
  for (const auto& [id, value] : v->items()) {
    const int b = net.find_bus(id);
    if (b < 0) throw ReferenceError("solution document: unknown bus '" + id + "'");
    if (!value.is_number()) throw ParseError("solution document: v_sq of '" + id + "' must be a number");
    s.v_sq[b] = value.get<double>();
    bus_seen[b] = 1;
  }
  std::vector<char> line_seen(net.line_count(), 0);
  for (const auto& [id, value] : f->items()) {
    const int k = net.find_line(id);
    if (k < 0) throw ReferenceError("solution document: unknown line '" + id + "'");
    if (!value.is_object() || !value.contains("forward") || !value.contains("reverse")) {
      throw ParseError("solution document: flows of '" + id + "' need 'forward' and 'reverse'");
    }
    const Line& line = net.lines()[k];
    const auto [pf, qf] = read_pair(value["forward"], "flow '" + id + "'");
    const auto [pr, qr] = read_pair(value["reverse"], "flow '" + id + "'");
    const int fwd = net.end_from(k, line.from);
    const int rev = net.end_from(k, line.to);
    s.flow_p[fwd] = pf;
    s.flow_q[fwd] = qf;
    s.flow_p[rev] = pr;
    s.flow_q[rev] = qr;
    line_seen[k] = 1;
  }
  for (int b = 0; b < net.bus_count(); ++b) {
    if (!bus_seen[b]) throw ParseError("solution document: no v_sq for bus '" + net.buses()[b].id + "'");
  }
  for (int k = 0; k < net.line_count(); ++k) {
    if (!line_seen[k]) throw ParseError("solution document: no flows for line '" + net.lines()[k].id + "'");
  }
  const std::string method = doc.value("method", std::string("exact"));
  if (method == "exact") {
    s.method = FlowMethod::exact;
  } else if (method == "linear") {
    s.method = FlowMethod::linear;
  } else if (method == "estimate") {
    s.method = FlowMethod::estimate;
  } else {
    throw ParseError("solution document: unknown method '" + method + "'");
  }
  s.converged = doc.value("converged", true);
  s.iterations = doc.value("iterations", 0);
  return s;
}

PowerFlowSolution read_solution(const NetworkModel& net, const std::filesystem::path& path) {
  return parse_solution(net, read_text_file(path));
}

}  // namespace dsse
