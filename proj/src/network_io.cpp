#include <nlohmann/json.hpp>

#include "dsse/error.hpp"
#include "dsse/io.hpp"
#include "dsse/network.hpp"

namespace dsse {

using nlohmann::json;

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": key '" + key + "' has the wrong type");
  }
}

BusKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "slack") return BusKind::slack;
  if (s == "pq") return BusKind::pq;
  throw ParseError(where + ": unknown bus kind '" + s + "'");
}

}  // namespace

NetworkData parse_network_data(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("network document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("network document: top level must be an object");

  NetworkData data;
  data.name = doc.value("name", std::string{});
  data.base_mva = required<double>(doc, "base_mva", "network document");
  data.base_kv = doc.contains("base_kv") ? required<double>(doc, "base_kv", "network document") : 4.16;

  const auto buses = doc.find("buses");
  const auto lines = doc.find("lines");
  if (buses == doc.end() || !buses->is_array()) throw ParseError("network document: 'buses' must be an array");
  if (lines == doc.end() || !lines->is_array()) throw ParseError("network document: 'lines' must be an array");

  for (std::size_t i = 0; i < buses->size(); ++i) {
    const auto& b = (*buses)[i];
    const std::string where = "bus #" + std::to_string(i);
    if (!b.is_object()) throw ParseError(where + ": must be an object");
    BusRecord rec;
    rec.id = required<std::string>(b, "id", where);
    rec.kind = parse_kind(required<std::string>(b, "kind", where), where);
    rec.load_p_kw = b.contains("load_p_kw") ? required<double>(b, "load_p_kw", where) : 0.0;
    rec.load_q_kvar = b.contains("load_q_kvar") ? required<double>(b, "load_q_kvar", where) : 0.0;
    rec.dg_p_kw = b.contains("dg_p_kw") ? required<double>(b, "dg_p_kw", where) : 0.0;
    data.buses.push_back(std::move(rec));
  }
  for (std::size_t i = 0; i < lines->size(); ++i) {
    const auto& l = (*lines)[i];
    const std::string where = "line #" + std::to_string(i);
    if (!l.is_object()) throw ParseError(where + ": must be an object");
    LineRecord rec;
    rec.id = required<std::string>(l, "id", where);
    rec.from = required<std::string>(l, "from", where);
    rec.to = required<std::string>(l, "to", where);
    rec.r_ohm = required<double>(l, "r_ohm", where);
    rec.x_ohm = required<double>(l, "x_ohm", where);
    data.lines.push_back(std::move(rec));
  }
  return data;
}

NetworkData read_network_data(const std::filesystem::path& path) {
  return parse_network_data(read_text_file(path));
}

NetworkModel load_network(const std::filesystem::path& path) {
  auto data = read_network_data(path);
  if (data.name.empty()) data.name = path.stem().string();
  return NetworkModel(std::move(data));
}

std::string dump_network(const NetworkData& data) {
  json doc;
  if (!data.name.empty()) doc["name"] = data.name;
  doc["base_mva"] = data.base_mva;
  doc["base_kv"] = data.base_kv;
  json buses = json::array();
  for (const auto& b : data.buses) {
    buses.push_back({{"id", b.id},
                     {"kind", std::string(to_string(b.kind))},
                     {"load_p_kw", b.load_p_kw},
                     {"load_q_kvar", b.load_q_kvar},
                     {"dg_p_kw", b.dg_p_kw}});
  }
  json lines = json::array();
  for (const auto& l : data.lines) {
    lines.push_back({{"id", l.id}, {"from", l.from}, {"to", l.to}, {"r_ohm", l.r_ohm}, {"x_ohm", l.x_ohm}});
  }
  doc["buses"] = std::move(buses);
  doc["lines"] = std::move(lines);
  return doc.dump(2) + "\n";
}

void save_network(const NetworkModel& net, const std::filesystem::path& path) {
  write_file_atomic(path, dump_network(net.data()));
}

}  // namespace dsse
