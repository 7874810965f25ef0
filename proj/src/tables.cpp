#include <algorithm>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "dsse/harness.hpp"
#include "dsse/io.hpp"

namespace dsse {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw ParseError("grid config: " + msg); }

double number(const json& v, const char* key) {
  if (!v.is_number()) bad(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> level_list(const json& v, const char* key) {
  if (!v.is_array() || v.empty()) bad(std::string("'") + key + "' must be a non-empty array");
  std::vector<double> out;
  for (const auto& x : v) {
    const double e = number(x, key);
    if (!(e >= 0.0 && e <= 0.05)) bad(std::string("'") + key + "' values must lie in [0, 0.05]");
    out.push_back(e);
  }
  return out;
}

std::pair<double, double> range(const json& v, const char* key) {
  if (!v.is_array() || v.size() != 2) bad(std::string("'") + key + "' must be [min, max]");
  const double lo = number(v[0], key);
  const double hi = number(v[1], key);
  if (lo > hi) bad(std::string("'") + key + "' has min above max");
  return {lo, hi};
}

Fractions fraction_pair(const json& v, const char* key) {
  const auto [node, flow] = [&] {
    if (!v.is_array() || v.size() != 2) bad(std::string("fractions '") + key + "' must be [node, flow]");
    return std::pair{number(v[0], key), number(v[1], key)};
  }();
  if (!(node >= 0.0 && node <= 1.0 && flow >= 0.0 && flow <= 1.0)) {
    bad(std::string("fractions '") + key + "' must lie in [0, 1]");
  }
  return {node, flow};
}

std::string percent_label(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", e * 100.0);
  return buf;
}

std::string cell_text(const GridCell* c, TableStat stat) {
  if (!c || !c->stats) return "FAILED";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", stat_value(*c->stats, stat) * 100.0);
  return buf;
}

std::vector<std::vector<std::string>> table_cells(const GridResult& r, TableStat stat, Preference p) {
  const auto& cfg = r.config;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"e_i\\e_v"};
  for (double e_v : cfg.e_v_list) head.push_back(percent_label(e_v));
  rows.push_back(std::move(head));
  for (double e_i : cfg.e_i_list) {
    std::vector<std::string> row{percent_label(e_i)};
    for (double e_v : cfg.e_v_list) row.push_back(cell_text(r.find(e_v, e_i, p), stat));
    rows.push_back(std::move(row));
  }
  return rows;
}

json grid_config_json(const GridConfig& cfg) {
  const auto& b = cfg.base;
  json prefs = json::array();
  for (auto p : cfg.preferences) prefs.push_back(std::string(to_string(p)));
  json fractions = json::object();
  if (cfg.nodal_fractions) fractions["nodal"] = {cfg.nodal_fractions->node, cfg.nodal_fractions->flow};
  if (cfg.edge_fractions) fractions["edge"] = {cfg.edge_fractions->node, cfg.edge_fractions->flow};
  json doc;
  doc["e_v_list"] = cfg.e_v_list;
  doc["e_i_list"] = cfg.e_i_list;
  doc["preferences"] = std::move(prefs);
  doc["dispatch_count"] = b.dispatch_count;
  doc["master_seed"] = b.master_seed;
  doc["fractions"] = std::move(fractions);
  doc["postfilter"] = b.postfilter;
  doc["postfilter_threshold"] = b.postfilter_threshold;
  doc["normalization"] = std::string(to_string(b.normalization));
  doc["distribution"] = std::string(to_string(b.distribution));
  doc["gaussian_sigma_factor"] = b.gaussian_sigma_factor;
  doc["max_resamples"] = b.selection.max_resamples;
  doc["outlier_factor"] = b.outlier_factor;
  doc["truth"] = std::string(to_string(b.truth));
  doc["load_scale"] = {b.dispatch.load_scale_min, b.dispatch.load_scale_max};
  doc["dg_scale"] = {b.dispatch.dg_scale_min, b.dispatch.dg_scale_max};
  doc["power_factor"] = b.dispatch.power_factor;
  return doc;
}

}  // namespace

GridConfig parse_grid_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(e.what());
  }
  if (!doc.is_object()) bad("top level must be an object");

  GridConfig cfg;
  auto& b = cfg.base;
  for (const auto& [key, v] : doc.items()) {
    if (key == "e_v_list") {
      cfg.e_v_list = level_list(v, "e_v_list");
    } else if (key == "e_i_list") {
      cfg.e_i_list = level_list(v, "e_i_list");
    } else if (key == "preferences") {
      if (!v.is_array() || v.empty()) bad("'preferences' must be a non-empty array");
      cfg.preferences.clear();
      for (const auto& x : v) {
        const auto p = x.is_string() ? parse_preference(x.get<std::string>()) : std::nullopt;
        if (!p) bad("unknown preference " + x.dump());
        cfg.preferences.push_back(*p);
      }
    } else if (key == "dispatch_count") {
      if (!v.is_number_integer() || v.get<long long>() < 1) bad("'dispatch_count' must be a positive integer");
      b.dispatch_count = v.get<int>();
    } else if (key == "master_seed") {
      if (!v.is_number_unsigned()) bad("'master_seed' must be a non-negative integer");
      b.master_seed = v.get<std::uint64_t>();
    } else if (key == "fractions") {
      if (!v.is_object()) bad("'fractions' must be an object");
      for (const auto& [name, f] : v.items()) {
        if (name == "nodal") {
          cfg.nodal_fractions = fraction_pair(f, "nodal");
        } else if (name == "edge") {
          cfg.edge_fractions = fraction_pair(f, "edge");
        } else {
          bad("unknown fractions entry '" + name + "'");
        }
      }
    } else if (key == "postfilter") {
      if (!v.is_boolean()) bad("'postfilter' must be true or false");
      b.postfilter = v.get<bool>();
    } else if (key == "postfilter_threshold") {
      b.postfilter_threshold = number(v, "postfilter_threshold");
      if (!(b.postfilter_threshold >= 0.0)) bad("'postfilter_threshold' must be non-negative");
    } else if (key == "normalization") {
      const auto n = v.is_string() ? parse_normalization(v.get<std::string>()) : std::nullopt;
      if (!n) bad("unknown normalization " + v.dump());
      b.normalization = *n;
    } else if (key == "distribution") {
      if (v == "uniform") {
        b.distribution = NoiseDistribution::uniform;
      } else if (v == "gaussian") {
        b.distribution = NoiseDistribution::gaussian;
      } else {
        bad("unknown distribution " + v.dump());
      }
    } else if (key == "gaussian_sigma_factor") {
      b.gaussian_sigma_factor = number(v, "gaussian_sigma_factor");
      if (!(b.gaussian_sigma_factor > 0.0)) bad("'gaussian_sigma_factor' must be positive");
    } else if (key == "max_resamples") {
      if (!v.is_number_integer() || v.get<long long>() < 0) bad("'max_resamples' must be a non-negative integer");
      b.selection.max_resamples = v.get<int>();
    } else if (key == "outlier_factor") {
      b.outlier_factor = number(v, "outlier_factor");
      if (!(b.outlier_factor > 0.0)) bad("'outlier_factor' must be positive");
    } else if (key == "truth") {
      if (v == "exact") {
        b.truth = FlowMethod::exact;
      } else if (v == "linear") {
        b.truth = FlowMethod::linear;
      } else {
        bad("'truth' must be \"exact\" or \"linear\"");
      }
    } else if (key == "load_scale") {
      std::tie(b.dispatch.load_scale_min, b.dispatch.load_scale_max) = range(v, "load_scale");
    } else if (key == "dg_scale") {
      std::tie(b.dispatch.dg_scale_min, b.dispatch.dg_scale_max) = range(v, "dg_scale");
    } else if (key == "power_factor") {
      b.dispatch.power_factor = number(v, "power_factor");
      if (!(b.dispatch.power_factor > 0.0 && b.dispatch.power_factor <= 1.0)) bad("'power_factor' must lie in (0, 1]");
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  return cfg;
}

GridConfig read_grid_config(const std::filesystem::path& path) { return parse_grid_config(read_text_file(path)); }

std::string dump_grid_config(const GridConfig& cfg) { return grid_config_json(cfg).dump(2) + "\n"; }

std::string_view to_string(TableStat s) {
  switch (s) {
    case TableStat::mean_v:
      return "mean_v";
    case TableStat::mean_f:
      return "mean_f";
    case TableStat::max_v:
      return "max_v";
    case TableStat::max_f:
      return "max_f";
  }
  return "?";
}

double stat_value(const ScenarioStats& s, TableStat stat) {
  switch (stat) {
    case TableStat::mean_v:
      return s.avg_of_mean_v;
    case TableStat::mean_f:
      return s.avg_of_mean_f;
    case TableStat::max_v:
      return s.avg_of_max_v;
    case TableStat::max_f:
      return s.avg_of_max_f;
  }
  return 0.0;
}

std::string render_table_csv(const GridResult& r, TableStat stat, Preference p) {
  std::string out;
  for (const auto& row : table_cells(r, stat, p)) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += row[k];
    }
    out += '\n';
  }
  return out;
}

std::string render_table_markdown(const GridResult& r, TableStat stat, Preference p) {
  const auto rows = table_cells(r, stat, p);
  std::vector<std::size_t> width(rows.front().size(), 3);
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string s = "|";
    for (std::size_t k = 0; k < row.size(); ++k) {
      const auto pad = width[k] - row[k].size();
      // Row labels left aligned, numbers right aligned.
      s += ' ' + (k == 0 ? row[k] + std::string(pad, ' ') : std::string(pad, ' ') + row[k]) + " |";
    }
    return s + '\n';
  };
  std::string out = "Table " + std::string(to_string(stat)) + " (" + std::string(to_string(p)) +
                    " preference), percent\n\n";
  out += line(rows[0]);
  out += '|';
  for (std::size_t k = 0; k < width.size(); ++k) {
    out += k == 0 ? ' ' + std::string(width[k], '-') + " |" : ' ' + std::string(width[k] - 1, '-') + ": |";
  }
  out += '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) out += line(rows[i]);
  return out;
}

std::string render_sidecar(const GridResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    json cell;
    cell["e_v"] = c.e_v;
    cell["e_i"] = c.e_i;
    cell["preference"] = std::string(to_string(c.preference));
    if (c.stats) {
      const auto& s = *c.stats;
      cell["runs"] = s.runs;
      cell["failures"] = s.failures;
      cell["avg_of_mean_v"] = s.avg_of_mean_v;
      cell["avg_of_mean_f"] = s.avg_of_mean_f;
      cell["avg_of_max_v"] = s.avg_of_max_v;
      cell["avg_of_max_f"] = s.avg_of_max_f;
      cell["half_width"] = {{"mean_v", s.hw_mean_v}, {"mean_f", s.hw_mean_f}, {"max_v", s.hw_max_v},
                            {"max_f", s.hw_max_f}};
      cell["median_outliers"] = s.median_outliers;
      cell["first_draw_observable"] = s.first_draw_observable;
    } else {
      cell["error"] = c.error;
    }
    cells.push_back(std::move(cell));
  }
  json doc;
  doc["config"] = grid_config_json(r.config);
  doc["complete"] = r.complete();
  doc["cells"] = std::move(cells);
  return doc.dump(2) + "\n";
}

void write_grid(const GridResult& r, const std::filesystem::path& dir) {
  const auto tables = dir / "tables";
  std::error_code ec;
  std::filesystem::create_directories(tables, ec);
  if (ec) throw Error("cannot create '" + tables.string() + "': " + ec.message());
  // Only the preferences that were run get tables.
  std::set<Preference> prefs(r.config.preferences.begin(), r.config.preferences.end());
  for (auto p : prefs) {
    for (auto stat : {TableStat::mean_v, TableStat::mean_f, TableStat::max_v, TableStat::max_f}) {
      const std::string stem = "table_" + std::string(to_string(stat)) + "_" + std::string(to_string(p));
      write_file_atomic(tables / (stem + ".csv"), render_table_csv(r, stat, p));
      write_file_atomic(tables / (stem + ".md"), render_table_markdown(r, stat, p));
    }
  }
  write_file_atomic(dir / "sidecar.json", render_sidecar(r));
}

}  // namespace dsse
