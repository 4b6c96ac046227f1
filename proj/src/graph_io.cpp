#include "reinforce/graph_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "reinforce/error.hpp"

namespace reinforce {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

std::size_t as_index(const json& v, std::string_view what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string(what) + " must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, std::string_view what) {
  if (!v.is_number()) throw ConfigError(std::string(what) + " must be a number");
  return v.get<double>();
}

}  // namespace

GraphSpec parse_graph(const json& doc, std::size_t max_vertices) {
  if (!doc.is_object()) throw ConfigError("graph description must be a JSON object");
  if (doc.contains("lattice")) {
    reject_unknown(doc, {"lattice", "pinning"}, "graph");
    const auto& lat = doc.at("lattice");
    if (!lat.is_object()) throw ConfigError("lattice must be an object");
    reject_unknown(lat, {"d", "n", "weight"}, "lattice");
    if (!lat.contains("d") || !lat.contains("n")) throw ConfigError("lattice needs d and n");
    const double weight = lat.contains("weight") ? as_real(lat.at("weight"), "lattice.weight") : 1.0;
    auto box = build_lattice_box(static_cast<int>(as_index(lat.at("d"), "lattice.d")),
                                 static_cast<int>(as_index(lat.at("n"), "lattice.n")), weight, max_vertices);
    GraphSpec spec{box.graph, std::nullopt, std::move(box)};
    if (doc.contains("pinning")) {
      std::vector<double> eps(spec.graph.n_vertices(), 0.0);
      for (const auto& p : doc.at("pinning")) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("pinning entries are [vertex, eps]");
        const auto i = as_index(p[0], "pinning vertex");
        if (i >= eps.size()) throw ConfigError("pinning vertex out of range");
        eps[i] = as_real(p[1], "pinning eps");
      }
      spec.pinning = std::move(eps);
    }
    return spec;
  }

  reject_unknown(doc, {"vertices", "edges", "pinning"}, "graph");
  if (!doc.contains("vertices") || !doc.contains("edges")) {
    throw ConfigError("graph needs 'vertices' and 'edges' (or 'lattice')");
  }
  const auto n = as_index(doc.at("vertices"), "vertices");
  if (n > max_vertices) throw CapacityError("graph exceeds the vertex cap");
  std::vector<Edge> edges;
  for (const auto& e : doc.at("edges")) {
    if (!e.is_array() || (e.size() != 2 && e.size() != 3)) {
      throw ConfigError("edge entries are [i, j] or [i, j, weight]");
    }
    edges.push_back({as_index(e[0], "edge endpoint"), as_index(e[1], "edge endpoint"),
                     e.size() == 3 ? as_real(e[2], "edge weight") : 1.0});
  }
  GraphSpec spec{WeightedGraph(n, std::move(edges)), std::nullopt, std::nullopt};
  if (doc.contains("pinning")) {
    std::vector<double> eps(n, 0.0);
    for (const auto& p : doc.at("pinning")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("pinning entries are [vertex, eps]");
      const auto i = as_index(p[0], "pinning vertex");
      if (i >= n) throw ConfigError("pinning vertex out of range");
      eps[i] = as_real(p[1], "pinning eps");
    }
    spec.pinning = std::move(eps);
  }
  return spec;
}

GraphSpec parse_graph_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("graph JSON: ") + e.what());
  }
  return parse_graph(doc);
}

GraphSpec load_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph_text(buf.str());
}

json graph_to_json(const WeightedGraph& g, const std::optional<std::vector<double>>& pinning) {
  json doc;
  doc["vertices"] = g.n_vertices();
  doc["edges"] = json::array();
  for (const auto& e : g.edges()) doc["edges"].push_back({e.u, e.v, e.weight});
  if (pinning) {
    doc["pinning"] = json::array();
    for (std::size_t i = 0; i < pinning->size(); ++i) {
      if ((*pinning)[i] > 0.0) doc["pinning"].push_back({i, (*pinning)[i]});
    }
  }
  return doc;
}

json lattice_shorthand(std::string_view text) {
  json lat = json::object();
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const auto item = text.substr(pos, comma - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("lattice shorthand expects key=value pairs");
    const std::string key(item.substr(0, eq));
    const std::string value(item.substr(eq + 1));
    if (key == "d" || key == "n") {
      int v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size()) {
        throw ConfigError("lattice " + key + " must be an integer");
      }
      lat[key] = v;
    } else if (key == "weight") {
      try {
        std::size_t used = 0;
        lat[key] = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError("lattice weight must be a number");
      }
    } else {
      throw ConfigError("unknown lattice key '" + key + "'");
    }
    pos = comma + 1;
  }
  return json{{"lattice", lat}};
}

}  // namespace reinforce
