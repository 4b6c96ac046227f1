#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reinforce/graph.hpp"

namespace reinforce {

// Parsed graph description. Lattice shorthand also fills `lattice`.
struct GraphSpec {
  WeightedGraph graph;
  std::optional<std::vector<double>> pinning;  // eps per vertex, zeros where absent
  std::optional<LatticeBox> lattice;
};

// {vertices: N, edges: [[i,j,w],...], pinning: [[i,eps],...]}
// or {lattice: {d, n, weight}}. Unknown keys are rejected.
GraphSpec parse_graph(const nlohmann::json& doc, std::size_t max_vertices = kDefaultVertexCap);
GraphSpec parse_graph_text(std::string_view text);
GraphSpec load_graph_file(const std::filesystem::path& path);

nlohmann::json graph_to_json(const WeightedGraph& g, const std::optional<std::vector<double>>& pinning = {});

// "d=1,n=2[,weight=w]" as accepted on the command line.
nlohmann::json lattice_shorthand(std::string_view text);

}  // namespace reinforce
