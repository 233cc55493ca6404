#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "vreml/graph.hpp"
#include "vreml/ingest.hpp"

namespace vreml::io {

// Shortest round-trip decimal representation; every writer in the project
// uses this so outputs are byte-stable.
std::string format_double(double value);

// FNV-1a 64-bit digest of a file's bytes, hex-encoded (manifest entries).
std::string file_digest(const std::string& path);

// Matrix Market coordinate adjacency, pattern or 0/1 real/integer, symmetric
// or general (general input is validated for symmetry). Diagonal entries and
// weights outside {0, 1} are rejected.
AdjacencyGraph read_adjacency_matrix_market(const std::string& path);
void write_adjacency_matrix_market(const std::string& path, const AdjacencyGraph& graph);

// Edge-list CSV with header "i,j", 0-based; n is taken as max index + 1.
AdjacencyGraph read_adjacency_edge_csv(const std::string& path);

// Dispatch on extension (.mtx/.mm vs .csv) with a content sniff fallback.
AdjacencyGraph read_adjacency_auto(const std::string& path);

// Single-column CSV with header "y".
Eigen::VectorXd read_response_csv(const std::string& path);
void write_response_csv(const std::string& path, const Eigen::Ref<const Eigen::VectorXd>& y);

// Named-column numeric CSV, rows aligned with the adjacency node order.
Eigen::MatrixXd read_design_csv(const std::string& path,
                                std::vector<std::string>* names = nullptr);
void write_design_csv(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      const std::vector<std::string>& names);

// Point table CSV with columns x,y,count,library_size (any order).
CellTable read_cells_csv(const std::string& path);
void write_cells_csv(const std::string& path, const CellTable& cells);

}  // namespace vreml::io
