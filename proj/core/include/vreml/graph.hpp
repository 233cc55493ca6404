#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <utility>
#include <vector>

#include "vreml/subspace.hpp"

namespace vreml {

enum class AdjacencyScheme { rook, queen };

// Symmetric 0/1 neighbour structure over n areal units. Edges are unordered
// pairs held in canonical form: i < j, sorted lexicographically, no
// duplicates, no self-loops.
struct AdjacencyGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;

  // Validates and canonicalises an edge list. Duplicate edges collapse to one.
  static AdjacencyGraph from_edges(int n, std::vector<std::pair<int, int>> edges);

  int num_edges() const { return static_cast<int>(edges.size()); }
};

// Graph Laplacian structure R = D - W together with its connectivity
// certificate. The rank deficiency of R equals the number of connected
// components; fitting requires a connected graph (deficiency 1).
struct IcarStructure {
  std::vector<std::pair<int, int>> edges;  // canonical, drives edge-wise quadratic forms
  Eigen::VectorXd degrees;
  int num_components = 0;
  int rank_deficiency = 0;

  int n() const { return static_cast<int>(degrees.size()); }
  bool connected() const { return num_components == 1; }

  // R = D - W in compressed sparse column form (deterministic entry order).
  Eigen::SparseMatrix<double> laplacian() const;

  // R v without materialising R: (R v)_i = d_i v_i - sum_{j ~ i} v_j.
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
};

IcarStructure build_icar(const AdjacencyGraph& g);

// Regular n0 x n0 lattice; rook gives 4-neighbour contiguity, queen adds the
// diagonals. Node order is row-major.
AdjacencyGraph lattice_graph(int n0, AdjacencyScheme scheme = AdjacencyScheme::rook);

// v'Rv = sum over edges (v_i - v_j)^2, computed edge-wise.
double quadratic_form(const IcarStructure& icar, const Eigen::Ref<const Eigen::VectorXd>& v);

// H'RH, the Laplacian reduced onto the sum-to-zero subspace.
Eigen::MatrixXd reduced_laplacian(const IcarStructure& icar, const SumToZeroBasis& basis);

// log det(H'RH) = log of the pseudo-determinant of R for a connected graph.
double laplacian_log_pseudo_det(const IcarStructure& icar, const SumToZeroBasis& basis);

}  // namespace vreml
