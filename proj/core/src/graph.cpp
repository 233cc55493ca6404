#include "vreml/graph.hpp"

#include <algorithm>
#include <string>

#include "vreml/errors.hpp"

namespace vreml {

AdjacencyGraph AdjacencyGraph::from_edges(int n, std::vector<std::pair<int, int>> edges) {
  if (n <= 0) raise(Errc::empty_graph, "graph has no nodes");
  for (auto& [i, j] : edges) {
    if (i == j) raise(Errc::dimension_mismatch, "self-loop at node " + std::to_string(i));
    if (i < 0 || j < 0 || i >= n || j >= n)
      raise(Errc::dimension_mismatch,
            "edge (" + std::to_string(i) + "," + std::to_string(j) + ") outside [0," +
                std::to_string(n) + ")");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return AdjacencyGraph{n, std::move(edges)};
}

namespace {

int count_components(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const auto& [i, j] : edges) {
    adj[static_cast<size_t>(i)].push_back(j);
    adj[static_cast<size_t>(j)].push_back(i);
  }
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<int> stack;
  int components = 0;
  for (int s = 0; s < n; ++s) {
    if (seen[static_cast<size_t>(s)]) continue;
    ++components;
    stack.push_back(s);
    seen[static_cast<size_t>(s)] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[static_cast<size_t>(v)]) {
        if (!seen[static_cast<size_t>(w)]) {
          seen[static_cast<size_t>(w)] = 1;
          stack.push_back(w);
        }
      }
    }
  }
  return components;
}

}  // namespace

IcarStructure build_icar(const AdjacencyGraph& g) {
  if (g.n == 0) raise(Errc::empty_graph, "graph has no nodes");
  if (g.n >= 2 && g.edges.empty())
    raise(Errc::no_edges, "graph with " + std::to_string(g.n) + " nodes has no edges");

  IcarStructure icar;
  icar.edges = g.edges;
  icar.degrees = Eigen::VectorXd::Zero(g.n);
  for (const auto& [i, j] : g.edges) {
    icar.degrees[i] += 1.0;
    icar.degrees[j] += 1.0;
  }
  icar.num_components = count_components(g.n, g.edges);
  icar.rank_deficiency = icar.num_components;
  return icar;
}

Eigen::SparseMatrix<double> IcarStructure::laplacian() const {
  const int size = n();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2 + static_cast<size_t>(size));
  for (const auto& [i, j] : edges) {
    triplets.emplace_back(i, j, -1.0);
    triplets.emplace_back(j, i, -1.0);
  }
  for (int i = 0; i < size; ++i) triplets.emplace_back(i, i, degrees[i]);
  Eigen::SparseMatrix<double> r(size, size);
  r.setFromTriplets(triplets.begin(), triplets.end());
  r.makeCompressed();
  return r;
}

Eigen::VectorXd IcarStructure::apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != n()) raise(Errc::dimension_mismatch, "vector length does not match graph size");
  Eigen::VectorXd out = degrees.cwiseProduct(v);
  for (const auto& [i, j] : edges) {
    out[i] -= v[j];
    out[j] -= v[i];
  }
  return out;
}

AdjacencyGraph lattice_graph(int n0, AdjacencyScheme scheme) {
  if (n0 < 2) raise(Errc::invalid_config, "lattice side must be at least 2");
  const auto id = [n0](int row, int col) { return row * n0 + col; };
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(4 * n0 * n0));
  for (int row = 0; row < n0; ++row) {
    for (int col = 0; col < n0; ++col) {
      if (col + 1 < n0) edges.emplace_back(id(row, col), id(row, col + 1));
      if (row + 1 < n0) edges.emplace_back(id(row, col), id(row + 1, col));
      if (scheme == AdjacencyScheme::queen) {
        if (row + 1 < n0 && col + 1 < n0) edges.emplace_back(id(row, col), id(row + 1, col + 1));
        if (row + 1 < n0 && col > 0) edges.emplace_back(id(row, col), id(row + 1, col - 1));
      }
    }
  }
  return AdjacencyGraph::from_edges(n0 * n0, std::move(edges));
}

double quadratic_form(const IcarStructure& icar, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != icar.n())
    raise(Errc::dimension_mismatch, "vector length does not match graph size");
  double acc = 0.0;
  for (const auto& [i, j] : icar.edges) {
    const double d = v[i] - v[j];
    acc += d * d;
  }
  return acc;
}

Eigen::MatrixXd reduced_laplacian(const IcarStructure& icar, const SumToZeroBasis& basis) {
  if (basis.n() != icar.n()) raise(Errc::dimension_mismatch, "basis size does not match graph");
  const Eigen::MatrixXd& h = basis.matrix();
  Eigen::MatrixXd rh = icar.laplacian() * h;
  return h.transpose() * rh;
}

double laplacian_log_pseudo_det(const IcarStructure& icar, const SumToZeroBasis& basis) {
  Eigen::MatrixXd k = reduced_laplacian(icar, basis);
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success)
    raise(Errc::not_positive_definite_on_e,
          "Laplacian is singular on the sum-to-zero subspace (graph disconnected?)");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace vreml
