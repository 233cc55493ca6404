#pragma once

// Shared test machinery: dense reference constructions (kept independent of
// the library's reduced-basis path), finite-difference helpers, and random
// instance generators.

#include <Eigen/Dense>

#include <random>
#include <utility>
#include <vector>

#include "vreml/graph.hpp"
#include "vreml/model.hpp"
#include "vreml/simulate.hpp"
#include "vreml/subspace.hpp"
#include "vreml/vreml.hpp"

namespace vreml::testing {

inline Eigen::MatrixXd dense_laplacian(const AdjacencyGraph& graph) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(graph.n, graph.n);
  for (const auto& [i, j] : graph.edges) {
    w(i, j) = 1.0;
    w(j, i) = 1.0;
  }
  Eigen::MatrixXd d = w.rowwise().sum().asDiagonal();
  return d - w;
}

inline Eigen::MatrixXd dense_projection(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd gram = x.transpose() * x;
  return Eigen::MatrixXd::Identity(x.rows(), x.rows()) -
         x * gram.ldlt().solve(x.transpose());
}

inline Eigen::MatrixXd centering_matrix(int n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
}

// Pseudo-inverse of C A C on the sum-to-zero subspace via a full
// eigendecomposition; the dense oracle for constrained inverses.
struct DenseConstrainedInverse {
  Eigen::MatrixXd sigma;
  double log_pseudo_det = 0.0;

  explicit DenseConstrainedInverse(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const Eigen::MatrixXd c = centering_matrix(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c * a * c);
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double cutoff = 1e-10 * values.cwiseAbs().maxCoeff();
    sigma = Eigen::MatrixXd::Zero(n, n);
    log_pseudo_det = 0.0;
    for (int i = 0; i < n; ++i) {
      if (values[i] > cutoff) {
        sigma.noalias() +=
            eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose() / values[i];
        log_pseudo_det -= std::log(values[i]);
      }
    }
  }
};

// Random connected graph: a random spanning tree plus extra random edges.
inline AdjacencyGraph random_connected_graph(int n, std::mt19937& rng, double extra_edges = 0.5) {
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    edges.emplace_back(pick(rng), v);
  }
  std::uniform_int_distribution<int> node(0, n - 1);
  const int extras = static_cast<int>(extra_edges * n);
  for (int k = 0; k < extras; ++k) {
    const int i = node(rng);
    const int j = node(rng);
    if (i != j) edges.emplace_back(i, j);
  }
  return AdjacencyGraph::from_edges(n, std::move(edges));
}

// Random symmetric matrix that is positive definite on E and annihilates 1.
inline Eigen::MatrixXd random_spd_on_e(int n, std::mt19937& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = normal(rng);
  Eigen::MatrixXd spd = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd c = centering_matrix(n);
  return c * spd * c;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline Eigen::VectorXd random_zero_sum(int n, std::mt19937& rng) {
  Eigen::VectorXd v = random_vector(n, rng);
  return v.array() - v.mean();
}

// A simulation instance at the study defaults, keyed by seed.
inline SimDraw lattice_instance(int n0, std::uint64_t seed) {
  SimConfig config;
  config.n0 = n0;
  config.seed = seed;
  config.n_sim = 1;
  return generate(config, 0);
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace vreml::testing
