#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "test_support.hpp"
#include "vreml/errors.hpp"
#include "vreml/graph.hpp"

using namespace vreml;
namespace vt = vreml::testing;

TEST_CASE("path graph n=2 gives the 2x2 difference Laplacian") {
  const auto g = AdjacencyGraph::from_edges(2, {{0, 1}});
  const IcarStructure icar = build_icar(g);
  Eigen::MatrixXd r = Eigen::MatrixXd(icar.laplacian());
  CHECK(r(0, 0) == doctest::Approx(1.0));
  CHECK(r(0, 1) == doctest::Approx(-1.0));
  CHECK(r(1, 0) == doctest::Approx(-1.0));
  CHECK(r(1, 1) == doctest::Approx(1.0));
  CHECK(icar.rank_deficiency == 1);
}

TEST_CASE("4-cycle has all degrees 2 and is connected") {
  const auto g = AdjacencyGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  const IcarStructure icar = build_icar(g);
  CHECK(icar.degrees.minCoeff() == doctest::Approx(2.0));
  CHECK(icar.degrees.maxCoeff() == doctest::Approx(2.0));
  Eigen::MatrixXd r = Eigen::MatrixXd(icar.laplacian());
  for (int i = 0; i < 4; ++i) CHECK(r(i, i) == doctest::Approx(2.0));
  CHECK(icar.rank_deficiency == 1);
}

TEST_CASE("two disjoint edges have rank deficiency 2") {
  const auto g = AdjacencyGraph::from_edges(4, {{0, 1}, {2, 3}});
  const IcarStructure icar = build_icar(g);
  CHECK(icar.num_components == 2);
  CHECK(icar.rank_deficiency == 2);
  CHECK(!icar.connected());
}

TEST_CASE("graph construction errors") {
  CHECK_THROWS_WITH_AS(build_icar(AdjacencyGraph{}), doctest::Contains("EmptyGraph"), Error);
  CHECK_THROWS_WITH_AS(build_icar(AdjacencyGraph{3, {}}), doctest::Contains("NoEdges"), Error);
  CHECK_THROWS_AS(AdjacencyGraph::from_edges(3, {{0, 0}}), Error);
  CHECK_THROWS_AS(AdjacencyGraph::from_edges(3, {{0, 5}}), Error);
  CHECK_THROWS_AS(AdjacencyGraph::from_edges(3, {{-1, 1}}), Error);
}

TEST_CASE("edge lists are canonicalised") {
  const auto g = AdjacencyGraph::from_edges(4, {{2, 1}, {1, 2}, {3, 0}, {0, 3}, {1, 0}});
  CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 3}, {1, 2}});
}

TEST_CASE("2x2 rook lattice is a 4-cycle") {
  const AdjacencyGraph g = lattice_graph(2);
  CHECK(g.n == 4);
  CHECK(g.num_edges() == 4);
}

TEST_CASE("3x3 rook lattice degrees and edge count") {
  const IcarStructure icar = build_icar(lattice_graph(3));
  // corners 2, edge midpoints 3, center 4
  CHECK(icar.degrees[0] == doctest::Approx(2.0));
  CHECK(icar.degrees[1] == doctest::Approx(3.0));
  CHECK(icar.degrees[4] == doctest::Approx(4.0));
  CHECK(static_cast<int>(icar.edges.size()) == 12);
}

TEST_CASE("queen lattice adds diagonal contiguity") {
  const AdjacencyGraph rook = lattice_graph(3, AdjacencyScheme::rook);
  const AdjacencyGraph queen = lattice_graph(3, AdjacencyScheme::queen);
  CHECK(queen.num_edges() == rook.num_edges() + 8);
  CHECK_THROWS_AS(lattice_graph(1), Error);
}

TEST_CASE("edge-wise quadratic form matches the by-hand value") {
  const IcarStructure icar = build_icar(AdjacencyGraph::from_edges(3, {{0, 1}, {1, 2}}));
  Eigen::Vector3d v(-1.0, 0.0, 1.0);
  CHECK(quadratic_form(icar, v) == doctest::Approx(2.0));
  CHECK(quadratic_form(icar, Eigen::Vector3d::Constant(3.7)) == doctest::Approx(0.0));
  CHECK_THROWS_AS(quadratic_form(icar, Eigen::Vector2d(1.0, 2.0)), Error);
}

TEST_CASE("quadratic form equals the dense form on random graphs") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> size(2, 200);
    const int n = size(rng);
    const AdjacencyGraph g = vt::random_connected_graph(n, rng);
    const IcarStructure icar = build_icar(g);
    const Eigen::MatrixXd dense = vt::dense_laplacian(g);
    const Eigen::VectorXd v = vt::random_vector(n, rng);
    const double direct = quadratic_form(icar, v);
    const double reference = v.dot(dense * v);
    CHECK(std::abs(direct - reference) <= 1e-12 * std::max(1.0, std::abs(reference)));
    CHECK(direct >= 0.0);
    CHECK(quadratic_form(icar, Eigen::VectorXd::Ones(n)) == doctest::Approx(0.0));
    CHECK((icar.apply(v) - dense * v).norm() <= 1e-11 * std::max(1.0, v.norm()));
  }
}

TEST_CASE("component count equals the Laplacian rank deficit") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    std::uniform_int_distribution<int> size(4, 100);
    const int n = size(rng);
    // splice two independent connected graphs with a coin-flip bridge
    const AdjacencyGraph a = vt::random_connected_graph(n / 2, rng);
    const AdjacencyGraph b = vt::random_connected_graph(n - n / 2, rng);
    std::vector<std::pair<int, int>> edges = a.edges;
    for (const auto& [i, j] : b.edges) edges.emplace_back(i + a.n, j + a.n);
    const bool bridged = trial % 2 == 0;
    if (bridged) edges.emplace_back(0, a.n);
    const IcarStructure icar = build_icar(AdjacencyGraph::from_edges(n, std::move(edges)));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        vt::dense_laplacian(AdjacencyGraph{n, icar.edges}));
    const double cutoff = 1e-9 * std::max(1.0, eig.eigenvalues().maxCoeff());
    int rank = 0;
    for (int i = 0; i < n; ++i)
      if (eig.eigenvalues()[i] > cutoff) ++rank;
    CHECK(icar.num_components == n - rank);
    CHECK(icar.num_components == (bridged ? 1 : 2));
  }
}

TEST_CASE("reduced Laplacian log-determinant is basis invariant") {
  const IcarStructure icar = build_icar(lattice_graph(4));
  const double helmert = laplacian_log_pseudo_det(icar, make_basis(icar.n()));
  const double eigen = laplacian_log_pseudo_det(icar, make_eigen_basis(icar.n()));
  CHECK(helmert == doctest::Approx(eigen).epsilon(1e-10));
}
