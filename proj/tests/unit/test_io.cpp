#include <doctest.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>

#include "test_support.hpp"
#include "vreml/errors.hpp"
#include "vreml/io.hpp"

using namespace vreml;
namespace fs = std::filesystem;
namespace vt = vreml::testing;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vreml_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("matrix market round trip preserves the graph") {
  TempDir dir;
  std::mt19937 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const AdjacencyGraph graph = vt::random_connected_graph(4 + 7 * trial, rng);
    const std::string path = dir.file("graph.mtx");
    io::write_adjacency_matrix_market(path, graph);
    const AdjacencyGraph back = io::read_adjacency_matrix_market(path);
    CHECK(back.n == graph.n);
    CHECK(back.edges == graph.edges);
    CHECK(io::read_adjacency_auto(path).edges == graph.edges);
  }
}

TEST_CASE("general matrix market input requires both orientations") {
  TempDir dir;
  const std::string good = dir.file("good.mtx");
  write_text(good,
             "%%MatrixMarket matrix coordinate real general\n"
             "3 3 4\n1 2 1.0\n2 1 1.0\n2 3 1.0\n3 2 1.0\n");
  const AdjacencyGraph graph = io::read_adjacency_matrix_market(good);
  CHECK(graph.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});

  const std::string lopsided = dir.file("lopsided.mtx");
  write_text(lopsided,
             "%%MatrixMarket matrix coordinate real general\n"
             "3 3 2\n1 2 1.0\n2 3 1.0\n");
  CHECK_THROWS_WITH_AS(io::read_adjacency_matrix_market(lopsided),
                       doctest::Contains("symmetric partner"), Error);
}

TEST_CASE("weighted entries and self-loops are rejected") {
  TempDir dir;
  const std::string weighted = dir.file("weighted.mtx");
  write_text(weighted,
             "%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n2 1 0.5\n");
  CHECK_THROWS_WITH_AS(io::read_adjacency_matrix_market(weighted),
                       doctest::Contains("weighted"), Error);

  const std::string loop = dir.file("loop.mtx");
  write_text(loop, "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 1\n2 2\n");
  CHECK_THROWS_WITH_AS(io::read_adjacency_matrix_market(loop), doctest::Contains("self-loop"),
                       Error);
}

TEST_CASE("edge-list csv adjacency") {
  TempDir dir;
  const std::string path = dir.file("edges.csv");
  write_text(path, "i,j\n0,1\n1,2\n2,3\n");
  const AdjacencyGraph graph = io::read_adjacency_edge_csv(path);
  CHECK(graph.n == 4);
  CHECK(graph.num_edges() == 3);
  CHECK(io::read_adjacency_auto(path).num_edges() == 3);

  const std::string bad = dir.file("bad.csv");
  write_text(bad, "a,b\n0,1\n");
  CHECK_THROWS_WITH_AS(io::read_adjacency_edge_csv(bad), doctest::Contains("header"), Error);
}

TEST_CASE("response and design csv round trips are exact") {
  TempDir dir;
  std::mt19937 rng(5);
  const Eigen::VectorXd y = vt::random_vector(17, rng);
  const std::string response = dir.file("response.csv");
  io::write_response_csv(response, y);
  CHECK(io::read_response_csv(response) == y);

  Eigen::MatrixXd x(9, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = vt::random_vector(1, rng)[0];
  const std::string design = dir.file("design.csv");
  io::write_design_csv(design, x, {"intercept", "a", "b"});
  std::vector<std::string> names;
  const Eigen::MatrixXd back = io::read_design_csv(design, &names);
  CHECK(back == x);
  CHECK(names == std::vector<std::string>{"intercept", "a", "b"});
}

TEST_CASE("cells csv accepts any column order and names missing columns") {
  TempDir dir;
  const std::string path = dir.file("cells.csv");
  write_text(path, "count,x,library_size,y\n3,0.5,100,0.25\n1,1.5,50,0.75\n");
  const CellTable table = io::read_cells_csv(path);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].x == doctest::Approx(0.5));
  CHECK(table.rows[0].count == doctest::Approx(3.0));
  CHECK(table.rows[1].library_size == doctest::Approx(50.0));

  const std::string missing = dir.file("missing.csv");
  write_text(missing, "x,y,count\n0,0,1\n");
  CHECK_THROWS_WITH_AS(io::read_cells_csv(missing), doctest::Contains("library_size"), Error);
}

TEST_CASE("shortest round-trip formatting is lossless") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    double value = unif(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    const std::string text = io::format_double(value);
    double parsed = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), parsed);
    CHECK(parsed == value);
  }
}

TEST_CASE("file digests track content") {
  TempDir dir;
  const std::string a = dir.file("a.txt");
  const std::string b = dir.file("b.txt");
  write_text(a, "hello");
  write_text(b, "hello");
  CHECK(io::file_digest(a) == io::file_digest(b));
  write_text(b, "hello!");
  CHECK(io::file_digest(a) != io::file_digest(b));
  CHECK_THROWS_AS(io::file_digest(dir.file("nope.txt")), Error);
}
