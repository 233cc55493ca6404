#include "vreml/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vreml/errors.hpp"

namespace vreml::io {

namespace {

std::string trimmed(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trimmed(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const std::string& path, int line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    raise(Errc::io_error,
          path + ":" + std::to_string(line) + ": cannot parse number '" + text + "'");
  return value;
}

long parse_long(const std::string& text, const std::string& path, int line) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    raise(Errc::io_error,
          path + ":" + std::to_string(line) + ": cannot parse integer '" + text + "'");
  return value;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::io_error, "cannot open '" + path + "' for writing");
  return out;
}

bool next_line(std::ifstream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 40> buffer;
  const auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) raise(Errc::io_error, "number formatting failed");
  return std::string(buffer.data(), ptr);
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open '" + path + "' for digesting");
  std::uint64_t hash = 0xCBF29CE484222325ull;
  char chunk[4096];
  while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(chunk[i]);
      hash *= 0x100000001B3ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return std::string("fnv1a64:") + hex;
}

AdjacencyGraph read_adjacency_matrix_market(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line)) raise(Errc::io_error, path + ": empty file");

  bool pattern = false;
  bool symmetric = false;
  {
    std::stringstream header(lowercase(line));
    std::string banner, object, format, field, symmetry;
    header >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%matrixmarket" || object != "matrix" || format != "coordinate")
      raise(Errc::io_error, path + ": expected a Matrix Market coordinate header");
    if (field == "pattern") pattern = true;
    else if (field != "real" && field != "integer")
      raise(Errc::io_error, path + ": unsupported field type '" + field + "'");
    if (symmetry == "symmetric") symmetric = true;
    else if (symmetry != "general")
      raise(Errc::io_error, path + ": unsupported symmetry '" + symmetry + "'");
  }

  int line_no = 1;
  do {
    if (!next_line(in, line)) raise(Errc::io_error, path + ": missing size line");
    ++line_no;
  } while (line.empty() || line[0] == '%');

  long rows = 0, cols = 0, entries = 0;
  {
    std::stringstream size_line(line);
    if (!(size_line >> rows >> cols >> entries))
      raise(Errc::io_error, path + ": malformed size line");
  }
  if (rows != cols) raise(Errc::io_error, path + ": adjacency matrix must be square");

  std::vector<std::pair<int, int>> directed;
  directed.reserve(static_cast<size_t>(entries));
  long seen = 0;
  while (seen < entries) {
    if (!next_line(in, line)) raise(Errc::io_error, path + ": unexpected end of file");
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::stringstream entry(line);
    long i = 0, j = 0;
    double value = 1.0;
    if (!(entry >> i >> j)) raise(Errc::io_error, path + ": malformed entry");
    if (!pattern && !(entry >> value)) raise(Errc::io_error, path + ": entry missing value");
    ++seen;
    if (i < 1 || j < 1 || i > rows || j > rows)
      raise(Errc::io_error, path + ": index out of range on line " + std::to_string(line_no));
    if (value == 0.0) continue;
    if (value != 1.0)
      raise(Errc::io_error, path + ": weighted adjacency is unsupported (value " +
                                format_double(value) + ")");
    if (i == j)
      raise(Errc::io_error, path + ": self-loop at node " + std::to_string(i - 1));
    directed.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1));
  }

  std::vector<std::pair<int, int>> edges;
  if (symmetric) {
    edges = std::move(directed);
  } else {
    // General storage must contain both orientations of every edge.
    std::vector<std::pair<int, int>> sorted = directed;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (const auto& [i, j] : sorted) {
      if (!std::binary_search(sorted.begin(), sorted.end(), std::pair{j, i}))
        raise(Errc::io_error, path + ": entry (" + std::to_string(i + 1) + "," +
                                  std::to_string(j + 1) + ") has no symmetric partner");
      if (i < j) edges.emplace_back(i, j);
    }
  }
  return AdjacencyGraph::from_edges(static_cast<int>(rows), std::move(edges));
}

void write_adjacency_matrix_market(const std::string& path, const AdjacencyGraph& graph) {
  std::ofstream out = open_output(path);
  out << "%%MatrixMarket matrix coordinate pattern symmetric\n";
  out << graph.n << ' ' << graph.n << ' ' << graph.edges.size() << '\n';
  // Symmetric storage lists the lower triangle: larger index first.
  for (const auto& [i, j] : graph.edges) out << j + 1 << ' ' << i + 1 << '\n';
  if (!out) raise(Errc::io_error, "failed writing '" + path + "'");
}

AdjacencyGraph read_adjacency_edge_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line)) raise(Errc::io_error, path + ": empty file");
  const auto header = split_csv(line);
  if (header.size() != 2 || lowercase(header[0]) != "i" || lowercase(header[1]) != "j")
    raise(Errc::io_error, path + ": expected header 'i,j'");

  std::vector<std::pair<int, int>> edges;
  int max_index = -1;
  int line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      raise(Errc::io_error, path + ":" + std::to_string(line_no) + ": expected two fields");
    const long i = parse_long(fields[0], path, line_no);
    const long j = parse_long(fields[1], path, line_no);
    if (i < 0 || j < 0)
      raise(Errc::io_error, path + ":" + std::to_string(line_no) + ": negative node index");
    max_index = std::max({max_index, static_cast<int>(i), static_cast<int>(j)});
    edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  }
  if (max_index < 0) raise(Errc::io_error, path + ": no edges");
  return AdjacencyGraph::from_edges(max_index + 1, std::move(edges));
}

AdjacencyGraph read_adjacency_auto(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : lowercase(path.substr(dot + 1));
  if (ext == "mtx" || ext == "mm") return read_adjacency_matrix_market(path);
  if (ext == "csv") return read_adjacency_edge_csv(path);
  std::ifstream probe = open_input(path);
  std::string first;
  std::getline(probe, first);
  if (lowercase(first).rfind("%%matrixmarket", 0) == 0) return read_adjacency_matrix_market(path);
  return read_adjacency_edge_csv(path);
}

Eigen::VectorXd read_response_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line)) raise(Errc::io_error, path + ": empty file");
  const auto header = split_csv(line);
  if (header.size() != 1 || lowercase(header[0]) != "y")
    raise(Errc::io_error, path + ": expected single-column header 'y'");
  std::vector<double> values;
  int line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    values.push_back(parse_double(trimmed(line), path, line_no));
  }
  if (values.empty()) raise(Errc::io_error, path + ": no data rows");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_response_csv(const std::string& path, const Eigen::Ref<const Eigen::VectorXd>& y) {
  std::ofstream out = open_output(path);
  out << "y\n";
  for (Eigen::Index i = 0; i < y.size(); ++i) out << format_double(y[i]) << '\n';
  if (!out) raise(Errc::io_error, "failed writing '" + path + "'");
}

Eigen::MatrixXd read_design_csv(const std::string& path, std::vector<std::string>* names) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line)) raise(Errc::io_error, path + ": empty file");
  const auto header = split_csv(line);
  if (header.empty()) raise(Errc::io_error, path + ": empty header");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      raise(Errc::io_error, path + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(header.size()) + " fields, got " +
                                std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& field : fields) row.push_back(parse_double(field, path, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) raise(Errc::io_error, path + ": no data rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(header.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < header.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  if (names) *names = header;
  return x;
}

void write_design_csv(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& x,
                      const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != x.cols())
    raise(Errc::dimension_mismatch, "design column names do not match the matrix");
  std::ofstream out = open_output(path);
  for (size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out << (j ? "," : "") << format_double(x(i, j));
    out << '\n';
  }
  if (!out) raise(Errc::io_error, "failed writing '" + path + "'");
}

CellTable read_cells_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line)) raise(Errc::io_error, path + ": empty file");
  const auto header = split_csv(line);
  const std::array<std::string, 4> required = {"x", "y", "count", "library_size"};
  std::array<int, 4> column{-1, -1, -1, -1};
  for (size_t j = 0; j < header.size(); ++j) {
    const std::string name = lowercase(header[j]);
    for (size_t k = 0; k < required.size(); ++k)
      if (name == required[k]) column[k] = static_cast<int>(j);
  }
  for (size_t k = 0; k < required.size(); ++k)
    if (column[k] < 0) raise(Errc::io_error, path + ": missing column '" + required[k] + "'");

  CellTable table;
  int line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size())
      raise(Errc::io_error, path + ":" + std::to_string(line_no) + ": field count mismatch");
    CellRow row;
    row.x = parse_double(fields[static_cast<size_t>(column[0])], path, line_no);
    row.y = parse_double(fields[static_cast<size_t>(column[1])], path, line_no);
    row.count = parse_double(fields[static_cast<size_t>(column[2])], path, line_no);
    row.library_size = parse_double(fields[static_cast<size_t>(column[3])], path, line_no);
    table.rows.push_back(row);
  }
  if (table.rows.empty()) raise(Errc::io_error, path + ": no data rows");
  return table;
}

void write_cells_csv(const std::string& path, const CellTable& cells) {
  std::ofstream out = open_output(path);
  out << "x,y,count,library_size\n";
  for (const CellRow& row : cells.rows)
    out << format_double(row.x) << ',' << format_double(row.y) << ','
        << format_double(row.count) << ',' << format_double(row.library_size) << '\n';
  if (!out) raise(Errc::io_error, "failed writing '" + path + "'");
}

}  // namespace vreml::io
