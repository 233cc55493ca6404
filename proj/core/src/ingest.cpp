#include "vreml/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "vreml/errors.hpp"

namespace vreml {

namespace {

Eigen::VectorXd standardize_or_center(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  Eigen::VectorXd centered = v.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / (static_cast<double>(v.size()) - 1.0));
  if (sd < 1e-12 * (1.0 + std::abs(mean))) return centered;  // degenerate axis, leave centered
  return centered / sd;
}

std::vector<int> component_sizes(const AdjacencyGraph& graph) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(graph.n));
  for (const auto& [i, j] : graph.edges) {
    adj[static_cast<size_t>(i)].push_back(j);
    adj[static_cast<size_t>(j)].push_back(i);
  }
  std::vector<int> sizes;
  std::vector<char> seen(static_cast<size_t>(graph.n), 0);
  std::vector<int> stack;
  for (int s = 0; s < graph.n; ++s) {
    if (seen[static_cast<size_t>(s)]) continue;
    int size = 0;
    stack.push_back(s);
    seen[static_cast<size_t>(s)] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++size;
      for (int w : adj[static_cast<size_t>(v)])
        if (!seen[static_cast<size_t>(w)]) {
          seen[static_cast<size_t>(w)] = 1;
          stack.push_back(w);
        }
    }
    sizes.push_back(size);
  }
  return sizes;
}

[[noreturn]] void raise_disconnected(const AdjacencyGraph& graph) {
  std::string detail = "grid adjacency has components of sizes";
  for (int size : component_sizes(graph)) detail += " " + std::to_string(size);
  raise(Errc::disconnected_grid, detail);
}

}  // namespace

GridDataset bin_cells(const CellTable& cells, const GridSpec& spec) {
  if (spec.cells.has_value() == spec.cell_width.has_value())
    raise(Errc::invalid_config, "exactly one of cells-per-side or cell-width must be given");
  if (spec.cells && (spec.cells->first < 1 || spec.cells->second < 1))
    raise(Errc::invalid_config, "cells-per-side must be positive");
  if (spec.cell_width && !(*spec.cell_width > 0.0))
    raise(Errc::invalid_config, "cell-width must be positive");
  if (cells.rows.empty()) raise(Errc::too_few_cells, "no input points");

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const CellRow& row : cells.rows) {
    if (!std::isfinite(row.x) || !std::isfinite(row.y) || !std::isfinite(row.count) ||
        !std::isfinite(row.library_size))
      raise(Errc::non_finite_input, "point table");
    if (row.count < 0.0 || row.library_size < 0.0)
      raise(Errc::invalid_config, "counts and library sizes must be nonnegative");
    x_min = std::min(x_min, row.x);
    x_max = std::max(x_max, row.x);
    y_min = std::min(y_min, row.y);
    y_max = std::max(y_max, row.y);
  }

  int nx, ny;
  double wx, wy;
  if (spec.cell_width) {
    const double w = *spec.cell_width;
    nx = std::max(1, static_cast<int>(std::ceil((x_max - x_min) / w)));
    ny = std::max(1, static_cast<int>(std::ceil((y_max - y_min) / w)));
    wx = wy = w;
  } else {
    nx = spec.cells->first;
    ny = spec.cells->second;
    wx = (x_max - x_min) / nx;
    wy = (y_max - y_min) / ny;
  }

  struct Accumulator {
    double count_sum = 0.0;
    double library_sum = 0.0;
    int points = 0;
  };
  std::map<std::pair<int, int>, Accumulator> bins;  // ordered: canonical cell order
  auto clamp_index = [](double value, double origin, double width, int count) {
    if (width <= 0.0) return 0;
    return std::min(static_cast<int>((value - origin) / width), count - 1);
  };
  for (const CellRow& row : cells.rows) {
    const int gx = clamp_index(row.x, x_min, wx, nx);
    const int gy = clamp_index(row.y, y_min, wy, ny);
    Accumulator& acc = bins[{gx, gy}];
    acc.count_sum += row.count;
    acc.library_sum += row.library_size;
    acc.points += 1;
  }

  const int retained = static_cast<int>(bins.size());
  if (retained < 2)
    raise(Errc::too_few_cells,
          "only " + std::to_string(retained) + " non-empty grid cell(s) after binning");

  GridDataset dataset;
  dataset.grid_nx = nx;
  dataset.grid_ny = ny;
  dataset.cell_width_x = wx;
  dataset.cell_width_y = wy;
  dataset.input_rows = static_cast<int>(cells.rows.size());
  dataset.dropped_rows = 0;  // the bounding box covers every finite point
  dataset.cells.reserve(static_cast<size_t>(retained));

  Eigen::VectorXd log_counts(retained), log_library(retained), log_points(retained);
  Eigen::VectorXd centers_x(retained), centers_y(retained);
  int index = 0;
  for (const auto& [key, acc] : bins) {
    GridCell cell;
    cell.gx = key.first;
    cell.gy = key.second;
    cell.cell_count = acc.points;
    cell.y_bar = acc.count_sum / acc.points;
    cell.l_bar = acc.library_sum / acc.points;
    cell.center_x = x_min + (key.first + 0.5) * wx;
    cell.center_y = y_min + (key.second + 0.5) * wy;
    dataset.cells.push_back(cell);

    log_counts[index] = std::log1p(cell.y_bar);
    log_library[index] = std::log1p(cell.l_bar);
    log_points[index] = std::log1p(static_cast<double>(cell.cell_count));
    centers_x[index] = cell.center_x;
    centers_y[index] = cell.center_y;
    ++index;
  }

  const double z_mean = log_counts.mean();
  Eigen::VectorXd z_centered = log_counts.array() - z_mean;
  const double z_sd = std::sqrt(z_centered.squaredNorm() / (retained - 1.0));
  if (z_sd < 1e-12 * (1.0 + std::abs(z_mean)))
    raise(Errc::zero_variance_response, "all grid cells have the same mean count");
  dataset.z = z_centered / z_sd;

  dataset.covariates.resize(retained, 5);
  dataset.covariates.col(0).setOnes();
  dataset.covariates.col(1) = log_library;
  dataset.covariates.col(2) = log_points;
  dataset.covariates.col(3) = standardize_or_center(centers_x);
  dataset.covariates.col(4) = standardize_or_center(centers_y);

  // Rook adjacency among retained cells.
  std::map<std::pair<int, int>, int> cell_index;
  for (int k = 0; k < retained; ++k)
    cell_index[{dataset.cells[static_cast<size_t>(k)].gx,
                dataset.cells[static_cast<size_t>(k)].gy}] = k;
  std::vector<std::pair<int, int>> edges;
  for (const auto& [key, k] : cell_index) {
    const auto east = cell_index.find({key.first + 1, key.second});
    if (east != cell_index.end()) edges.emplace_back(k, east->second);
    const auto north = cell_index.find({key.first, key.second + 1});
    if (north != cell_index.end()) edges.emplace_back(k, north->second);
  }
  dataset.adjacency = AdjacencyGraph::from_edges(retained, std::move(edges));

  if (component_sizes(dataset.adjacency).size() != 1) raise_disconnected(dataset.adjacency);
  return dataset;
}

std::pair<ModelData, AdjacencyGraph> dataset_to_model(const GridDataset& dataset) {
  if (dataset.cells.empty()) raise(Errc::too_few_cells, "dataset has no cells");
  if (component_sizes(dataset.adjacency).size() != 1) raise_disconnected(dataset.adjacency);
  return {load_model(dataset.z, dataset.covariates), dataset.adjacency};
}

}  // namespace vreml
