#pragma once

#include <Eigen/Core>

#include <optional>
#include <utility>
#include <vector>

#include "vreml/graph.hpp"
#include "vreml/model.hpp"

namespace vreml {

// One point observation: location, count of the selected signal, and the
// per-point normalisation total.
struct CellRow {
  double x = 0.0;
  double y = 0.0;
  double count = 0.0;
  double library_size = 0.0;
};

struct CellTable {
  std::vector<CellRow> rows;
};

// Grid geometry: exactly one of cells (per side, x then y) or cell_width
// (absolute, square cells) must be set.
struct GridSpec {
  std::optional<std::pair<int, int>> cells;
  std::optional<double> cell_width;

  static GridSpec per_side(int nx, int ny) { return GridSpec{std::pair{nx, ny}, std::nullopt}; }
  static GridSpec width(double w) { return GridSpec{std::nullopt, w}; }
};

struct GridCell {
  int gx = 0;
  int gy = 0;
  int cell_count = 0;    // points binned into this cell
  double y_bar = 0.0;    // mean count
  double l_bar = 0.0;    // mean library size
  double center_x = 0.0;
  double center_y = 0.0;
};

// Areal dataset built from binned points. Retained (non-empty) cells are in
// canonical (gx, gy) order; z is the standardised log1p mean count and the
// covariates are [1, log1p(l_bar), log1p(cell_count), s1, s2] with
// standardised cell centers.
struct GridDataset {
  std::vector<GridCell> cells;
  Eigen::VectorXd z;
  Eigen::MatrixXd covariates;
  AdjacencyGraph adjacency;  // rook adjacency among retained cells
  int grid_nx = 0;
  int grid_ny = 0;
  double cell_width_x = 0.0;
  double cell_width_y = 0.0;
  int input_rows = 0;
  int dropped_rows = 0;
};

// Bins points to the grid, drops empty cells, standardises the response and
// builds the grid adjacency. Throws too_few_cells, zero_variance_response,
// disconnected_grid (with component sizes), invalid_config, non_finite_input.
GridDataset bin_cells(const CellTable& cells, const GridSpec& spec);

// Row-aligned model and adjacency ready for fitting.
std::pair<ModelData, AdjacencyGraph> dataset_to_model(const GridDataset& dataset);

inline const std::vector<std::string>& grid_covariate_names() {
  static const std::vector<std::string> names = {"intercept", "log1p_library", "log1p_cells",
                                                 "coord_x", "coord_y"};
  return names;
}

}  // namespace vreml
