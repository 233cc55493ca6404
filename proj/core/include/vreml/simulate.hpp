#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vreml/graph.hpp"
#include "vreml/model.hpp"
#include "vreml/oracle.hpp"
#include "vreml/vreml.hpp"

namespace vreml {

enum class FitMethod { vreml, exact_reml, exact_mle };

const char* fit_method_name(FitMethod method) noexcept;
std::optional<FitMethod> parse_fit_method(std::string_view name) noexcept;

// Lattice simulation study settings. The response is drawn on an n0 x n0
// lattice as y = X beta + u + eps with X = [1, x1, x2] built from
// standardised row/column coordinates, u a proper-on-E spatial effect with
// variance sigma_u_sq, and eps i.i.d. with variance sigma_eps_sq.
struct SimConfig {
  int n0 = 7;
  int n_sim = 200;
  Eigen::Vector3d beta{1.0, 1.2, -1.0};
  double sigma_eps_sq = 0.7;
  double sigma_u_sq = 1.3;
  std::uint64_t seed = 42;
  std::vector<FitMethod> methods{FitMethod::vreml};
  AdjacencyScheme scheme = AdjacencyScheme::rook;
  int threads = 1;
  FitConfig fit;

  void validate() const;  // throws invalid_config
};

struct SimDraw {
  ModelData model;
  IcarStructure icar;
  AdjacencyGraph graph;
  Eigen::VectorXd u_true;
};

// Replication `replication_index` of the study, drawn from counter-based
// streams keyed by (seed, replication): serial and parallel runs see the same
// data, and a replication can be reproduced in isolation.
SimDraw generate(const SimConfig& config, int replication_index);

struct ReplicationRow {
  int replication = 0;
  FitMethod method = FitMethod::vreml;
  bool ok = false;
  std::string error;  // failure category when !ok
  int sweeps = 0;
  bool converged = false;
  double tau_y_hat = 0.0;
  double tau_u_hat = 0.0;
  double sigma_eps_sq_hat = 0.0;
  double sigma_u_sq_hat = 0.0;
  double mspe = 0.0;
  double mae = 0.0;
  double u_mspe = 0.0;
};

struct MethodAggregate {
  FitMethod method = FitMethod::vreml;
  int replications_ok = 0;
  int replications_failed = 0;
  double mean_mspe = 0.0;
  double mean_mae = 0.0;
  double mean_u_mspe = 0.0;
  double rmse_sigma_u_sq = 0.0;
  double rmse_sigma_eps_sq = 0.0;
};

struct SimResult {
  std::vector<ReplicationRow> rows;  // replication-major, then method order
  std::vector<MethodAggregate> aggregates;
};

// Failed replications are recorded and excluded from the aggregates rather
// than aborting the study. Deterministic for a given config, independent of
// config.threads.
SimResult run_study(const SimConfig& config);

// Recomputes an aggregate from raw rows (the invariant the aggregates must
// satisfy).
MethodAggregate aggregate_rows(FitMethod method, const std::vector<ReplicationRow>& rows,
                               const SimConfig& config);

void write_raw_csv(std::ostream& out, const SimResult& result);
void write_aggregate_csv(std::ostream& out, const SimResult& result);

}  // namespace vreml
