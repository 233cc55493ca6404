#include "vreml/simulate.hpp"

#include <Eigen/Cholesky>

#include <atomic>
#include <cmath>
#include <ostream>
#include <string>
#include <thread>
#include <utility>

#include "vreml/errors.hpp"
#include "vreml/io.hpp"
#include "vreml/rng.hpp"

namespace vreml {

namespace {

constexpr std::uint64_t kStreamsPerReplication = 2;
constexpr std::uint64_t kStreamTheta = 0;
constexpr std::uint64_t kStreamNoise = 1;

Eigen::VectorXd standardized(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  Eigen::VectorXd centered = v.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / (static_cast<double>(v.size()) - 1.0));
  return centered / sd;
}

// Everything that is fixed across replications of one study.
struct LatticeStudy {
  AdjacencyGraph graph;
  IcarStructure icar;
  SumToZeroBasis basis;
  Eigen::MatrixXd design;
  Eigen::MatrixXd theta_factor;  // lower Cholesky factor of H'RH

  LatticeStudy(int n0, AdjacencyScheme scheme)
      : graph(lattice_graph(n0, scheme)), icar(build_icar(graph)), basis(make_basis(graph.n)) {
    const int n = graph.n;
    Eigen::VectorXd rows(n), cols(n);
    for (int i = 0; i < n; ++i) {
      rows[i] = i / n0;
      cols[i] = i % n0;
    }
    design.resize(n, 3);
    design.col(0).setOnes();
    design.col(1) = standardized(rows);
    design.col(2) = standardized(cols);

    Eigen::LLT<Eigen::MatrixXd> llt(reduced_laplacian(icar, basis));
    if (llt.info() != Eigen::Success)
      raise(Errc::not_positive_definite_on_e, "lattice Laplacian is singular on E");
    theta_factor = llt.matrixL();
  }

  SimDraw draw(const SimConfig& config, int replication) const {
    const int n = graph.n;
    const std::uint64_t base = static_cast<std::uint64_t>(replication) * kStreamsPerReplication;

    CounterRng theta_rng(config.seed, base + kStreamTheta);
    Eigen::VectorXd z = theta_rng.normal_vector(n - 1);
    // theta = sigma_u L^{-T} z has covariance sigma_u^2 (LL')^{-1} = sigma_u^2 K^{-1}.
    Eigen::VectorXd theta =
        std::sqrt(config.sigma_u_sq) *
        theta_factor.transpose().triangularView<Eigen::Upper>().solve(z);
    Eigen::VectorXd u = basis.lift(theta);

    CounterRng noise_rng(config.seed, base + kStreamNoise);
    Eigen::VectorXd eps = std::sqrt(config.sigma_eps_sq) * noise_rng.normal_vector(n);

    Eigen::VectorXd y = design * config.beta + u + eps;
    return SimDraw{load_model(std::move(y), design), icar, graph, std::move(u)};
  }
};

ReplicationRow run_one(const SimConfig& config, const LatticeStudy& study, int replication,
                       FitMethod method) {
  ReplicationRow row;
  row.replication = replication;
  row.method = method;
  try {
    const SimDraw draw = study.draw(config, replication);
    const int n = draw.model.n();
    Eigen::VectorXd fitted, u_hat;

    if (method == FitMethod::vreml) {
      const FitReport report = fit(draw.model, draw.icar, config.fit);
      row.sweeps = report.sweeps;
      row.converged = report.converged;
      row.tau_y_hat = report.state.tau_y;
      row.tau_u_hat = report.state.tau_u;
      fitted = report.fitted;
      u_hat = report.state.mu;
    } else {
      const OracleMethod oracle_method = method == FitMethod::exact_reml
                                             ? OracleMethod::exact_reml
                                             : OracleMethod::exact_mle;
      const OracleEstimates estimates = maximize(oracle_method, draw.model, draw.icar);
      row.converged = true;
      row.tau_y_hat = estimates.tau_y_hat;
      row.tau_u_hat = estimates.tau_u_hat;
      const RecoveredEffects effects = recover_effects(oracle_method, estimates.tau_y_hat,
                                                       estimates.tau_u_hat, draw.model, draw.icar);
      fitted = effects.fitted;
      u_hat = effects.u;
    }

    row.sigma_eps_sq_hat = 1.0 / row.tau_y_hat;
    row.sigma_u_sq_hat = 1.0 / row.tau_u_hat;
    const Eigen::VectorXd residual = draw.model.y() - fitted;
    row.mspe = residual.squaredNorm() / n;
    row.mae = residual.cwiseAbs().mean();
    row.u_mspe = (u_hat - draw.u_true).squaredNorm() / n;
    row.ok = true;
  } catch (const Error& e) {
    row.ok = false;
    row.error = errc_name(e.code());
  } catch (const std::exception&) {
    row.ok = false;
    row.error = "InternalError";
  }
  return row;
}

}  // namespace

const char* fit_method_name(FitMethod method) noexcept {
  switch (method) {
    case FitMethod::vreml: return "vreml";
    case FitMethod::exact_reml: return "exact-reml";
    case FitMethod::exact_mle: return "exact-mle";
  }
  return "unknown";
}

std::optional<FitMethod> parse_fit_method(std::string_view name) noexcept {
  if (name == "vreml") return FitMethod::vreml;
  if (name == "exact-reml" || name == "exact_reml") return FitMethod::exact_reml;
  if (name == "exact-mle" || name == "exact_mle") return FitMethod::exact_mle;
  return std::nullopt;
}

void SimConfig::validate() const {
  if (n0 < 3) raise(Errc::invalid_config, "n0 must be at least 3");
  if (n_sim < 1) raise(Errc::invalid_config, "n_sim must be at least 1");
  if (!(sigma_eps_sq > 0.0) || !(sigma_u_sq > 0.0))
    raise(Errc::invalid_config, "variance components must be positive");
  if (methods.empty()) raise(Errc::invalid_config, "at least one method is required");
  if (threads < 1) raise(Errc::invalid_config, "threads must be at least 1");
  if (!beta.allFinite()) raise(Errc::invalid_config, "beta must be finite");
}

SimDraw generate(const SimConfig& config, int replication_index) {
  config.validate();
  if (replication_index < 0) raise(Errc::invalid_config, "replication index must be nonnegative");
  const LatticeStudy study(config.n0, config.scheme);
  return study.draw(config, replication_index);
}

SimResult run_study(const SimConfig& config) {
  config.validate();
  const LatticeStudy study(config.n0, config.scheme);
  const int methods = static_cast<int>(config.methods.size());

  SimResult result;
  result.rows.resize(static_cast<size_t>(config.n_sim) * methods);

  const int workers = std::min(config.threads, config.n_sim);
  if (workers <= 1) {
    for (int rep = 0; rep < config.n_sim; ++rep)
      for (int m = 0; m < methods; ++m)
        result.rows[static_cast<size_t>(rep) * methods + m] =
            run_one(config, study, rep, config.methods[static_cast<size_t>(m)]);
  } else {
    std::atomic<int> next{0};
    auto work = [&] {
      for (int rep = next.fetch_add(1); rep < config.n_sim; rep = next.fetch_add(1))
        for (int m = 0; m < methods; ++m)
          result.rows[static_cast<size_t>(rep) * methods + m] =
              run_one(config, study, rep, config.methods[static_cast<size_t>(m)]);
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  result.aggregates.reserve(static_cast<size_t>(methods));
  for (FitMethod method : config.methods)
    result.aggregates.push_back(aggregate_rows(method, result.rows, config));
  return result;
}

MethodAggregate aggregate_rows(FitMethod method, const std::vector<ReplicationRow>& rows,
                               const SimConfig& config) {
  MethodAggregate agg;
  agg.method = method;
  double sq_u = 0.0, sq_eps = 0.0;
  for (const ReplicationRow& row : rows) {
    if (row.method != method) continue;
    if (!row.ok) {
      ++agg.replications_failed;
      continue;
    }
    ++agg.replications_ok;
    agg.mean_mspe += row.mspe;
    agg.mean_mae += row.mae;
    agg.mean_u_mspe += row.u_mspe;
    const double du = row.sigma_u_sq_hat - config.sigma_u_sq;
    const double de = row.sigma_eps_sq_hat - config.sigma_eps_sq;
    sq_u += du * du;
    sq_eps += de * de;
  }
  if (agg.replications_ok > 0) {
    const double count = agg.replications_ok;
    agg.mean_mspe /= count;
    agg.mean_mae /= count;
    agg.mean_u_mspe /= count;
    agg.rmse_sigma_u_sq = std::sqrt(sq_u / count);
    agg.rmse_sigma_eps_sq = std::sqrt(sq_eps / count);
  }
  return agg;
}

void write_raw_csv(std::ostream& out, const SimResult& result) {
  out << "replication,method,status,sweeps,converged,tau_y_hat,tau_u_hat,"
         "sigma_eps_sq_hat,sigma_u_sq_hat,mspe,mae,u_mspe,error\n";
  for (const ReplicationRow& row : result.rows) {
    out << row.replication << ',' << fit_method_name(row.method) << ','
        << (row.ok ? "ok" : "failed") << ',';
    if (row.ok) {
      out << row.sweeps << ',' << (row.converged ? "true" : "false") << ','
          << io::format_double(row.tau_y_hat) << ',' << io::format_double(row.tau_u_hat) << ','
          << io::format_double(row.sigma_eps_sq_hat) << ','
          << io::format_double(row.sigma_u_sq_hat) << ',' << io::format_double(row.mspe) << ','
          << io::format_double(row.mae) << ',' << io::format_double(row.u_mspe) << ",\n";
    } else {
      out << ",,,,,,,," << row.error << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& out, const SimResult& result) {
  out << "method,replications_ok,replications_failed,mean_mspe,mean_mae,mean_u_mspe,"
         "rmse_sigma_u_sq,rmse_sigma_eps_sq\n";
  for (const MethodAggregate& agg : result.aggregates) {
    out << fit_method_name(agg.method) << ',' << agg.replications_ok << ','
        << agg.replications_failed << ',' << io::format_double(agg.mean_mspe) << ','
        << io::format_double(agg.mean_mae) << ',' << io::format_double(agg.mean_u_mspe) << ','
        << io::format_double(agg.rmse_sigma_u_sq) << ','
        << io::format_double(agg.rmse_sigma_eps_sq) << '\n';
  }
}

}  // namespace vreml
