#include "vreml/vreml.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "vreml/errors.hpp"

namespace vreml {

namespace {

constexpr double kTauCeiling = 1e12;
constexpr double kDenominatorFloor = 1e-300;

void check_problem(const ModelData& model, const IcarStructure& icar) {
  if (icar.n() != model.n())
    raise(Errc::dimension_mismatch, "graph has " + std::to_string(icar.n()) +
                                        " nodes but model has " + std::to_string(model.n()));
  if (!icar.connected())
    raise(Errc::disconnected,
          "graph has " + std::to_string(icar.num_components) +
              " components (assumption A-2); a single sum-to-zero constraint "
              "identifies only a connected graph");
  if (2 * model.p() >= model.n())
    raise(Errc::design_too_wide, "p = " + std::to_string(model.p()) +
                                     " is not small against n = " + std::to_string(model.n()) +
                                     " (assumption A-1 wants p << n)");
}

}  // namespace

double FixedPointResiduals::max_abs() const {
  return std::max(std::max(std::abs(mu), std::abs(sigma)),
                  std::max(std::abs(tau_y), std::abs(tau_u)));
}

double restricted_constant(const ModelData& model, const IcarStructure& icar,
                           const SumToZeroBasis& basis) {
  const double n_minus_p = model.n() - model.p();
  return -0.5 * n_minus_p * std::log(2.0 * std::numbers::pi) - 0.5 * model.log_det_gram() +
         0.5 * laplacian_log_pseudo_det(icar, basis);
}

ConstrainedOperator precision_operator(const ModelData& model, const IcarStructure& icar,
                                       const SumToZeroBasis& basis, double tau_y, double tau_u) {
  if (!(tau_y > 0.0) || !(tau_u > 0.0))
    raise(Errc::invalid_config, "precisions must be positive");
  Eigen::MatrixXd reduced = tau_y * reduced_projection(model, basis);
  reduced.noalias() += tau_u * reduced_laplacian(icar, basis);
  return ConstrainedOperator(basis, std::move(reduced));
}

VariationalState variational_block_update(const ModelData& model, const IcarStructure& icar,
                                          const SumToZeroBasis& basis, double tau_y,
                                          double tau_u) {
  check_problem(model, icar);
  ConstrainedOperator sigma = precision_operator(model, icar, basis, tau_y, tau_u);
  Eigen::VectorXd mu = sigma.solve(tau_y * model.project(model.y()));
  return VariationalState{std::move(mu), std::move(sigma), tau_y, tau_u, {}};
}

namespace {

// Expected quadratic forms under the state: T1 = (y-mu)'P(y-mu) + tr(P Sigma)
// and T2 = mu'R mu + tr(R Sigma).
std::pair<double, double> expected_quadratics(const VariationalState& state,
                                              const ModelData& model,
                                              const IcarStructure& icar) {
  const SumToZeroBasis& basis = state.sigma.basis();
  const double t1 = projected_quadratic(model, model.y() - state.mu) +
                    state.sigma.trace_product(reduced_projection(model, basis));
  const double t2 =
      quadratic_form(icar, state.mu) + state.sigma.trace_product(reduced_laplacian(icar, basis));
  return {t1, t2};
}

}  // namespace

std::pair<double, double> tau_fixed_point(const VariationalState& state, const ModelData& model,
                                          const IcarStructure& icar) {
  check_problem(model, icar);
  const auto [t1, t2] = expected_quadratics(state, model, icar);
  const double r = icar.rank_deficiency;
  return {(model.n() - model.p()) / t1, (model.n() - r) / t2};
}

double elbo(const VariationalState& state, const ModelData& model, const IcarStructure& icar) {
  check_problem(model, icar);
  if (state.mu.size() != model.n()) raise(Errc::dimension_mismatch, "state mean has wrong length");
  const double n_minus_p = model.n() - model.p();
  const double n_minus_r = model.n() - icar.rank_deficiency;
  const auto [t1, t2] = expected_quadratics(state, model, icar);
  return 0.5 * n_minus_p * std::log(state.tau_y) - 0.5 * state.tau_y * t1 +
         0.5 * n_minus_r * std::log(state.tau_u) - 0.5 * state.tau_u * t2 +
         0.5 * state.sigma.pseudo_log_det() + 0.5 * n_minus_r +
         restricted_constant(model, icar, state.sigma.basis());
}

ElboGradients elbo_gradients(const VariationalState& state, const ModelData& model,
                             const IcarStructure& icar) {
  check_problem(model, icar);
  const SumToZeroBasis& basis = state.sigma.basis();
  const auto [t1, t2] = expected_quadratics(state, model, icar);

  ElboGradients g;
  g.mu = state.tau_y * model.project(model.y() - state.mu) - state.tau_u * icar.apply(state.mu);
  g.tau_y = 0.5 * (model.n() - model.p()) / state.tau_y - 0.5 * t1;
  g.tau_u = 0.5 * (model.n() - icar.rank_deficiency) / state.tau_u - 0.5 * t2;
  g.sigma = -0.5 * state.tau_y * reduced_projection(model, basis) -
            0.5 * state.tau_u * reduced_laplacian(icar, basis) + 0.5 * state.sigma.reduced();
  return g;
}

FitReport fit(const ModelData& model, const IcarStructure& icar, const FitConfig& config) {
  if (!(config.tol > 0.0)) raise(Errc::invalid_config, "tol must be positive");
  if (config.max_sweeps < 1) raise(Errc::invalid_config, "max_sweeps must be at least 1");
  if (config.init_tau_y && !(*config.init_tau_y > 0.0))
    raise(Errc::invalid_config, "init_tau_y must be positive");
  if (config.init_tau_u && !(*config.init_tau_u > 0.0))
    raise(Errc::invalid_config, "init_tau_u must be positive");
  check_problem(model, icar);

  const int n = model.n();
  const int p = model.p();
  const int r = icar.rank_deficiency;
  const double n_minus_p = n - p;
  const double n_minus_r = n - r;

  const SumToZeroBasis basis = make_basis(n);
  const Eigen::MatrixXd k_p = reduced_projection(model, basis);
  const Eigen::MatrixXd k_r = reduced_laplacian(icar, basis);

  Eigen::LLT<Eigen::MatrixXd> k_r_llt(k_r);
  if (k_r_llt.info() != Eigen::Success)
    raise(Errc::not_positive_definite_on_e, "Laplacian is singular on the constrained subspace");
  const Eigen::MatrixXd laplacian_factor = k_r_llt.matrixL();
  const double log_pdet_r = 2.0 * laplacian_factor.diagonal().array().log().sum();

  const double constant = -0.5 * n_minus_p * std::log(2.0 * std::numbers::pi) -
                          0.5 * model.log_det_gram() + 0.5 * log_pdet_r;

  // tr(P Sigma) = tr(A_E^{-1}) - |L^{-1} (H'X) F|_F^2 with G = (X'X)^{-1} = FF'.
  Eigen::LLT<Eigen::MatrixXd> gram_llt(model.gram_inverse());
  if (gram_llt.info() != Eigen::Success)
    raise(Errc::rank_deficient_design, "cached Gram inverse is not positive definite");
  const Eigen::MatrixXd projection_factor =
      (basis.matrix().transpose() * model.x()) * Eigen::MatrixXd(gram_llt.matrixL());

  const Eigen::VectorXd projected_y = model.project(model.y());
  const double y_proj_quad = projected_y.squaredNorm();
  const Eigen::VectorXd reduced_py = basis.reduce(projected_y);

  if (y_proj_quad < kDenominatorFloor)
    raise(Errc::degenerate_denominator,
          "response lies in the design column space; tau_y is unbounded");

  double tau_y = config.init_tau_y.value_or(n_minus_p / y_proj_quad);
  double tau_u = config.init_tau_u.value_or(tau_y);

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  std::optional<ConstrainedOperator> sigma;
  double sigma_tau_y = tau_y, sigma_tau_u = tau_u;
  double resid_quad = y_proj_quad, mu_quad = 0.0, trace_p = 0.0, trace_r = 0.0;

  std::vector<double> trace;
  trace.reserve(static_cast<size_t>(std::min(config.max_sweeps, 1024)));
  bool converged = false;
  int sweeps = 0;

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    sweeps = sweep;

    // (a) covariance at the current precisions
    Eigen::MatrixXd reduced = tau_y * k_p + tau_u * k_r;
    sigma.emplace(basis, std::move(reduced));
    sigma_tau_y = tau_y;
    sigma_tau_u = tau_u;
    trace_p = sigma->trace_inverse() - sigma->trace_product_factor(projection_factor);
    trace_r = sigma->trace_product_factor(laplacian_factor);

    if (!config.sabotage_tau_order) {
      // (b) mean
      mu = basis.lift(sigma->solve_reduced(tau_y * reduced_py));
      resid_quad = projected_quadratic(model, model.y() - mu);
      mu_quad = quadratic_form(icar, mu);
      // (c) observation precision
      tau_y = n_minus_p / std::max(resid_quad + trace_p, kDenominatorFloor);
      // (d) spatial precision
      tau_u = n_minus_r / std::max(mu_quad + trace_r, kDenominatorFloor);
    } else {
      // Mis-ordered sweep: precisions computed from the stale mean, then the
      // mean update mixes the fresh tau_y with the stale factorisation.
      tau_y = n_minus_p / std::max(resid_quad + trace_p, kDenominatorFloor);
      tau_u = n_minus_r / std::max(mu_quad + trace_r, kDenominatorFloor);
      mu = basis.lift(sigma->solve_reduced(tau_y * reduced_py));
      resid_quad = projected_quadratic(model, model.y() - mu);
      mu_quad = quadratic_form(icar, mu);
    }

    if (resid_quad + trace_p < kDenominatorFloor)
      raise(Errc::degenerate_denominator, "observation precision denominator vanished");
    if (mu_quad + trace_r < kDenominatorFloor)
      raise(Errc::degenerate_denominator, "spatial precision denominator vanished");
    if (tau_y > kTauCeiling)
      raise(Errc::degenerate_denominator,
            "tau_y exceeded " + std::to_string(kTauCeiling) + "; residual variance is degenerate");
    if (tau_u > kTauCeiling)
      raise(Errc::degenerate_denominator,
            "tau_u exceeded " + std::to_string(kTauCeiling) + "; spatial variance is degenerate");

    const double value = 0.5 * n_minus_p * std::log(tau_y) - 0.5 * tau_y * (resid_quad + trace_p) +
                         0.5 * n_minus_r * std::log(tau_u) - 0.5 * tau_u * (mu_quad + trace_r) +
                         0.5 * sigma->pseudo_log_det() + 0.5 * n_minus_r + constant;
    trace.push_back(value);

    if (sweep >= 2) {
      const double delta = trace[static_cast<size_t>(sweep) - 1] - trace[static_cast<size_t>(sweep) - 2];
      const double threshold =
          config.relative_tol ? config.tol * (1.0 + std::abs(value)) : config.tol;
      if (std::abs(delta) < threshold) {
        converged = true;
        break;
      }
    }
  }

  FitReport report{
      VariationalState{mu, std::move(*sigma), tau_y, tau_u, std::move(trace)},
      recover_beta(model, mu),
      fitted_values(model, mu),
      sweeps,
      converged,
      {},
      0.0,
      1.0 / tau_y,
      1.0 / tau_u,
  };
  report.final_elbo = report.state.elbo_trace.back();

  // Stationarity residuals at the returned state.
  const Eigen::VectorXd mu_grad =
      tau_y * model.project(model.y() - mu) - tau_u * icar.apply(mu);
  report.residuals.mu = mu_grad.norm() / (1.0 + tau_y * projected_y.norm());
  Eigen::MatrixXd precision_gap =
      (tau_y - sigma_tau_y) * k_p + (tau_u - sigma_tau_u) * k_r;
  report.residuals.sigma =
      precision_gap.norm() / (1.0 + (tau_y * k_p + tau_u * k_r).norm());
  report.residuals.tau_y = std::abs(1.0 - tau_y * (resid_quad + trace_p) / n_minus_p);
  report.residuals.tau_u = std::abs(1.0 - tau_u * (mu_quad + trace_r) / n_minus_r);
  return report;
}

}  // namespace vreml
