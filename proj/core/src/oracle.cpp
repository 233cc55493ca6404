#include "vreml/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "vreml/errors.hpp"
#include "vreml/vreml.hpp"

namespace vreml {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_inputs(const ModelData& model, const IcarStructure& icar) {
  if (icar.n() != model.n())
    raise(Errc::dimension_mismatch, "graph and model disagree on the number of units");
  if (!icar.connected())
    raise(Errc::disconnected,
          "oracle objectives require a connected graph (rank deficiency 1)");
}

// Restricted log-likelihood with the dataset-dependent pieces precomputed, so
// a maximisation touches only one Cholesky per evaluation.
struct RemlObjective {
  Eigen::MatrixXd k_p;
  Eigen::MatrixXd k_r;
  Eigen::VectorXd reduced_py;
  double y_proj_quad = 0.0;
  double constant = 0.0;
  double n_minus_p = 0.0;
  double n_minus_r = 0.0;

  RemlObjective(const ModelData& model, const IcarStructure& icar) {
    const SumToZeroBasis basis = make_basis(model.n());
    k_p = reduced_projection(model, basis);
    k_r = reduced_laplacian(icar, basis);
    const Eigen::VectorXd projected_y = model.project(model.y());
    reduced_py = basis.reduce(projected_y);
    y_proj_quad = projected_y.squaredNorm();
    constant = restricted_constant(model, icar, basis);
    n_minus_p = model.n() - model.p();
    n_minus_r = model.n() - icar.rank_deficiency;
  }

  // NaN signals a factorisation failure (not positive definite on E).
  double eval_log(double log_tau_y, double log_tau_u) const {
    const double tau_y = std::exp(log_tau_y);
    const double tau_u = std::exp(log_tau_u);
    Eigen::MatrixXd a = tau_y * k_p + tau_u * k_r;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return kNan;
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Eigen::VectorXd b_e = tau_y * reduced_py;
    const double shifted_quad = b_e.dot(llt.solve(b_e));
    return 0.5 * n_minus_p * log_tau_y + 0.5 * n_minus_r * log_tau_u -
           0.5 * tau_y * y_proj_quad + 0.5 * shifted_quad - 0.5 * log_det + constant;
  }
};

// Marginal log-likelihood with beta profiled out. The covariance is diagonal
// in the eigenbasis of K = H'RH extended by the constant direction, so each
// evaluation is O(n p^2) after a one-off eigendecomposition.
struct MleObjective {
  Eigen::VectorXd spectrum;   // eigenvalues of K
  Eigen::MatrixXd x_rotated;  // (HU)'X
  Eigen::VectorXd y_rotated;  // (HU)'y
  Eigen::RowVectorXd x_mean_dir;  // 1'X / sqrt(n)
  double y_mean_dir = 0.0;        // 1'y / sqrt(n)
  int n = 0;

  MleObjective(const ModelData& model, const IcarStructure& icar) {
    n = model.n();
    const SumToZeroBasis basis = make_basis(n);
    Eigen::MatrixXd k = reduced_laplacian(icar, basis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.info() != Eigen::Success)
      raise(Errc::non_finite_objective, "eigendecomposition of the reduced Laplacian failed");
    spectrum = eig.eigenvalues();
    if (spectrum.minCoeff() <= 0.0)
      raise(Errc::not_positive_definite_on_e,
            "reduced Laplacian is singular; the spatial covariance is improper");
    Eigen::MatrixXd rotation = basis.matrix() * eig.eigenvectors();  // n x (n-1)
    x_rotated = rotation.transpose() * model.x();
    y_rotated = rotation.transpose() * model.y();
    const double root_n = std::sqrt(static_cast<double>(n));
    x_mean_dir = model.x().colwise().sum() / root_n;
    y_mean_dir = model.y().sum() / root_n;
  }

  double eval_log(double log_tau_y, double log_tau_u) const {
    const double tau_y = std::exp(log_tau_y);
    const double tau_u = std::exp(log_tau_u);
    Eigen::ArrayXd lambda = 1.0 / tau_y + 1.0 / (tau_u * spectrum.array());
    const double lambda0 = 1.0 / tau_y;
    const double log_det = lambda.log().sum() + std::log(lambda0);

    Eigen::ArrayXd weights = lambda.inverse();
    Eigen::MatrixXd xwx =
        x_rotated.transpose() * (x_rotated.array().colwise() * weights).matrix();
    xwx.noalias() += x_mean_dir.transpose() * x_mean_dir / lambda0;
    Eigen::VectorXd xwy =
        x_rotated.transpose() * (y_rotated.array() * weights).matrix();
    xwy.noalias() += x_mean_dir.transpose() * (y_mean_dir / lambda0);
    const double ywy =
        (y_rotated.array().square() * weights).sum() + y_mean_dir * y_mean_dir / lambda0;

    Eigen::LLT<Eigen::MatrixXd> llt(xwx);
    if (llt.info() != Eigen::Success) return kNan;
    const Eigen::VectorXd beta = llt.solve(xwy);
    const double quad = ywy - beta.dot(xwy);
    return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * quad;
  }
};

using LogObjective = std::function<double(double, double)>;

struct SearchResult {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  double value = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

// Nelder-Mead on the negated objective; deterministic given the start simplex.
void nelder_mead(const LogObjective& objective, SearchResult& best, double step, double f_tol,
                 double x_tol, int max_iter) {
  auto g = [&](const Eigen::Vector2d& x) {
    ++best.evaluations;
    const double value = objective(x[0], x[1]);
    return std::isfinite(value) ? -value : std::numeric_limits<double>::infinity();
  };

  std::array<Eigen::Vector2d, 3> pts = {best.x, best.x + Eigen::Vector2d(step, 0.0),
                                        best.x + Eigen::Vector2d(0.0, step)};
  std::array<double, 3> vals = {g(pts[0]), g(pts[1]), g(pts[2])};

  auto order = [&] {
    if (vals[0] > vals[1]) { std::swap(vals[0], vals[1]); std::swap(pts[0], pts[1]); }
    if (vals[1] > vals[2]) { std::swap(vals[1], vals[2]); std::swap(pts[1], pts[2]); }
    if (vals[0] > vals[1]) { std::swap(vals[0], vals[1]); std::swap(pts[0], pts[1]); }
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    order();
    const double size = std::max((pts[1] - pts[0]).norm(), (pts[2] - pts[0]).norm());
    if (size < x_tol && std::abs(vals[2] - vals[0]) < f_tol) break;

    const Eigen::Vector2d centroid = 0.5 * (pts[0] + pts[1]);
    const Eigen::Vector2d reflected = centroid + (centroid - pts[2]);
    const double f_reflected = g(reflected);
    if (f_reflected < vals[0]) {
      const Eigen::Vector2d expanded = centroid + 2.0 * (centroid - pts[2]);
      const double f_expanded = g(expanded);
      if (f_expanded < f_reflected) { pts[2] = expanded; vals[2] = f_expanded; }
      else { pts[2] = reflected; vals[2] = f_reflected; }
    } else if (f_reflected < vals[1]) {
      pts[2] = reflected;
      vals[2] = f_reflected;
    } else {
      const Eigen::Vector2d contracted = centroid + 0.5 * (pts[2] - centroid);
      const double f_contracted = g(contracted);
      if (f_contracted < vals[2]) { pts[2] = contracted; vals[2] = f_contracted; }
      else {
        pts[1] = pts[0] + 0.5 * (pts[1] - pts[0]);
        pts[2] = pts[0] + 0.5 * (pts[2] - pts[0]);
        vals[1] = g(pts[1]);
        vals[2] = g(pts[2]);
      }
    }
  }
  order();
  if (-vals[0] > best.value) {
    best.value = -vals[0];
    best.x = pts[0];
  }
}

Eigen::Vector2d fd_gradient(const LogObjective& objective, const Eigen::Vector2d& x, double h,
                            int& evals) {
  evals += 4;
  return Eigen::Vector2d(
      (objective(x[0] + h, x[1]) - objective(x[0] - h, x[1])) / (2.0 * h),
      (objective(x[0], x[1] + h) - objective(x[0], x[1] - h)) / (2.0 * h));
}

// A few guarded Newton steps with finite-difference derivatives to tighten
// the Nelder-Mead output.
void newton_polish(const LogObjective& objective, SearchResult& best) {
  const double h_grad = 1e-6;
  const double h_hess = 1e-4;
  for (int iter = 0; iter < 8; ++iter) {
    const Eigen::Vector2d grad = fd_gradient(objective, best.x, h_grad, best.evaluations);
    if (!grad.allFinite() || grad.norm() < 1e-10) break;

    auto f = [&](double a, double b) {
      ++best.evaluations;
      return objective(a, b);
    };
    const double f00 = f(best.x[0], best.x[1]);
    const double fpp = f(best.x[0] + h_hess, best.x[1]);
    const double fmm = f(best.x[0] - h_hess, best.x[1]);
    const double fqq = f(best.x[0], best.x[1] + h_hess);
    const double fss = f(best.x[0], best.x[1] - h_hess);
    const double fxy = (f(best.x[0] + h_hess, best.x[1] + h_hess) -
                        f(best.x[0] + h_hess, best.x[1] - h_hess) -
                        f(best.x[0] - h_hess, best.x[1] + h_hess) +
                        f(best.x[0] - h_hess, best.x[1] - h_hess)) /
                       (4.0 * h_hess * h_hess);
    Eigen::Matrix2d hess;
    hess << (fpp - 2.0 * f00 + fmm) / (h_hess * h_hess), fxy, fxy,
        (fqq - 2.0 * f00 + fss) / (h_hess * h_hess);
    if (!hess.allFinite()) break;

    Eigen::Vector2d step = -hess.fullPivLu().solve(grad);
    if (!step.allFinite() || step.norm() > 2.0) step = grad.normalized() * 0.1;
    // Curvature may point the wrong way far from the optimum; back off until
    // the objective improves.
    bool accepted = false;
    for (int halving = 0; halving < 6; ++halving) {
      const Eigen::Vector2d candidate = best.x + step;
      ++best.evaluations;
      const double value = objective(candidate[0], candidate[1]);
      if (std::isfinite(value) && value >= best.value) {
        best.x = candidate;
        best.value = value;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
}

SearchResult two_stage_maximize(const LogObjective& objective, double log_start_y,
                                double log_start_u) {
  SearchResult best;
  for (int i = -10; i <= 10; ++i) {
    for (int j = -10; j <= 10; ++j) {
      const double a = log_start_y + 0.6 * i;
      const double b = log_start_u + 0.6 * j;
      ++best.evaluations;
      const double value = objective(a, b);
      if (std::isfinite(value) && value > best.value) {
        best.value = value;
        best.x = Eigen::Vector2d(a, b);
      }
    }
  }
  if (!std::isfinite(best.value))
    raise(Errc::non_finite_objective, "objective was non-finite on the entire search grid");

  nelder_mead(objective, best, 0.3, 1e-13, 1e-11, 400);
  newton_polish(objective, best);
  return best;
}

}  // namespace

const char* oracle_method_name(OracleMethod method) noexcept {
  return method == OracleMethod::exact_reml ? "exact-reml" : "exact-mle";
}

double restricted_loglik(double tau_y, double tau_u, const ModelData& model,
                         const IcarStructure& icar) {
  check_inputs(model, icar);
  if (!(tau_y > 0.0) || !(tau_u > 0.0)) raise(Errc::invalid_config, "precisions must be positive");
  const RemlObjective objective(model, icar);
  const double value = objective.eval_log(std::log(tau_y), std::log(tau_u));
  if (std::isnan(value))
    raise(Errc::not_positive_definite_on_e,
          "precision is not positive definite on the constrained subspace");
  return value;
}

double marginal_loglik(double tau_y, double tau_u, const ModelData& model,
                       const IcarStructure& icar) {
  check_inputs(model, icar);
  if (!(tau_y > 0.0) || !(tau_u > 0.0)) raise(Errc::invalid_config, "precisions must be positive");
  const MleObjective objective(model, icar);
  const double value = objective.eval_log(std::log(tau_y), std::log(tau_u));
  if (std::isnan(value))
    raise(Errc::non_finite_objective, "profiled marginal likelihood is degenerate");
  return value;
}

ConstrainedPosterior exact_posterior(double tau_y, double tau_u, const ModelData& model,
                                     const IcarStructure& icar) {
  check_inputs(model, icar);
  if (!(tau_y > 0.0) || !(tau_u > 0.0)) raise(Errc::invalid_config, "precisions must be positive");
  const int n = model.n();
  if (n > 500)
    raise(Errc::invalid_config,
          "exact_posterior dense path is guarded at n <= 500, got n = " + std::to_string(n));

  // Dense A = tau_y P + tau_u R, centered so its action on E is exposed as an
  // ordinary eigenproblem with the constant direction in the null space.
  Eigen::MatrixXd a = Eigen::MatrixXd(icar.laplacian()) * tau_u;
  Eigen::MatrixXd xg = model.x() * model.gram_inverse();
  a.noalias() -= tau_y * (xg * model.x().transpose());
  a.diagonal().array() += tau_y;

  Eigen::MatrixXd centered = a;
  const Eigen::VectorXd row_mean = a.rowwise().mean();
  centered.colwise() -= row_mean;
  const Eigen::RowVectorXd col_mean = centered.colwise().mean();
  centered.rowwise() -= col_mean;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered);
  if (eig.info() != Eigen::Success)
    raise(Errc::not_positive_definite_on_e, "eigendecomposition of the centered precision failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double threshold = 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff());
  int null_count = 0;
  for (int i = 0; i < values.size(); ++i) {
    if (values[i] < -threshold)
      raise(Errc::not_positive_definite_on_e,
            "precision has a negative direction on the constrained subspace");
    if (values[i] <= threshold) ++null_count;
  }
  if (null_count != 1)
    raise(Errc::not_positive_definite_on_e,
          "precision is singular on the constrained subspace");

  ConstrainedPosterior posterior;
  posterior.covariance = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < values.size(); ++i) {
    if (values[i] > threshold)
      posterior.covariance.noalias() +=
          eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose() / values[i];
  }
  const Eigen::VectorXd b = tau_y * model.project(model.y());
  posterior.mean = posterior.covariance * b;
  return posterior;
}

OracleEstimates maximize(OracleMethod method, const ModelData& model, const IcarStructure& icar) {
  check_inputs(model, icar);
  if (model.n() > 2500)
    raise(Errc::invalid_config, "maximize reference backend is guarded at n <= 2500");

  const double y_proj_quad = projected_quadratic(model, model.y());
  if (y_proj_quad <= 0.0)
    raise(Errc::degenerate_denominator, "response lies in the design column space");
  const double log_start = std::log((model.n() - model.p()) / y_proj_quad);

  SearchResult found;
  if (method == OracleMethod::exact_reml) {
    const RemlObjective objective(model, icar);
    found = two_stage_maximize(
        [&objective](double a, double b) { return objective.eval_log(a, b); }, log_start,
        log_start);
    int evals = found.evaluations;
    const Eigen::Vector2d grad = fd_gradient(
        [&objective](double a, double b) { return objective.eval_log(a, b); }, found.x, 1e-6,
        evals);
    found.evaluations = evals;
    return OracleEstimates{std::exp(found.x[0]), std::exp(found.x[1]), found.value, method,
                           found.evaluations, grad.norm()};
  }

  const MleObjective objective(model, icar);
  found = two_stage_maximize(
      [&objective](double a, double b) { return objective.eval_log(a, b); }, log_start,
      log_start);
  int evals = found.evaluations;
  const Eigen::Vector2d grad = fd_gradient(
      [&objective](double a, double b) { return objective.eval_log(a, b); }, found.x, 1e-6,
      evals);
  found.evaluations = evals;
  return OracleEstimates{std::exp(found.x[0]), std::exp(found.x[1]), found.value, method,
                         found.evaluations, grad.norm()};
}

RecoveredEffects recover_effects(OracleMethod method, double tau_y, double tau_u,
                                 const ModelData& model, const IcarStructure& icar) {
  check_inputs(model, icar);
  if (!(tau_y > 0.0) || !(tau_u > 0.0)) raise(Errc::invalid_config, "precisions must be positive");
  const SumToZeroBasis basis = make_basis(model.n());
  RecoveredEffects effects;

  if (method == OracleMethod::exact_reml) {
    Eigen::MatrixXd reduced =
        tau_y * reduced_projection(model, basis) + tau_u * reduced_laplacian(icar, basis);
    ConstrainedOperator op(basis, std::move(reduced));
    effects.u = op.solve(tau_y * model.project(model.y()));
    effects.beta = recover_beta(model, effects.u);
  } else {
    // GLS beta under the marginal covariance, then the conditional mean of u.
    const MleObjective mle(model, icar);
    const double lambda0 = 1.0 / tau_y;
    Eigen::ArrayXd lambda = 1.0 / tau_y + 1.0 / (tau_u * mle.spectrum.array());
    Eigen::ArrayXd weights = lambda.inverse();
    Eigen::MatrixXd xwx =
        mle.x_rotated.transpose() * (mle.x_rotated.array().colwise() * weights).matrix();
    xwx.noalias() += mle.x_mean_dir.transpose() * mle.x_mean_dir / lambda0;
    Eigen::VectorXd xwy =
        mle.x_rotated.transpose() * (mle.y_rotated.array() * weights).matrix();
    xwy.noalias() += mle.x_mean_dir.transpose() * (mle.y_mean_dir / lambda0);
    effects.beta = xwx.llt().solve(xwy);

    Eigen::MatrixXd conditional =
        tau_u * reduced_laplacian(icar, basis);
    conditional.diagonal().array() += tau_y;
    const Eigen::VectorXd residual = model.y() - model.x() * effects.beta;
    effects.u = basis.lift(conditional.llt().solve(tau_y * basis.reduce(residual)));
  }
  effects.fitted = model.x() * effects.beta + effects.u;
  return effects;
}

}  // namespace vreml
