#pragma once

#include <Eigen/Core>

#include "vreml/graph.hpp"
#include "vreml/model.hpp"

namespace vreml {

enum class OracleMethod { exact_reml, exact_mle };

const char* oracle_method_name(OracleMethod method) noexcept;

struct OracleEstimates {
  double tau_y_hat = 0.0;
  double tau_u_hat = 0.0;
  double objective_value = 0.0;
  OracleMethod method = OracleMethod::exact_reml;
  int evaluations = 0;
  double gradient_norm = 0.0;  // central-difference gradient in log-parameters
};

// Exact restricted log-likelihood of (tau_y, tau_u), on the shared absolute
// scale of vreml.hpp (restricted_constant). Closed form via the Gaussian
// integral over the sum-to-zero subspace.
double restricted_loglik(double tau_y, double tau_u, const ModelData& model,
                         const IcarStructure& icar);

// Marginal log-likelihood of y with the regression coefficients profiled out
// by generalised least squares; the spatial covariance is the proper-on-E
// form tau_u^{-1} H (H'RH)^{-1} H'. This is the exact-MLE objective.
double marginal_loglik(double tau_y, double tau_u, const ModelData& model,
                       const IcarStructure& icar);

struct ConstrainedPosterior {
  Eigen::VectorXd mean;         // in E
  Eigen::MatrixXd covariance;   // dense n x n, annihilates 1
};

// Exact constrained Gaussian posterior of the spatial effect at fixed
// precisions, computed by a dense eigendecomposition of the centered
// precision; independent of the basis-reduction path used by the fitter.
// Dense-path size guard: n <= 500.
ConstrainedPosterior exact_posterior(double tau_y, double tau_u, const ModelData& model,
                                     const IcarStructure& icar);

// Two-stage maximisation over (log tau_y, log tau_u): a 21 x 21 coarse grid
// spanning +/- 6 log-units around the method-of-moments start, then
// Nelder-Mead refinement with a finite-difference Newton polish. Size guard:
// n <= 2500.
OracleEstimates maximize(OracleMethod method, const ModelData& model, const IcarStructure& icar);

// Empirical-Bayes effect recovery at fixed precisions for the oracle
// comparators: beta by GLS under the marginal covariance, u by the
// conditional mean given beta, fitted = X beta + u.
struct RecoveredEffects {
  Eigen::VectorXd beta;
  Eigen::VectorXd u;
  Eigen::VectorXd fitted;
};
RecoveredEffects recover_effects(OracleMethod method, double tau_y, double tau_u,
                                 const ModelData& model, const IcarStructure& icar);

}  // namespace vreml
