#pragma once

#include <Eigen/Core>

#include "vreml/subspace.hpp"

namespace vreml {

// Observed response, full-column-rank design matrix, and the projection onto
// the orthogonal complement of the design column space. The projection is
// always applied in rank-p corrected form v - X (X'X)^{-1} X'v; the dense
// n x n projector is never formed here.
class ModelData {
 public:
  ModelData() = default;

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& gram_inverse() const { return gram_inverse_; }
  double log_det_gram() const { return log_det_gram_; }

  int n() const { return static_cast<int>(y_.size()); }
  int p() const { return static_cast<int>(x_.cols()); }

  // P v, rank-p corrected.
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  // True when some design column is a nonzero constant (an intercept up to
  // scale). The CLI warns when absent.
  bool has_intercept_column() const;

  friend ModelData load_model(Eigen::VectorXd y, Eigen::MatrixXd x);

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd x_;
  Eigen::MatrixXd gram_inverse_;
  double log_det_gram_ = 0.0;
};

// Validates dimensions, finiteness and column rank (singular values below
// 1e-10 times the largest count as zero), and caches (X'X)^{-1}.
ModelData load_model(Eigen::VectorXd y, Eigen::MatrixXd x);

// ||P v||^2 = v'Pv, using idempotence and symmetry of the projection.
double projected_quadratic(const ModelData& m, const Eigen::Ref<const Eigen::VectorXd>& v);

// beta_hat = (X'X)^{-1} X'(y - mu): least squares against the residual after
// removing the estimated spatial effect.
Eigen::VectorXd recover_beta(const ModelData& m, const Eigen::Ref<const Eigen::VectorXd>& mu);

// X beta_hat + mu.
Eigen::VectorXd fitted_values(const ModelData& m, const Eigen::Ref<const Eigen::VectorXd>& mu);

// H'PH = I - (H'X) (X'X)^{-1} (H'X)'.
Eigen::MatrixXd reduced_projection(const ModelData& m, const SumToZeroBasis& basis);

// P as a symmetric operator (reduction and tests).
SymmetricOperator projection_operator(const ModelData& m);

}  // namespace vreml
