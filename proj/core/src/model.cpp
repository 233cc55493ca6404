#include "vreml/model.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "vreml/errors.hpp"

namespace vreml {

ModelData load_model(Eigen::VectorXd y, Eigen::MatrixXd x) {
  if (x.rows() != y.size())
    raise(Errc::dimension_mismatch, "design has " + std::to_string(x.rows()) +
                                        " rows but response has " + std::to_string(y.size()));
  if (x.cols() == 0) raise(Errc::dimension_mismatch, "design has no columns");
  if (x.cols() >= x.rows())
    raise(Errc::design_too_wide, "design has p >= n (" + std::to_string(x.cols()) + " >= " +
                                     std::to_string(x.rows()) + ")");
  if (!y.allFinite() || !x.allFinite()) raise(Errc::non_finite_input, "response or design");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  if (rank < x.cols())
    raise(Errc::rank_deficient_design, "design has rank " + std::to_string(rank) + " < p = " +
                                           std::to_string(x.cols()));

  ModelData m;
  m.y_ = std::move(y);
  m.x_ = std::move(x);
  // (X'X)^{-1} = V diag(sv^{-2}) V'
  Eigen::MatrixXd v = svd.matrixV();
  m.gram_inverse_ = v * sv.array().square().inverse().matrix().asDiagonal() * v.transpose();
  m.log_det_gram_ = 2.0 * sv.array().log().sum();
  return m;
}

Eigen::VectorXd ModelData::project(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != n()) raise(Errc::dimension_mismatch, "vector length does not match model");
  return v - x_ * (gram_inverse_ * (x_.transpose() * v));
}

bool ModelData::has_intercept_column() const {
  for (int j = 0; j < x_.cols(); ++j) {
    const double first = x_(0, j);
    if (first == 0.0) continue;
    if ((x_.col(j).array() == first).all()) return true;
  }
  return false;
}

double projected_quadratic(const ModelData& m, const Eigen::Ref<const Eigen::VectorXd>& v) {
  return m.project(v).squaredNorm();
}

Eigen::VectorXd recover_beta(const ModelData& m, const Eigen::Ref<const Eigen::VectorXd>& mu) {
  if (mu.size() != m.n()) raise(Errc::dimension_mismatch, "mu length does not match model");
  return m.gram_inverse() * (m.x().transpose() * (m.y() - mu));
}

Eigen::VectorXd fitted_values(const ModelData& m, const Eigen::Ref<const Eigen::VectorXd>& mu) {
  return m.x() * recover_beta(m, mu) + mu;
}

Eigen::MatrixXd reduced_projection(const ModelData& m, const SumToZeroBasis& basis) {
  if (basis.n() != m.n()) raise(Errc::dimension_mismatch, "basis size does not match model");
  Eigen::MatrixXd hx = basis.matrix().transpose() * m.x();  // (n-1) x p
  Eigen::MatrixXd reduced = -hx * m.gram_inverse() * hx.transpose();
  reduced.diagonal().array() += 1.0;
  return reduced;
}

SymmetricOperator projection_operator(const ModelData& m) {
  return SymmetricOperator(
      m.n(), [&m](const Eigen::Ref<const Eigen::VectorXd>& v) { return m.project(v); });
}

}  // namespace vreml
