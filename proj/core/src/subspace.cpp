#include "vreml/subspace.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "vreml/errors.hpp"

namespace vreml {

SumToZeroBasis::SumToZeroBasis(Eigen::MatrixXd h)
    : h_(std::make_shared<const Eigen::MatrixXd>(std::move(h))) {
  if (h_->rows() < 2 || h_->cols() != h_->rows() - 1)
    raise(Errc::dimension_mismatch, "basis must be n x (n-1) with n >= 2");
}

Eigen::VectorXd SumToZeroBasis::reduce(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != n()) raise(Errc::dimension_mismatch, "vector length does not match basis");
  return h_->transpose() * v;
}

Eigen::VectorXd SumToZeroBasis::lift(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != dim()) raise(Errc::dimension_mismatch, "coordinate length does not match basis");
  return *h_ * z;
}

SumToZeroBasis make_basis(int n) {
  if (n < 2) raise(Errc::invalid_config, "sum-to-zero basis needs n >= 2");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n - 1);
  for (int j = 0; j < n - 1; ++j) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(j + 1) * (j + 2));
    h.col(j).head(j + 1).setConstant(scale);
    h(j + 1, j) = -static_cast<double>(j + 1) * scale;
  }
  return SumToZeroBasis(std::move(h));
}

SumToZeroBasis make_eigen_basis(int n) {
  if (n < 2) raise(Errc::invalid_config, "sum-to-zero basis needs n >= 2");
  Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centering);
  // Eigenvalues ascend: the single zero comes first, the unit block after.
  Eigen::MatrixXd h = eig.eigenvectors().rightCols(n - 1);
  for (int j = 0; j < h.cols(); ++j) {
    for (int i = 0; i < h.rows(); ++i) {
      if (std::abs(h(i, j)) > 1e-12) {
        if (h(i, j) < 0) h.col(j) = -h.col(j);
        break;
      }
    }
  }
  return SumToZeroBasis(std::move(h));
}

Eigen::MatrixXd SymmetricOperator::reduce(const SumToZeroBasis& basis) const {
  if (basis.n() != size_) raise(Errc::dimension_mismatch, "basis size does not match operator");
  const Eigen::MatrixXd& h = basis.matrix();
  Eigen::MatrixXd ah(size_, basis.dim());
  for (int j = 0; j < basis.dim(); ++j) ah.col(j) = apply_(h.col(j));
  Eigen::MatrixXd reduced = h.transpose() * ah;
  // Symmetrise away the accumulation skew.
  return 0.5 * (reduced + reduced.transpose());
}

ConstrainedOperator::ConstrainedOperator(SumToZeroBasis basis, Eigen::MatrixXd reduced)
    : basis_(std::move(basis)), reduced_(std::move(reduced)) {
  if (reduced_.rows() != basis_.dim() || reduced_.cols() != basis_.dim())
    raise(Errc::dimension_mismatch, "reduced operator must be (n-1) x (n-1)");
  llt_.compute(reduced_);
  if (llt_.info() != Eigen::Success)
    raise(Errc::not_positive_definite_on_e,
          "operator is not positive definite on the sum-to-zero subspace");
  log_det_reduced_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  if (!std::isfinite(log_det_reduced_))
    raise(Errc::not_positive_definite_on_e, "factorisation produced a non-finite determinant");
}

Eigen::VectorXd ConstrainedOperator::solve(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  return basis_.lift(llt_.solve(basis_.reduce(b)));
}

Eigen::VectorXd ConstrainedOperator::solve_reduced(
    const Eigen::Ref<const Eigen::VectorXd>& b_e) const {
  if (b_e.size() != dim()) raise(Errc::dimension_mismatch, "reduced vector has wrong length");
  return llt_.solve(b_e);
}

Eigen::MatrixXd ConstrainedOperator::sigma_dense() const {
  const Eigen::MatrixXd& h = basis_.matrix();
  Eigen::MatrixXd inv = llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
  return h * inv * h.transpose();
}

double ConstrainedOperator::trace_inverse() const {
  Eigen::MatrixXd linv = llt_.matrixL().solve(Eigen::MatrixXd::Identity(dim(), dim()));
  return linv.squaredNorm();
}

double ConstrainedOperator::trace_product(
    const Eigen::Ref<const Eigen::MatrixXd>& reduced_m) const {
  if (reduced_m.rows() != dim() || reduced_m.cols() != dim())
    raise(Errc::dimension_mismatch, "reduced operator must be (n-1) x (n-1)");
  return llt_.solve(reduced_m).trace();
}

double ConstrainedOperator::trace_product(const SymmetricOperator& m) const {
  if (m.size() != n()) raise(Errc::dimension_mismatch, "operator size does not match basis");
  return trace_product(m.reduce(basis_));
}

double ConstrainedOperator::trace_product_factor(
    const Eigen::Ref<const Eigen::MatrixXd>& c) const {
  if (c.rows() != dim()) raise(Errc::dimension_mismatch, "factor has wrong row count");
  Eigen::MatrixXd v = llt_.matrixL().solve(c);
  return v.squaredNorm();
}

ConstrainedOperator constrained_inverse(const SymmetricOperator& a, const SumToZeroBasis& basis) {
  return ConstrainedOperator(basis, a.reduce(basis));
}

}  // namespace vreml
