#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <functional>
#include <memory>
#include <utility>

namespace vreml {

// Orthonormal basis H of the sum-to-zero subspace E = {v : 1'v = 0}.
// H is n x (n-1) with H'H = I and H'1 = 0. Instances share immutable storage,
// so copies are cheap and thread-safe.
class SumToZeroBasis {
 public:
  explicit SumToZeroBasis(Eigen::MatrixXd h);

  const Eigen::MatrixXd& matrix() const { return *h_; }
  int n() const { return static_cast<int>(h_->rows()); }
  int dim() const { return static_cast<int>(h_->cols()); }

  // H'v: coordinates of the E-component of v.
  Eigen::VectorXd reduce(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  // Hz: lift E-coordinates back to R^n.
  Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  std::shared_ptr<const Eigen::MatrixXd> h_;
};

// Helmert sub-basis: deterministic closed form, column j has j+1 leading
// entries 1/s and one entry -(j+1)/s with s = sqrt((j+1)(j+2)). The first
// nonzero entry of every column is positive.
SumToZeroBasis make_basis(int n);

// Eigenvector basis of the centering matrix I - 11'/n (unit eigenvalues),
// sign-fixed for determinism. Used to cross-check basis invariance.
SumToZeroBasis make_eigen_basis(int n);

// Symmetric operator on R^n given by its action. Only the action is needed to
// reduce an operator onto E.
class SymmetricOperator {
 public:
  using Apply = std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>&)>;

  SymmetricOperator(int size, Apply apply) : size_(size), apply_(std::move(apply)) {}

  int size() const { return size_; }
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const { return apply_(v); }

  // H'AH formed column by column.
  Eigen::MatrixXd reduce(const SumToZeroBasis& basis) const;

 private:
  int size_;
  Apply apply_;
};

// A symmetric operator A, positive definite on E, held in reduced form
// A_E = H'AH with a Cholesky factorisation. Provides E-restricted solves,
// the lifted inverse Sigma = H A_E^{-1} H', the log pseudo-determinant
// log|Sigma|_+ = -log det A_E, and exact trace functionals tr(M Sigma).
//
// Immutable after construction; concurrent solves are safe.
class ConstrainedOperator {
 public:
  // Factorises A_E. Throws not_positive_definite_on_e if the factorisation
  // fails, which is how violations of positive definiteness on E surface.
  ConstrainedOperator(SumToZeroBasis basis, Eigen::MatrixXd reduced);

  const SumToZeroBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& reduced() const { return reduced_; }
  int n() const { return basis_.n(); }
  int dim() const { return basis_.dim(); }

  // x in E with H'(Ax - b) = 0; when A maps E to E this is the solution of
  // Ax = proj_E(b) on E.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& b) const;
  // A_E^{-1} b_E in E-coordinates.
  Eigen::VectorXd solve_reduced(const Eigen::Ref<const Eigen::VectorXd>& b_e) const;

  // Sigma = H A_E^{-1} H'. Satisfies Sigma 1 = 0. Test/reporting use only;
  // the fitting path never calls this.
  Eigen::MatrixXd sigma_dense() const;

  double log_det_reduced() const { return log_det_reduced_; }
  double pseudo_log_det() const { return -log_det_reduced_; }

  // tr(A_E^{-1}), via the Frobenius norm of the inverse Cholesky factor.
  double trace_inverse() const;

  // tr(M Sigma) = tr(M_E A_E^{-1}) with M_E = H'MH, by solving against the
  // columns of M_E. Exact, not stochastic.
  double trace_product(const Eigen::Ref<const Eigen::MatrixXd>& reduced_m) const;
  double trace_product(const SymmetricOperator& m) const;

  // tr(CC' A_E^{-1}) = |L^{-1}C|_F^2 for a factor C of M_E.
  double trace_product_factor(const Eigen::Ref<const Eigen::MatrixXd>& c) const;

  const Eigen::LLT<Eigen::MatrixXd>& factorization() const { return llt_; }

 private:
  SumToZeroBasis basis_;
  Eigen::MatrixXd reduced_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_reduced_ = 0.0;
};

ConstrainedOperator constrained_inverse(const SymmetricOperator& a, const SumToZeroBasis& basis);

}  // namespace vreml
