#pragma once

#include <Eigen/Dense>

namespace fluidnet {

// e^{-M s}. Scaling-and-squaring via Eigen's MatrixFunctions; throws on
// non-finite input or overflowed result.
Eigen::MatrixXd matrix_exp_neg(const Eigen::MatrixXd& m, double s);

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Commutation matrix K_{m,n}: K vec(A) = vec(A^T) for A of size m x n.
Eigen::MatrixXd commutation_matrix(int m, int n);

// Repeated evaluation of e^{-R u} for one fixed R. Uses the eigendecomposition
// when R is diagonalizable with real spectrum and well-conditioned
// eigenvectors, otherwise falls back to scaling-and-squaring per call.
class Propagator {
  public:
    explicit Propagator(const Eigen::MatrixXd& r);

    Eigen::MatrixXd operator()(double u) const;

    int dim() const { return static_cast<int>(r_.rows()); }
    const Eigen::MatrixXd& rate_matrix() const { return r_; }

  private:
    Eigen::MatrixXd r_;
    bool use_eigen_ = false;
    Eigen::VectorXd eigvals_;
    Eigen::MatrixXd v_;
    Eigen::MatrixXd v_inv_;
};

}  // namespace fluidnet
