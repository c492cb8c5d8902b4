#include "fluidnet/linops.hpp"

#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace fluidnet {

Eigen::MatrixXd matrix_exp_neg(const Eigen::MatrixXd& m, double s) {
    if (!m.allFinite() || !std::isfinite(s)) {
        throw std::invalid_argument("matrix_exp_neg: non-finite input");
    }
    Eigen::MatrixXd result = (-s * m).exp();
    if (!result.allFinite()) {
        throw std::overflow_error("matrix_exp_neg: overflow in matrix exponential");
    }
    return result;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Eigen::MatrixXd commutation_matrix(int m, int n) {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m * n, m * n);
    // vec(A) index of A_{ij} (column-major): i + j*m; vec(A^T): j + i*n.
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) k(j + i * n, i + j * m) = 1.0;
    return k;
}

Propagator::Propagator(const Eigen::MatrixXd& r) : r_(r) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(r);
    const auto vals = es.eigenvalues();
    bool real_spectrum = true;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (std::abs(vals(i).imag()) > 1e-12 * (1.0 + std::abs(vals(i).real()))) {
            real_spectrum = false;
            break;
        }
    }
    if (real_spectrum) {
        Eigen::MatrixXd v = es.eigenvectors().real();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
        if (lu.isInvertible()) {
            Eigen::MatrixXd v_inv = lu.inverse();
            const double cond = v.cwiseAbs().maxCoeff() * v_inv.cwiseAbs().maxCoeff();
            if (cond < 1e8) {
                use_eigen_ = true;
                eigvals_ = vals.real();
                v_ = std::move(v);
                v_inv_ = std::move(v_inv);
            }
        }
    }
}

Eigen::MatrixXd Propagator::operator()(double u) const {
    if (use_eigen_) {
        return v_ * (-u * eigvals_.array()).exp().matrix().asDiagonal() * v_inv_;
    }
    return matrix_exp_neg(r_, u);
}

}  // namespace fluidnet
