#include "fluidnet/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "fluidnet/linops.hpp"

namespace fluidnet {

namespace {

// Coefficient matrices of the z1/z2 linear systems, in the (state j, node l)
// layout with the node index fastest.
struct System {
    int d = 0;
    int nodes = 0;
    Eigen::MatrixXd qt;   // d x d
    Eigen::MatrixXd g1;   // (Lambda x I_L) grad B(0): dL x d
    Eigen::MatrixXd a1;   // (Q^T x I_L) - R^T: dL x dL
    Eigen::MatrixXd g2a;  // (Lambda x I_{L^2}) grad^2 B(0): dL^2 x d
    Eigen::MatrixXd g2b;  // (I + S)(g1 x I_L): dL^2 x dL
    Eigen::MatrixXd a2;   // Q^T x I_{L^2} - (S + I)(R^T x I_L): dL^2 x dL^2
};

System build_system(const ModulatedNetworkSpec& spec, bool second) {
    const int d = spec.num_states;
    const int L = spec.nodes;
    System sys;
    sys.d = d;
    sys.nodes = L;
    sys.qt = spec.generator.transpose();

    Eigen::MatrixXd grad_b = Eigen::MatrixXd::Zero(d * L, d);
    Eigen::MatrixXd rt = Eigen::MatrixXd::Zero(d * L, d * L);
    for (int j = 0; j < d; ++j) {
        const auto& st = spec.states[j];
        for (int l = 0; l < L; ++l) grad_b(j * L + l, j) = st.jobs[l].mean();
        rt.block(j * L, j * L, L, L) =
            build_rate_matrix(st.drain, st.routing).transpose();
    }
    sys.g1 = grad_b;
    for (int j = 0; j < d; ++j) sys.g1.middleRows(j * L, L) *= spec.states[j].lambda;
    sys.a1 = kron(sys.qt, Eigen::MatrixXd::Identity(L, L)) - rt;
    if (!second) return sys;

    Eigen::MatrixXd grad2_b = Eigen::MatrixXd::Zero(d * L * L, d);
    for (int j = 0; j < d; ++j) {
        const auto& jobs = spec.states[j].jobs;
        for (int l = 0; l < L; ++l) {
            for (int m = 0; m < L; ++m) {
                grad2_b(j * L * L + l * L + m, j) =
                    l == m ? jobs[l].second_moment() : jobs[l].mean() * jobs[m].mean();
            }
        }
    }
    sys.g2a = grad2_b;
    for (int j = 0; j < d; ++j) sys.g2a.middleRows(j * L * L, L * L) *= spec.states[j].lambda;

    const Eigen::MatrixXd il = Eigen::MatrixXd::Identity(L, L);
    const Eigen::MatrixXd s =
        kron(commutation_matrix(d, L), il) * commutation_matrix(L, d * L);
    const Eigen::MatrixXd s_plus_i =
        s + Eigen::MatrixXd::Identity(d * L * L, d * L * L);
    sys.g2b = s_plus_i * kron(sys.g1, il);
    sys.a2 = kron(sys.qt, Eigen::MatrixXd::Identity(L * L, L * L)) - s_plus_i * kron(rt, il);
    return sys;
}

struct OdeState {
    Eigen::VectorXd pi, z1, z2;
};

OdeState derivative(const System& sys, const OdeState& s, bool second) {
    OdeState out;
    out.pi = sys.qt * s.pi;
    out.z1 = sys.g1 * s.pi + sys.a1 * s.z1;
    if (second) out.z2 = sys.g2a * s.pi + sys.g2b * s.z1 + sys.a2 * s.z2;
    return out;
}

OdeState axpy(const OdeState& s, double h, const OdeState& k, bool second) {
    OdeState out;
    out.pi = s.pi + h * k.pi;
    out.z1 = s.z1 + h * k.z1;
    if (second) out.z2 = s.z2 + h * k.z2;
    return out;
}

void rk4_step(const System& sys, OdeState& s, double h, bool second) {
    const OdeState k1 = derivative(sys, s, second);
    const OdeState k2 = derivative(sys, axpy(s, h / 2.0, k1, second), second);
    const OdeState k3 = derivative(sys, axpy(s, h / 2.0, k2, second), second);
    const OdeState k4 = derivative(sys, axpy(s, h, k3, second), second);
    s.pi += (h / 6.0) * (k1.pi + 2.0 * k2.pi + 2.0 * k3.pi + k4.pi);
    s.z1 += (h / 6.0) * (k1.z1 + 2.0 * k2.z1 + 2.0 * k3.z1 + k4.z1);
    if (second) s.z2 += (h / 6.0) * (k1.z2 + 2.0 * k2.z2 + 2.0 * k3.z2 + k4.z2);
}

MomentState integrate(const System& sys, const ModulatedNetworkSpec& spec,
                      const Eigen::VectorXd& x0, const std::vector<double>& grid,
                      bool second, double base_step) {
    const int d = sys.d;
    const int L = sys.nodes;
    MomentState out;
    out.grid = grid;
    out.pi = Eigen::MatrixXd::Zero(d, grid.size());
    out.z1 = Eigen::MatrixXd::Zero(d * L, grid.size());
    out.z2 = Eigen::MatrixXd::Zero(d * L * L, grid.size());

    OdeState s;
    s.pi = Eigen::VectorXd::Zero(d);
    s.pi(spec.initial_state) = 1.0;
    s.z1 = Eigen::VectorXd::Zero(d * L);
    s.z2 = Eigen::VectorXd::Zero(d * L * L);
    for (int l = 0; l < L; ++l) {
        s.z1(spec.initial_state * L + l) = x0(l);
        for (int m = 0; m < L; ++m) {
            s.z2(spec.initial_state * L * L + l * L + m) = x0(l) * x0(m);
        }
    }

    double t = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double span = grid[g] - t;
        if (span < -1e-12) throw std::invalid_argument("moment grid not sorted");
        if (span > 1e-15) {
            const long steps = std::max(1L, static_cast<long>(std::ceil(span / base_step)));
            const double h = span / static_cast<double>(steps);
            for (long k = 0; k < steps; ++k) rk4_step(sys, s, h, second);
        }
        t = grid[g];
        out.pi.col(g) = s.pi;
        out.z1.col(g) = s.z1;
        if (second) out.z2.col(g) = s.z2;
    }
    return out;
}

MomentState integrate_checked(const System& sys, const ModulatedNetworkSpec& spec,
                              const Eigen::VectorXd& x0, const std::vector<double>& grid,
                              bool second) {
    if (grid.empty()) return MomentState{};
    double base = std::max(grid.back(), 1e-12) / 2048.0;
    MomentState coarse = integrate(sys, spec, x0, grid, second, base);
    for (int attempt = 0; attempt < 4; ++attempt) {
        const MomentState fine = integrate(sys, spec, x0, grid, second, base / 2.0);
        const double scale = 1.0 + fine.z1.cwiseAbs().maxCoeff() +
                             (second ? fine.z2.cwiseAbs().maxCoeff() : 0.0);
        double err = (fine.z1 - coarse.z1).cwiseAbs().maxCoeff();
        if (second) err = std::max(err, (fine.z2 - coarse.z2).cwiseAbs().maxCoeff());
        if (err <= 1e-9 * scale) return fine;
        coarse = fine;
        base /= 2.0;
    }
    return coarse;
}

}  // namespace

MomentState transient_moments(const ModulatedNetworkSpec& spec, const Eigen::VectorXd& x0,
                              const std::vector<double>& grid, bool second) {
    return integrate_checked(build_system(spec, second), spec, x0, grid, second);
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& generator) {
    const int d = static_cast<int>(generator.rows());
    Eigen::MatrixXd m = generator.transpose();
    m.row(d - 1).setOnes();  // replace one redundant balance equation
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    rhs(d - 1) = 1.0;
    return m.fullPivLu().solve(rhs);
}

Eigen::VectorXd stationary_first_moment(const ModulatedNetworkSpec& spec) {
    const System sys = build_system(spec, false);
    const Eigen::VectorXd pi = stationary_distribution(spec.generator);
    return (-sys.a1).fullPivLu().solve(sys.g1 * pi);
}

Eigen::VectorXd stationary_second_moment(const ModulatedNetworkSpec& spec) {
    const System sys = build_system(spec, true);
    const Eigen::VectorXd pi = stationary_distribution(spec.generator);
    const Eigen::VectorXd z1 = (-sys.a1).fullPivLu().solve(sys.g1 * pi);
    const Eigen::VectorXd rhs = sys.g2a * pi + sys.g2b * z1;
    // a2 is singular along l <-> m antisymmetric directions, which the
    // dynamics never excite; solve on the symmetric subspace instead
    const int d = spec.num_states;
    const int L = spec.nodes;
    const int sym = L * (L + 1) / 2;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d * L * L, d * sym);
    for (int j = 0; j < d; ++j) {
        int c = 0;
        for (int l = 0; l < L; ++l) {
            for (int m = l; m < L; ++m, ++c) {
                p(j * L * L + l * L + m, j * sym + c) = 1.0;
                p(j * L * L + m * L + l, j * sym + c) = 1.0;
            }
        }
    }
    const Eigen::VectorXd y = ((-sys.a2) * p).colPivHouseholderQr().solve(rhs);
    return p * y;
}

Eigen::VectorXd node_means(const Eigen::VectorXd& z1_col, int d, int nodes) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nodes);
    for (int j = 0; j < d; ++j) out += z1_col.segment(j * nodes, nodes);
    return out;
}

Eigen::MatrixXd node_second_moments(const Eigen::VectorXd& z2_col, int d, int nodes) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nodes, nodes);
    for (int j = 0; j < d; ++j) {
        for (int l = 0; l < nodes; ++l) {
            for (int m = 0; m < nodes; ++m) {
                out(l, m) += z2_col(j * nodes * nodes + l * nodes + m);
            }
        }
    }
    return out;
}

Eigen::MatrixXd correlation_matrix(const Eigen::VectorXd& mean, const Eigen::MatrixXd& second) {
    const int L = static_cast<int>(mean.size());
    constexpr double kVarTol = 1e-12;
    Eigen::VectorXd var(L);
    for (int l = 0; l < L; ++l) var(l) = second(l, l) - mean(l) * mean(l);
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(L, L);
    for (int l = 0; l < L; ++l) {
        for (int m = 0; m < L; ++m) {
            if (l == m) continue;
            const bool dl = var(l) < kVarTol;
            const bool dm = var(m) < kVarTol;
            if (dl && dm) {
                corr(l, m) = 1.0;  // deterministic pair (e.g. t = 0)
            } else if (dl || dm) {
                corr(l, m) = 0.0;
            } else {
                corr(l, m) = (second(l, m) - mean(l) * mean(m)) / std::sqrt(var(l) * var(m));
            }
        }
    }
    return corr;
}

namespace {

// Inhomogeneous term of the jump-shot variant: grad B(0) (Q^T + diag q) pi.
Eigen::MatrixXd jump_shot_g1(const ModulatedNetworkSpec& spec) {
    const int d = spec.num_states;
    const int L = spec.nodes;
    Eigen::MatrixXd grad_b = Eigen::MatrixXd::Zero(d * L, d);
    for (int j = 0; j < d; ++j) {
        for (int l = 0; l < L; ++l) grad_b(j * L + l, j) = spec.states[j].jobs[l].mean();
    }
    Eigen::MatrixXd q_tilde = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < d; ++j) q_tilde(j, j) = -spec.generator(j, j);
    return grad_b * (spec.generator.transpose() + q_tilde);
}

}  // namespace

MomentState jump_shot_first_moment(const ModulatedNetworkSpec& spec, const Eigen::VectorXd& x0,
                                   const std::vector<double>& grid) {
    System sys = build_system(spec, false);
    sys.g1 = jump_shot_g1(spec);
    return integrate_checked(sys, spec, x0, grid, false);
}

Eigen::VectorXd jump_shot_stationary_mean(const ModulatedNetworkSpec& spec) {
    System sys = build_system(spec, false);
    sys.g1 = jump_shot_g1(spec);
    const Eigen::VectorXd pi = stationary_distribution(spec.generator);
    return (-sys.a1).fullPivLu().solve(sys.g1 * pi);
}

}  // namespace fluidnet
