#include "fluidnet/analytics.hpp"

#include <cmath>

#include "fluidnet/quadrature.hpp"

namespace fluidnet {

namespace {

constexpr double kActiveTol = 1e-8;

// beta(x) = prod_l f_l(x_l) for independent components, with the
// log-derivative d_l = f'_l/f_l and its derivative dp_l.
struct BetaEval {
    double value = 1.0;
    Eigen::VectorXd d;   // log-derivative per component
    Eigen::VectorXd dp;  // derivative of d per component
};

BetaEval eval_beta(const std::vector<JobLaw>& jobs, const Eigen::VectorXd& x, double u) {
    const int n = static_cast<int>(x.size());
    BetaEval out;
    out.d = Eigen::VectorXd::Zero(n);
    out.dp = Eigen::VectorXd::Zero(n);
    for (int l = 0; l < n; ++l) {
        switch (jobs[l].kind) {
            case JobLaw::Kind::exponential: {
                const double mu = jobs[l].param;
                const double margin = mu - x(l);
                if (margin <= mu * 1e-14) throw DomainExceeded(u, l);
                out.value *= mu / margin;
                out.d(l) = 1.0 / margin;
                out.dp(l) = 1.0 / (margin * margin);
                break;
            }
            case JobLaw::Kind::deterministic: {
                const double c = jobs[l].param;
                out.value *= std::exp(c * x(l));
                out.d(l) = c;
                break;
            }
            case JobLaw::Kind::zero:
                break;
        }
    }
    return out;
}

}  // namespace

Eigen::MatrixXd SegmentedMgf::Segment::propagate(double u) const {
    return (*prop)(input.t1 - u) * input.suffix;
}

SegmentedMgf::SegmentedMgf(std::vector<SegmentInput> inputs, double quad_tol)
    : dim_(static_cast<int>(inputs.front().rate_matrix.rows())),
      horizon_(inputs.back().t1),
      quad_tol_(quad_tol) {
    segments_.reserve(inputs.size());
    for (auto& in : inputs) {
        Segment seg;
        seg.prop = std::make_shared<Propagator>(in.rate_matrix);
        if (dim_ == 1 && in.jobs[0].kind == JobLaw::Kind::exponential) {
            const double r = in.rate_matrix(0, 0);
            seg.scalar_exp = true;
            seg.pbar = std::exp(-r * in.t1) * in.suffix(0, 0);
            seg.v0 = seg.pbar * std::exp(r * in.t0);
            seg.v1 = seg.pbar * std::exp(r * in.t1);
        }
        seg.input = std::move(in);
        segments_.push_back(std::move(seg));
    }
}

SegmentedMgf SegmentedMgf::from_network(const NetworkSpec& spec) {
    SegmentInput in;
    in.t0 = 0.0;
    in.t1 = spec.horizon;
    in.lambda = spec.lambda;
    in.jobs = spec.jobs;
    in.rate_matrix = build_rate_matrix(spec);
    in.suffix = Eigen::MatrixXd::Identity(spec.nodes, spec.nodes);
    return SegmentedMgf({std::move(in)});
}

namespace {

// Closed forms for one scalar exponential stretch; v0, v1 are the endpoint
// values of P(u) and s_i = mu - v_i theta. Written in cancellation-free form
// so they hold uniformly down to theta = 0.
struct ScalarTerms {
    double value, grad, hess;
};

ScalarTerms scalar_exp_terms(double lambda, double mu, double r, double v0, double v1,
                             double theta, double t0) {
    const double s0 = mu - v0 * theta;
    const double s1 = mu - v1 * theta;
    if (s0 <= mu * 1e-14 || s1 <= mu * 1e-14) throw DomainExceeded(t0, 0);
    ScalarTerms out;
    out.value = (lambda / r) * std::log(s0 / s1);
    out.grad = lambda * (mu / r) * (v1 - v0) / (s0 * s1);
    out.hess = lambda * (2.0 * mu * (v1 - v0) / r) *
               (mu * (v0 + v1) / 2.0 - v0 * v1 * theta) / (s0 * s0 * s1 * s1);
    return out;
}

}  // namespace

void SegmentedMgf::eval(const Eigen::VectorXd& theta, double& value,
                        Eigen::VectorXd& gradient, Eigen::MatrixXd& hessian) const {
    const int n = dim_;
    value = 0.0;
    gradient = Eigen::VectorXd::Zero(n);
    hessian = Eigen::MatrixXd::Zero(n, n);
    for (const auto& seg : segments_) {
        if (seg.scalar_exp) {
            const auto t = scalar_exp_terms(seg.input.lambda, seg.input.jobs[0].param,
                                            seg.input.rate_matrix(0, 0), seg.v0, seg.v1,
                                            theta(0), seg.input.t0);
            value += t.value;
            gradient(0) += t.grad;
            hessian(0, 0) += t.hess;
            continue;
        }
        // packed [value; gradient; vec(hessian)] integrand
        const int dim = 1 + n + n * n;
        auto integrand = [&](double u) {
            const Eigen::MatrixXd p = seg.propagate(u);
            const Eigen::VectorXd x = p * theta;
            const BetaEval b = eval_beta(seg.input.jobs, x, u);
            Eigen::VectorXd out(dim);
            out(0) = b.value - 1.0;
            const Eigen::VectorXd grad_x = b.value * b.d;
            const Eigen::MatrixXd hess_x =
                b.value * (b.d * b.d.transpose() + Eigen::MatrixXd(b.dp.asDiagonal()));
            out.segment(1, n) = p.transpose() * grad_x;
            Eigen::MatrixXd h = p.transpose() * hess_x * p;
            out.segment(1 + n, n * n) = Eigen::Map<const Eigen::VectorXd>(h.data(), n * n);
            return out;
        };
        const Eigen::VectorXd res = seg.input.lambda * integrate_adaptive_vec(
            integrand, dim, seg.input.t0, seg.input.t1, quad_tol_);
        value += res(0);
        gradient += res.segment(1, n);
        hessian += Eigen::Map<const Eigen::MatrixXd>(res.segment(1 + n, n * n).data(), n, n);
    }
}

double SegmentedMgf::value(const Eigen::VectorXd& theta) const {
    double v = 0.0;
    for (const auto& seg : segments_) {
        if (seg.scalar_exp) {
            v += scalar_exp_terms(seg.input.lambda, seg.input.jobs[0].param,
                                  seg.input.rate_matrix(0, 0), seg.v0, seg.v1, theta(0),
                                  seg.input.t0)
                     .value;
            continue;
        }
        auto f = [&](double u) {
            const Eigen::VectorXd x = seg.propagate(u) * theta;
            return eval_beta(seg.input.jobs, x, u).value - 1.0;
        };
        v += seg.input.lambda *
             integrate_adaptive(f, seg.input.t0, seg.input.t1, quad_tol_);
    }
    return v;
}

Eigen::VectorXd SegmentedMgf::gradient(const Eigen::VectorXd& theta) const {
    double v;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    eval(theta, v, g, h);
    return g;
}

Eigen::MatrixXd SegmentedMgf::hessian(const Eigen::VectorXd& theta) const {
    double v;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    eval(theta, v, g, h);
    return h;
}

double SegmentedMgf::segment_poisson_mean(int i, const Eigen::VectorXd& theta) const {
    const auto& seg = segments_.at(i);
    const double dt = seg.input.t1 - seg.input.t0;
    if (seg.scalar_exp) {
        const auto t = scalar_exp_terms(seg.input.lambda, seg.input.jobs[0].param,
                                        seg.input.rate_matrix(0, 0), seg.v0, seg.v1,
                                        theta(0), seg.input.t0);
        return t.value + seg.input.lambda * dt;
    }
    auto f = [&](double u) { return segment_epoch_weight(i, u, theta); };
    return seg.input.lambda * integrate_adaptive(f, seg.input.t0, seg.input.t1, quad_tol_);
}

double SegmentedMgf::segment_epoch_weight(int i, double u, const Eigen::VectorXd& theta) const {
    const auto& seg = segments_.at(i);
    const Eigen::VectorXd x = seg.propagate(u) * theta;
    return eval_beta(seg.input.jobs, x, u).value;
}

// --- twist solver ---

TwistSolution solve_twist(const SegmentedMgf& mgf, const Eigen::VectorXd& a,
                          const Eigen::VectorXd* warm_start) {
    const int n = mgf.dim();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    if (warm_start != nullptr && warm_start->size() == n) {
        theta = warm_start->cwiseMax(0.0);
        // warm starts outside the domain are discarded
        try {
            (void)mgf.value(theta);
        } catch (const DomainExceeded&) {
            theta.setZero();
        }
    }

    const double scale = 1.0 + a.cwiseAbs().maxCoeff();
    constexpr int kMaxIter = 200;
    double value;
    Eigen::VectorXd grad_logm;
    Eigen::MatrixXd hess_logm;
    int iter = 0;
    for (; iter < kMaxIter; ++iter) {
        mgf.eval(theta, value, grad_logm, hess_logm);
        const double objective = theta.dot(a) - value;
        Eigen::VectorXd grad = a - grad_logm;  // ascent direction of the objective

        std::vector<int> free_idx;
        for (int l = 0; l < n; ++l) {
            const bool clamped = theta(l) <= kActiveTol && grad(l) <= 0.0;
            if (!clamped) free_idx.push_back(l);
        }
        if (free_idx.empty()) break;

        const int nf = static_cast<int>(free_idx.size());
        Eigen::VectorXd gf(nf);
        Eigen::MatrixXd hf(nf, nf);
        for (int i = 0; i < nf; ++i) {
            gf(i) = grad(free_idx[i]);
            for (int j = 0; j < nf; ++j) hf(i, j) = hess_logm(free_idx[i], free_idx[j]);
        }
        if (gf.cwiseAbs().maxCoeff() < 1e-11 * scale) break;

        Eigen::VectorXd df = hf.ldlt().solve(gf);
        if (!df.allFinite() || gf.dot(df) <= 0.0) df = gf;  // gradient fallback

        Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < nf; ++i) dir(free_idx[i]) = df(i);

        double step = 1.0;
        bool accepted = false;
        double moved = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            Eigen::VectorXd cand = (theta + step * dir).cwiseMax(0.0);
            try {
                const double cand_obj = cand.dot(a) - mgf.value(cand);
                if (cand_obj >= objective + 1e-4 * grad.dot(cand - theta)) {
                    moved = (cand - theta).cwiseAbs().maxCoeff();
                    theta = cand;
                    accepted = true;
                    break;
                }
            } catch (const DomainExceeded&) {
                // outside the MGF domain; shrink
            }
            step *= 0.5;
        }
        if (!accepted) break;
        // quadrature noise can keep the gradient hovering just above its
        // tolerance; a step this small means the iterate is converged
        if (moved <= 1e-13 * (1.0 + theta.cwiseAbs().maxCoeff())) break;
    }
    if (iter == kMaxIter) throw NonConvergence(theta);

    mgf.eval(theta, value, grad_logm, hess_logm);
    TwistSolution sol;
    sol.theta_star = theta;
    sol.b_star = grad_logm;
    sol.log_mgf_at_star = value;
    sol.rate = std::max(0.0, theta.dot(a) - value);
    sol.iterations = iter;
    for (int l = 0; l < n; ++l) {
        if (theta(l) > kActiveTol) sol.active_set.push_back(l);
    }
    const int d = sol.active_count();
    if (d > 0) {
        Eigen::MatrixXd restricted(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                restricted(i, j) = hess_logm(sol.active_set[i], sol.active_set[j]);
        sol.tau = restricted.determinant();
    }
    return sol;
}

TwistSolution solve_twist(const NetworkSpec& spec, const RareTarget& target) {
    return solve_twist(SegmentedMgf::from_network(spec), target.a);
}

// --- single-node closed forms ---

double log_mgf_exp_closed(double mu, double r, double theta, double s) {
    if (theta >= mu) throw DomainExceeded(0.0, 0);
    return (1.0 / r) * std::log((mu * std::exp(r * s) - theta) / (mu - theta));
}

double exp_twist_closed_form(double lambda, double mu, double r, double t, double a) {
    const double ert = std::exp(-r * t);
    const double mt = (lambda / r) * (1.0 - ert) / mu;  // m(t) for exponential jobs
    const double disc = (1.0 - ert) * (1.0 - ert) + 4.0 * ert * mt / a;
    return 0.5 * mu * std::exp(r * t) * ((1.0 + ert) - std::sqrt(disc));
}

double log_mgf(const NetworkSpec& spec, const Eigen::VectorXd& theta) {
    return SegmentedMgf::from_network(spec).value(theta);
}

Eigen::VectorXd mean_vector(const NetworkSpec& spec) {
    return SegmentedMgf::from_network(spec).gradient(Eigen::VectorXd::Zero(spec.nodes));
}

Eigen::MatrixXd hessian_log_mgf(const NetworkSpec& spec, const Eigen::VectorXd& theta) {
    return SegmentedMgf::from_network(spec).hessian(theta);
}

// --- asymptotics ---

namespace {

double prefactor(const TwistSolution& sol, double moment_scale) {
    double pre = 1.0;
    for (int idx : sol.active_set) pre /= sol.theta_star(idx);
    const int d = sol.active_count();
    pre *= std::pow(2.0 * M_PI, -0.5 * d) / std::sqrt(sol.tau);
    return pre * std::pow(moment_scale, d);
}

}  // namespace

double bahadur_rao_p(const TwistSolution& sol, int n) {
    const int d = sol.active_count();
    return std::pow(n, -0.5 * d) * prefactor(sol, 1.0) * std::exp(-n * sol.rate);
}

double second_moment_asymptotic(const TwistSolution& sol, int n) {
    const int d = sol.active_count();
    return std::pow(n, -0.5 * d) * prefactor(sol, 0.5) * std::exp(-2.0 * n * sol.rate);
}

double alpha_constant(const TwistSolution& sol, double eps, double critical_value) {
    double alpha = critical_value * critical_value / (eps * eps);
    for (int idx : sol.active_set) alpha *= sol.theta_star(idx);
    const int d = sol.active_count();
    alpha *= std::pow(0.5, d) * std::pow(2.0 * M_PI, 0.5 * d) * std::sqrt(sol.tau);
    return alpha;
}

double predicted_runs(const TwistSolution& sol, int n, double eps, double critical_value) {
    return alpha_constant(sol, eps, critical_value) * std::pow(n, 0.5 * sol.active_count());
}

}  // namespace fluidnet
