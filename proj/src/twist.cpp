#include "fluidnet/twist.hpp"

#include <algorithm>
#include <cmath>

#include "fluidnet/quadrature.hpp"

namespace fluidnet {

namespace {

constexpr int kTableCells = 1024;

// Antiderivative of r beta(c e^{ru}) for beta(x) = mu/(mu - x):
// G(u) = r u - log(mu - c e^{ru}), so int beta du = (G(b) - G(a))/r.
double scalar_epoch_G(double mu, double r, double c, double u) {
    const double s = mu - c * std::exp(r * u);
    if (s <= mu * 1e-14) throw DomainExceeded(u, 0);
    return r * u - std::log(s);
}

// log(1 + c e^y), stable for large y and c >= 0.
double log1p_c_exp(double c, double y) {
    if (y > 0.0) return y + std::log(c + std::exp(-y));
    return std::log1p(c * std::exp(y));
}

}  // namespace

TwistPlan::TwistPlan(SegmentedMgf mgf, Eigen::VectorXd theta_star, double log_mgf_at_star)
    : mgf_(std::move(mgf)),
      theta_star_(std::move(theta_star)),
      log_mgf_at_star_(log_mgf_at_star) {
    const auto& segs = mgf_.segments();
    segment_means_.resize(segs.size());
    tables_.resize(segs.size());
    total_mean_ = 0.0;
    for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
        segment_means_[i] = mgf_.segment_poisson_mean(i, theta_star_);
        total_mean_ += segment_means_[i];
        if (segs[i].scalar_exp) continue;

        // cumulative epoch weight on a fine grid, one quadrature cell per step
        const double t0 = segs[i].input.t0;
        const double t1 = segs[i].input.t1;
        auto w = [&](double u) { return mgf_.segment_epoch_weight(i, u, theta_star_); };
        EpochTable table;
        table.u.resize(kTableCells + 1);
        table.cdf.resize(kTableCells + 1);
        table.u[0] = t0;
        table.cdf[0] = 0.0;
        for (int k = 1; k <= kTableCells; ++k) {
            const double a = t0 + (t1 - t0) * (k - 1) / kTableCells;
            const double b = t0 + (t1 - t0) * k / kTableCells;
            table.u[k] = b;
            table.cdf[k] = table.cdf[k - 1] + integrate_adaptive(w, a, b, 1e-13, 12);
        }
        const double total = table.cdf[kTableCells];
        for (double& c : table.cdf) c /= total;
        tables_[i] = std::move(table);
    }
}

TwistPlan build_plan(const SegmentedMgf& mgf, const TwistSolution& solution) {
    return TwistPlan(mgf, solution.theta_star, solution.log_mgf_at_star);
}

TwistPlan build_plan(const NetworkSpec& spec, const TwistSolution& solution) {
    return build_plan(SegmentedMgf::from_network(spec), solution);
}

TwistPlan build_null_plan(const SegmentedMgf& mgf) {
    return TwistPlan(mgf, Eigen::VectorXd::Zero(mgf.dim()), 0.0);
}

double TwistPlan::epoch_cdf(double u) const {
    const double t = horizon();
    u = std::clamp(u, 0.0, t);
    const double v = t - u;  // reversed time u corresponds to real time t - u
    double mass = 0.0;       // lambda-weighted epoch mass over real times >= v
    const auto& segs = mgf_.segments();
    for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
        const auto& seg = segs[i];
        if (seg.input.t1 <= v) continue;
        if (seg.input.t0 >= v) {
            mass += segment_means_[i];
            continue;
        }
        if (seg.scalar_exp) {
            const double mu = seg.input.jobs[0].param;
            const double r = seg.input.rate_matrix(0, 0);
            const double c = seg.pbar * theta_star_(0);
            mass += seg.input.lambda *
                    (scalar_epoch_G(mu, r, c, seg.input.t1) - scalar_epoch_G(mu, r, c, v)) / r;
        } else {
            const auto& table = tables_[i];
            const double step = (seg.input.t1 - seg.input.t0) / kTableCells;
            int k = std::clamp(static_cast<int>((v - seg.input.t0) / step), 0, kTableCells - 1);
            auto wfn = [&](double x) { return mgf_.segment_epoch_weight(i, x, theta_star_); };
            const double local = integrate_adaptive(wfn, table.u[k], v, 1e-13, 12);
            const double below = table.cdf[k] + local / (segment_means_[i] / seg.input.lambda);
            mass += segment_means_[i] * (1.0 - below);
        }
    }
    return mass / total_mean_;
}

double TwistPlan::sample_segment_epoch(int i, RunRng& rng) const {
    const auto& seg = mgf_.segments().at(i);
    const double h = rng.uniform_pos();
    if (seg.scalar_exp) {
        const double mu = seg.input.jobs[0].param;
        const double r = seg.input.rate_matrix(0, 0);
        const double c = seg.pbar * theta_star_(0);
        const double g0 = scalar_epoch_G(mu, r, c, seg.input.t0);
        const double g1 = scalar_epoch_G(mu, r, c, seg.input.t1);
        const double y = g0 + h * (g1 - g0);
        const double u = (std::log(mu) + y - log1p_c_exp(c, y)) / r;
        return std::clamp(u, seg.input.t0, seg.input.t1);
    }
    const auto& table = tables_[i];
    const auto it = std::upper_bound(table.cdf.begin(), table.cdf.end(), h);
    int k = std::clamp(static_cast<int>(it - table.cdf.begin()) - 1, 0, kTableCells - 1);
    const double span = table.cdf[k + 1] - table.cdf[k];
    double u = table.u[k];
    if (span > 0.0) {
        u += (table.u[k + 1] - table.u[k]) * (h - table.cdf[k]) / span;
        // two Newton corrections against the exact local integral
        const double weight = segment_means_[i] / seg.input.lambda;  // normalizer
        auto wfn = [&](double x) { return mgf_.segment_epoch_weight(i, x, theta_star_); };
        for (int pass = 0; pass < 2; ++pass) {
            const double f =
                table.cdf[k] + integrate_adaptive(wfn, table.u[k], u, 1e-13, 12) / weight - h;
            const double df = wfn(u) / weight;
            if (df <= 0.0) break;
            u = std::clamp(u - f / df, table.u[k], table.u[k + 1]);
        }
    }
    return u;
}

double TwistPlan::sample_epoch(RunRng& rng) const {
    const auto& segs = mgf_.segments();
    if (segs.size() == 1 && segs[0].scalar_exp && segs[0].input.suffix(0, 0) == 1.0) {
        const double mu = segs[0].input.jobs[0].param;
        const double r = segs[0].input.rate_matrix(0, 0);
        const double t = horizon();
        const double q = theta_star_(0) / mu;
        const double h = rng.uniform_pos();
        const double lg =
            h * std::log(std::exp(r * t) - q) + (1.0 - h) * std::log1p(-q);
        return std::log(std::exp(lg) + q) / r;
    }
    // pick the stretch by its twisted mass, then reverse the real-time draw
    double pick = rng.uniform() * total_mean_;
    int i = 0;
    for (; i + 1 < static_cast<int>(segs.size()); ++i) {
        if (pick < segment_means_[i]) break;
        pick -= segment_means_[i];
    }
    return horizon() - sample_segment_epoch(i, rng);
}

Eigen::VectorXd TwistPlan::sample_job(int i, double u, RunRng& rng) const {
    const auto& seg = mgf_.segments().at(i);
    const int n = mgf_.dim();
    Eigen::VectorXd x;
    if (seg.scalar_exp) {
        x = Eigen::VectorXd::Constant(1, seg.pbar * std::exp(seg.input.rate_matrix(0, 0) * u) *
                                             theta_star_(0));
    } else {
        x = seg.propagate(u) * theta_star_;
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int l = 0; l < n; ++l) {
        switch (seg.input.jobs[l].kind) {
            case JobLaw::Kind::exponential: {
                const double rate = seg.input.jobs[l].param - x(l);
                if (rate <= 0.0) throw DomainExceeded(u, l);
                b(l) = rng.exponential(rate);
                break;
            }
            case JobLaw::Kind::deterministic:
                b(l) = seg.input.jobs[l].param;  // point mass is twist-invariant
                break;
            case JobLaw::Kind::zero:
                break;
        }
    }
    return b;
}

RunSample sample_yn_and_lr(const TwistPlan& plan, int n, RunRng& rng) {
    const auto& segs = plan.mgf().segments();
    const int dim = plan.mgf().dim();
    RunSample out;
    out.y = Eigen::VectorXd::Zero(dim);
    out.arrivals_per_segment.resize(segs.size(), 0);
    for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
        const auto& seg = segs[i];
        const long k = rng.poisson(n * plan.segment_means()[i]);
        out.arrivals_per_segment[i] = k;
        out.arrivals += k;
        for (long e = 0; e < k; ++e) {
            const double u = plan.sample_segment_epoch(i, rng);
            const Eigen::VectorXd b = plan.sample_job(i, u, rng);
            if (seg.scalar_exp) {
                out.y(0) += seg.pbar * std::exp(seg.input.rate_matrix(0, 0) * u) * b(0);
            } else {
                out.y.noalias() += seg.propagate(u).transpose() * b;
            }
        }
    }
    out.log_lr = -plan.theta_star().dot(out.y) + n * plan.log_mgf_at_theta_star();
    return out;
}

CheckedRunSample sample_yn_and_lr_checked(const TwistPlan& plan, int n, RunRng& rng) {
    const auto& segs = plan.mgf().segments();
    const int dim = plan.mgf().dim();
    CheckedRunSample out;
    out.run.y = Eigen::VectorXd::Zero(dim);
    out.run.arrivals_per_segment.resize(segs.size(), 0);
    double event_log = 0.0;
    for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
        const auto& seg = segs[i];
        const double dt = seg.input.t1 - seg.input.t0;
        const double mean_p = n * seg.input.lambda * dt;
        const double mean_q = n * plan.segment_means()[i];
        const long k = rng.poisson(mean_q);
        out.run.arrivals_per_segment[i] = k;
        out.run.arrivals += k;
        // Poisson count ratio
        event_log += (mean_q - mean_p) + k * std::log(mean_p / mean_q);
        const double weight = plan.segment_weight(i);
        for (long e = 0; e < k; ++e) {
            const double u = plan.sample_segment_epoch(i, rng);
            const Eigen::MatrixXd p = seg.propagate(u);
            const Eigen::VectorXd x = p * plan.theta_star();
            const Eigen::VectorXd b = plan.sample_job(i, u, rng);
            out.run.y.noalias() += p.transpose() * b;
            // epoch density ratio: uniform over dt vs beta(x)/weight
            double log_beta = 0.0;
            for (int l = 0; l < dim; ++l) {
                switch (seg.input.jobs[l].kind) {
                    case JobLaw::Kind::exponential: {
                        const double mu = seg.input.jobs[l].param;
                        log_beta += std::log(mu / (mu - x(l)));
                        break;
                    }
                    case JobLaw::Kind::deterministic:
                        log_beta += seg.input.jobs[l].param * x(l);
                        break;
                    case JobLaw::Kind::zero:
                        break;
                }
            }
            event_log += std::log(weight / dt) - log_beta;
            // job density ratios: log beta_l(x_l) - x_l b_l per component
            event_log += log_beta - x.dot(b);
        }
    }
    out.run.log_lr = -plan.theta_star().dot(out.run.y) + n * plan.log_mgf_at_theta_star();
    out.event_level_log_lr = event_log;
    return out;
}

}  // namespace fluidnet
