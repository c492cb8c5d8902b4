#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fluidnet/analytics.hpp"
#include "fluidnet/model.hpp"
#include "fluidnet/rng.hpp"

namespace fluidnet {

// Everything a sampler needs for one importance-sampling measure Q: the
// twisted per-segment Poisson means, epoch laws, and job-twist coefficients.
// theta_star = 0 reproduces the original measure P exactly.
class TwistPlan {
  public:
    TwistPlan(SegmentedMgf mgf, Eigen::VectorXd theta_star, double log_mgf_at_star);

    const SegmentedMgf& mgf() const { return mgf_; }
    const Eigen::VectorXd& theta_star() const { return theta_star_; }
    double log_mgf_at_theta_star() const { return log_mgf_at_star_; }
    double horizon() const { return mgf_.horizon(); }

    // Twisted Poisson mean over the whole horizon (>= lambda t when theta* >= 0).
    double poisson_mean() const { return total_mean_; }
    const std::vector<double>& segment_means() const { return segment_means_; }

    // Epoch CDF in reversed (U) time; F(0) = 0, F(horizon) = 1, strictly increasing.
    double epoch_cdf(double u) const;
    // One epoch in reversed time: closed-form inverse for a single node with
    // exponential jobs, numeric inversion otherwise.
    double sample_epoch(RunRng& rng) const;

    // One epoch in real time within segment i.
    double sample_segment_epoch(int i, RunRng& rng) const;
    // Job vector for an arrival at real time u in segment i; exponential
    // components are twisted to rate mu_l - (P_i(u) theta*)_l.
    Eigen::VectorXd sample_job(int i, double u, RunRng& rng) const;

    // Normalizing constant of the epoch density of segment i (integral of beta).
    double segment_weight(int i) const { return segment_means_[i] / mgf_.segments()[i].input.lambda; }

  private:
    friend struct RunSampler;

    SegmentedMgf mgf_;
    Eigen::VectorXd theta_star_;
    double log_mgf_at_star_;
    std::vector<double> segment_means_;
    double total_mean_;

    // tabulated epoch CDF per segment (empty for scalar-exponential segments,
    // which invert in closed form)
    struct EpochTable {
        std::vector<double> u;
        std::vector<double> cdf;  // normalized to [0,1]
    };
    std::vector<EpochTable> tables_;
};

TwistPlan build_plan(const SegmentedMgf& mgf, const TwistSolution& solution);
TwistPlan build_plan(const NetworkSpec& spec, const TwistSolution& solution);
// The original measure P as a degenerate plan (theta* = 0).
TwistPlan build_null_plan(const SegmentedMgf& mgf);

struct RunSample {
    Eigen::VectorXd y;           // Y_n(t)
    double log_lr = 0.0;         // log L = -<theta*, Y_n> + n log M(theta*)
    long arrivals = 0;
    std::vector<long> arrivals_per_segment;
};

// Sums n i.i.d. Q-samples of X(t) (equivalently one compound-Poisson draw
// with n-fold intensity) and computes the likelihood ratio from the returned
// Y_n, never from per-event bookkeeping.
RunSample sample_yn_and_lr(const TwistPlan& plan, int n, RunRng& rng);

// Test/debug variant: additionally accumulates the event-level likelihood
// ratio (Poisson count ratio + epoch density ratios + job density ratios),
// which must equal the closed form.
struct CheckedRunSample {
    RunSample run;
    double event_level_log_lr = 0.0;
};
CheckedRunSample sample_yn_and_lr_checked(const TwistPlan& plan, int n, RunRng& rng);

}  // namespace fluidnet
