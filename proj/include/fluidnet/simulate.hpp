#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fluidnet/model.hpp"
#include "fluidnet/modulation.hpp"
#include "fluidnet/twist.hpp"

namespace fluidnet {

struct StoppingRule {
    double eps = 0.1;             // target half-width / p_hat
    double critical_value = 1.96; // T
    long batch = 100;             // precision checked once per batch
    long min_runs = 1000;         // variance estimate stabilizer
    long max_runs = 100000000;
};

// Numerically stable streaming mean/variance with an exact pairwise combine,
// so that merging per-batch accumulators in batch order is deterministic for
// any worker count.
struct RunningStats {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x);
    void merge(const RunningStats& o);
    double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
    double second_moment() const { return n > 0 ? m2 / n + mean * mean : 0.0; }
};

struct Estimate {
    double p_hat = 0.0;
    double variance_hat = 0.0;
    double half_width = 0.0;  // critical_value * sqrt(variance_hat / runs)
    double second_moment = 0.0;
    long runs = 0;
    double wall_time = 0.0;   // seconds; excluded from emitted files
    std::uint64_t master_seed = 0;
    bool capped = false;      // max_runs hit before the precision target
};

struct PathRecord {
    bool valid = false;
    BackgroundPath path;
    double rate = 0.0;           // I_f(a)
    Eigen::VectorXd theta_star;
};

struct RunDiagnostics {
    PathRecord best_path;        // minimal-rate path seen (modulated runs)
    long bound_violations = 0;   // runs where L*I > e^{-n I_f(a)}
    bool record_paths = false;
    std::vector<PathRecord> paths;  // per-run trace, in run order
};

Estimate estimate_is(const NetworkSpec& spec, const RareTarget& target,
                     const StoppingRule& rule, std::uint64_t seed, int workers = 1,
                     RunDiagnostics* diag = nullptr);
Estimate estimate_mc(const NetworkSpec& spec, const RareTarget& target,
                     const StoppingRule& rule, std::uint64_t seed, int workers = 1);

Estimate estimate_is(const ModulatedNetworkSpec& spec, const RareTarget& target,
                     const StoppingRule& rule, std::uint64_t seed, int workers = 1,
                     RunDiagnostics* diag = nullptr);
Estimate estimate_mc(const ModulatedNetworkSpec& spec, const RareTarget& target,
                     const StoppingRule& rule, std::uint64_t seed, int workers = 1);

struct SweepRow {
    int n = 0;
    Estimate estimate;
    double predicted_runs = 0.0;  // alpha * n^{D/2}
    double br_approx = 0.0;       // Bahadur-Rao p approximation
    std::uint64_t seed = 0;
};

std::vector<SweepRow> sweep_is(const NetworkSpec& spec, const Eigen::VectorXd& a,
                               const std::vector<int>& n_list, const StoppingRule& rule,
                               std::uint64_t seed, int workers = 1);

// Fixed-size path survey for the decay-rate experiments: samples `runs`
// background paths, solves the per-path twist, and records every
// (path, I_f, theta*_f) along with the running optimum.
RunDiagnostics decay_survey(const ModulatedNetworkSpec& spec, const Eigen::VectorXd& a,
                            long runs, std::uint64_t seed, int workers = 1);

}  // namespace fluidnet
