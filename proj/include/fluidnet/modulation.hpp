#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fluidnet/analytics.hpp"
#include "fluidnet/model.hpp"
#include "fluidnet/rng.hpp"
#include "fluidnet/twist.hpp"

namespace fluidnet {

// One realization of the background chain on [0, horizon]: state j_i on
// [times[i], times[i+1]).
struct BackgroundPath {
    std::vector<int> states;
    std::vector<double> times;  // size states.size() + 1; front 0, back horizon

    int segments() const { return static_cast<int>(states.size()); }
    int jumps() const { return segments() - 1; }
};

BackgroundPath sample_background_path(const ModulatedNetworkSpec& spec, RunRng& rng);

// Constant path in the given state (no jumps).
BackgroundPath constant_path(const ModulatedNetworkSpec& spec, int state);

// Piecewise stretches with suffix decay products D_{i+1} ... D_K, so each
// stretch's propagate() is the full path-conditional decay P_i(u).
std::vector<SegmentInput> path_segments(const ModulatedNetworkSpec& spec,
                                        const BackgroundPath& path);
SegmentedMgf path_mgf(const ModulatedNetworkSpec& spec, const BackgroundPath& path);
double path_log_mgf(const ModulatedNetworkSpec& spec, const BackgroundPath& path,
                    const Eigen::VectorXd& theta);

struct PathTwist {
    TwistSolution solution;
    TwistPlan plan;
};

// Per-path twist, warm-started from the best of the supplied candidates
// (typically the constant-path twists); falls back to a cold start.
PathTwist solve_path_twist(const ModulatedNetworkSpec& spec, const BackgroundPath& path,
                           const Eigen::VectorXd& a,
                           const std::vector<Eigen::VectorXd>* warm_starts = nullptr);

// Twists of the d constant background paths, used as warm-start candidates.
std::vector<Eigen::VectorXd> constant_path_warm_starts(const ModulatedNetworkSpec& spec,
                                                       const Eigen::VectorXd& a);

// Ordering for the empirically optimal path report: smaller decay rate first;
// ties broken by fewer jumps, then lexicographically smaller state sequence,
// then earlier jump times.
bool path_rate_less(double rate_a, const BackgroundPath& a, double rate_b,
                    const BackgroundPath& b);

}  // namespace fluidnet
