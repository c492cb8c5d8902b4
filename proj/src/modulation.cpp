#include "fluidnet/modulation.hpp"

#include <cmath>
#include <stdexcept>

#include "fluidnet/linops.hpp"

namespace fluidnet {

namespace {
constexpr int kMaxJumps = 10000;
constexpr double kRateTieTol = 1e-12;
}  // namespace

BackgroundPath sample_background_path(const ModulatedNetworkSpec& spec, RunRng& rng) {
    BackgroundPath path;
    int j = spec.initial_state;
    double t = 0.0;
    path.times.push_back(0.0);
    while (true) {
        const double rate = -spec.generator(j, j);
        double hold = spec.horizon - t;  // absorbing state: no exponential draw
        if (rate > 0.0) hold = rng.exponential(rate);
        path.states.push_back(j);
        if (t + hold >= spec.horizon || rate <= 0.0) {
            path.times.push_back(spec.horizon);
            return path;
        }
        t += hold;
        path.times.push_back(t);
        if (path.jumps() + 1 > kMaxJumps) {
            throw std::runtime_error("background path exceeded jump limit");
        }
        double pick = rng.uniform() * rate;
        int next = j;
        for (int k = 0; k < spec.num_states; ++k) {
            if (k == j) continue;
            pick -= spec.generator(j, k);
            next = k;
            if (pick < 0.0) break;
        }
        j = next;
    }
}

BackgroundPath constant_path(const ModulatedNetworkSpec& spec, int state) {
    BackgroundPath path;
    path.states = {state};
    path.times = {0.0, spec.horizon};
    return path;
}

std::vector<SegmentInput> path_segments(const ModulatedNetworkSpec& spec,
                                        const BackgroundPath& path) {
    const int k = path.segments();
    const int n = spec.nodes;
    std::vector<Eigen::MatrixXd> rate(k);
    for (int i = 0; i < k; ++i) {
        const auto& st = spec.states[path.states[i]];
        rate[i] = build_rate_matrix(st.drain, st.routing);
    }
    // suffix_i = D_{i+1} ... D_K with D_i = e^{-dt_i R_{j_i}}
    std::vector<SegmentInput> out(k);
    Eigen::MatrixXd suffix = Eigen::MatrixXd::Identity(n, n);
    for (int i = k - 1; i >= 0; --i) {
        const auto& st = spec.states[path.states[i]];
        out[i].t0 = path.times[i];
        out[i].t1 = path.times[i + 1];
        out[i].lambda = st.lambda;
        out[i].jobs = st.jobs;
        out[i].rate_matrix = rate[i];
        out[i].suffix = suffix;
        if (i > 0) suffix = matrix_exp_neg(rate[i], out[i].t1 - out[i].t0) * suffix;
    }
    return out;
}

SegmentedMgf path_mgf(const ModulatedNetworkSpec& spec, const BackgroundPath& path) {
    return SegmentedMgf(path_segments(spec, path));
}

double path_log_mgf(const ModulatedNetworkSpec& spec, const BackgroundPath& path,
                    const Eigen::VectorXd& theta) {
    return path_mgf(spec, path).value(theta);
}

PathTwist solve_path_twist(const ModulatedNetworkSpec& spec, const BackgroundPath& path,
                           const Eigen::VectorXd& a,
                           const std::vector<Eigen::VectorXd>* warm_starts) {
    const SegmentedMgf mgf = path_mgf(spec, path);
    const Eigen::VectorXd* best = nullptr;
    double best_obj = 0.0;  // objective of the cold start theta = 0
    if (warm_starts != nullptr) {
        for (const auto& w : *warm_starts) {
            if (w.size() != mgf.dim()) continue;
            try {
                const double obj = w.dot(a) - mgf.value(w);
                if (best == nullptr || obj > best_obj) {
                    best = &w;
                    best_obj = obj;
                }
            } catch (const DomainExceeded&) {
                // candidate outside this path's MGF domain
            }
        }
    }
    TwistSolution sol = solve_twist(mgf, a, best);
    TwistPlan plan = build_plan(mgf, sol);
    return PathTwist{std::move(sol), std::move(plan)};
}

std::vector<Eigen::VectorXd> constant_path_warm_starts(const ModulatedNetworkSpec& spec,
                                                       const Eigen::VectorXd& a) {
    std::vector<Eigen::VectorXd> out;
    for (int j = 0; j < spec.num_states; ++j) {
        try {
            out.push_back(solve_twist(path_mgf(spec, constant_path(spec, j)), a).theta_star);
        } catch (const NonConvergence&) {
            // skip; remaining candidates and the cold start stay available
        }
    }
    return out;
}

bool path_rate_less(double rate_a, const BackgroundPath& a, double rate_b,
                    const BackgroundPath& b) {
    if (std::abs(rate_a - rate_b) > kRateTieTol) return rate_a < rate_b;
    if (a.jumps() != b.jumps()) return a.jumps() < b.jumps();
    if (a.states != b.states) return a.states < b.states;
    return a.times < b.times;
}

}  // namespace fluidnet
