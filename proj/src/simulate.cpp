#include "fluidnet/simulate.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

#include "fluidnet/analytics.hpp"

namespace fluidnet {

void RunningStats::add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
}

void RunningStats::merge(const RunningStats& o) {
    if (o.n == 0) return;
    if (n == 0) {
        *this = o;
        return;
    }
    const double delta = o.mean - mean;
    const long total = n + o.n;
    mean += delta * static_cast<double>(o.n) / static_cast<double>(total);
    m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) /
                     static_cast<double>(total);
    n = total;
}

namespace {

struct BatchResult {
    RunningStats stats;
    long bound_violations = 0;
    PathRecord best;
    std::vector<PathRecord> trace;
};

void merge_best(PathRecord& into, const PathRecord& from) {
    if (!from.valid) return;
    if (!into.valid || path_rate_less(from.rate, from.path, into.rate, into.path)) into = from;
}

// Batches are computed in parallel windows but merged strictly in batch-index
// order, and the stopping rule is evaluated after each merged batch; results
// are therefore identical for any worker count.
Estimate drive(const StoppingRule& rule, std::uint64_t seed, int workers,
               const std::function<BatchResult(long)>& batch_fn, RunDiagnostics* diag) {
    const auto start = std::chrono::steady_clock::now();
    workers = std::max(1, workers);
    const long window = workers == 1 ? 1 : 4L * workers;

    RunningStats stats;
    RunDiagnostics local;
    bool stopped = false;
    bool capped = false;
    long next_batch = 0;
    std::vector<BatchResult> results;
    while (!stopped) {
        results.assign(window, BatchResult{});
        if (workers == 1) {
            results[0] = batch_fn(next_batch);
        } else {
            std::atomic<long> cursor{0};
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (long k = cursor.fetch_add(1); k < window; k = cursor.fetch_add(1)) {
                        results[k] = batch_fn(next_batch + k);
                    }
                });
            }
            for (auto& th : pool) th.join();
        }
        for (long k = 0; k < window && !stopped; ++k) {
            stats.merge(results[k].stats);
            local.bound_violations += results[k].bound_violations;
            merge_best(local.best_path, results[k].best);
            if (diag != nullptr && diag->record_paths) {
                for (auto& rec : results[k].trace) local.paths.push_back(std::move(rec));
            }
            const long runs = stats.n;
            const double hw =
                rule.critical_value * std::sqrt(stats.variance() / static_cast<double>(runs));
            if (runs >= rule.min_runs && stats.mean > 0.0 && hw <= rule.eps * stats.mean) {
                stopped = true;
            } else if (runs >= rule.max_runs) {
                stopped = true;
                capped = true;
            }
        }
        next_batch += window;
    }

    Estimate est;
    est.p_hat = stats.mean;
    est.variance_hat = stats.variance();
    est.half_width =
        rule.critical_value * std::sqrt(est.variance_hat / static_cast<double>(stats.n));
    est.second_moment = stats.second_moment();
    est.runs = stats.n;
    est.master_seed = seed;
    est.capped = capped;
    est.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (diag != nullptr) {
        diag->best_path = local.best_path;
        diag->bound_violations = local.bound_violations;
        diag->paths = std::move(local.paths);
    }
    return est;
}

bool hits_target(const Eigen::VectorXd& y, const Eigen::VectorXd& a, int n) {
    return (y.array() >= static_cast<double>(n) * a.array()).all();
}

// log L*I <= -n I_f(a); slack for the float evaluation of both sides.
bool bound_violated(double log_lr, double rate, int n) {
    const double limit = -static_cast<double>(n) * rate;
    return log_lr > limit + 1e-9 * (1.0 + std::abs(limit));
}

Estimate estimate_plain(const NetworkSpec& spec, const RareTarget& target,
                        const StoppingRule& rule, std::uint64_t seed, int workers,
                        RunDiagnostics* diag, bool twisted) {
    const SegmentedMgf mgf = SegmentedMgf::from_network(spec);
    double rate = 0.0;
    TwistPlan plan = build_null_plan(mgf);
    if (twisted) {
        const TwistSolution sol = solve_twist(mgf, target.a);
        rate = sol.rate;
        plan = build_plan(mgf, sol);
    }
    auto batch_fn = [&](long b) {
        BatchResult res;
        for (long j = 0; j < rule.batch; ++j) {
            const std::uint64_t run_index = static_cast<std::uint64_t>(b * rule.batch + j);
            RunRng rng(seed, run_index);
            const RunSample run = sample_yn_and_lr(plan, target.n, rng);
            const bool hit = hits_target(run.y, target.a, target.n);
            res.stats.add(hit ? std::exp(run.log_lr) : 0.0);
            if (twisted && hit && bound_violated(run.log_lr, rate, target.n)) {
                ++res.bound_violations;
            }
        }
        return res;
    };
    return drive(rule, seed, workers, batch_fn, diag);
}

Estimate estimate_modulated(const ModulatedNetworkSpec& spec, const RareTarget& target,
                            const StoppingRule& rule, std::uint64_t seed, int workers,
                            RunDiagnostics* diag, bool twisted) {
    std::vector<Eigen::VectorXd> warm;
    if (twisted) warm = constant_path_warm_starts(spec, target.a);
    const bool record = diag != nullptr && diag->record_paths;
    auto batch_fn = [&](long b) {
        BatchResult res;
        if (record) res.trace.reserve(rule.batch);
        for (long j = 0; j < rule.batch; ++j) {
            const std::uint64_t run_index = static_cast<std::uint64_t>(b * rule.batch + j);
            RunRng rng(seed, run_index);
            const BackgroundPath path = sample_background_path(spec, rng);
            if (twisted) {
                PathTwist pt = solve_path_twist(spec, path, target.a, &warm);
                const RunSample run = sample_yn_and_lr(pt.plan, target.n, rng);
                const bool hit = hits_target(run.y, target.a, target.n);
                res.stats.add(hit ? std::exp(run.log_lr) : 0.0);
                if (hit && bound_violated(run.log_lr, pt.solution.rate, target.n)) {
                    ++res.bound_violations;
                }
                PathRecord rec{true, path, pt.solution.rate, pt.solution.theta_star};
                merge_best(res.best, rec);
                if (record) res.trace.push_back(std::move(rec));
            } else {
                const TwistPlan plan = build_null_plan(path_mgf(spec, path));
                const RunSample run = sample_yn_and_lr(plan, target.n, rng);
                res.stats.add(hits_target(run.y, target.a, target.n) ? 1.0 : 0.0);
            }
        }
        return res;
    };
    return drive(rule, seed, workers, batch_fn, diag);
}

}  // namespace

Estimate estimate_is(const NetworkSpec& spec, const RareTarget& target, const StoppingRule& rule,
                     std::uint64_t seed, int workers, RunDiagnostics* diag) {
    return estimate_plain(spec, target, rule, seed, workers, diag, true);
}

Estimate estimate_mc(const NetworkSpec& spec, const RareTarget& target, const StoppingRule& rule,
                     std::uint64_t seed, int workers) {
    return estimate_plain(spec, target, rule, seed, workers, nullptr, false);
}

Estimate estimate_is(const ModulatedNetworkSpec& spec, const RareTarget& target,
                     const StoppingRule& rule, std::uint64_t seed, int workers,
                     RunDiagnostics* diag) {
    return estimate_modulated(spec, target, rule, seed, workers, diag, true);
}

Estimate estimate_mc(const ModulatedNetworkSpec& spec, const RareTarget& target,
                     const StoppingRule& rule, std::uint64_t seed, int workers) {
    return estimate_modulated(spec, target, rule, seed, workers, nullptr, false);
}

std::vector<SweepRow> sweep_is(const NetworkSpec& spec, const Eigen::VectorXd& a,
                               const std::vector<int>& n_list, const StoppingRule& rule,
                               std::uint64_t seed, int workers) {
    const TwistSolution sol = solve_twist(SegmentedMgf::from_network(spec), a);
    std::vector<SweepRow> out;
    out.reserve(n_list.size());
    for (int n : n_list) {
        SweepRow row;
        row.n = n;
        row.seed = splitmix64(seed + static_cast<std::uint64_t>(n));
        RareTarget target{a, n};
        row.estimate = estimate_is(spec, target, rule, row.seed, workers);
        row.predicted_runs = predicted_runs(sol, n, rule.eps, rule.critical_value);
        row.br_approx = bahadur_rao_p(sol, n);
        out.push_back(std::move(row));
    }
    return out;
}

RunDiagnostics decay_survey(const ModulatedNetworkSpec& spec, const Eigen::VectorXd& a,
                            long runs, std::uint64_t seed, int workers) {
    const std::vector<Eigen::VectorXd> warm = constant_path_warm_starts(spec, a);
    workers = std::max(1, workers);
    const long batch = 100;
    const long batches = (runs + batch - 1) / batch;

    std::vector<std::vector<PathRecord>> traces(batches);
    std::atomic<long> cursor{0};
    auto work = [&] {
        for (long b = cursor.fetch_add(1); b < batches; b = cursor.fetch_add(1)) {
            const long count = std::min(batch, runs - b * batch);
            traces[b].reserve(count);
            for (long j = 0; j < count; ++j) {
                const std::uint64_t run_index = static_cast<std::uint64_t>(b * batch + j);
                RunRng rng(seed, run_index);
                const BackgroundPath path = sample_background_path(spec, rng);
                const PathTwist pt = solve_path_twist(spec, path, a, &warm);
                traces[b].push_back(
                    PathRecord{true, path, pt.solution.rate, pt.solution.theta_star});
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    RunDiagnostics diag;
    diag.record_paths = true;
    diag.paths.reserve(runs);
    for (auto& tr : traces) {
        for (auto& rec : tr) {
            merge_best(diag.best_path, rec);
            diag.paths.push_back(std::move(rec));
        }
    }
    return diag;
}

}  // namespace fluidnet
