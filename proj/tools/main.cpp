#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fluidnet/analytics.hpp"
#include "fluidnet/config.hpp"
#include "fluidnet/modulation.hpp"
#include "fluidnet/moments.hpp"
#include "fluidnet/simulate.hpp"
#include "fluidnet/twist.hpp"

namespace {

constexpr const char* kVersion = "fluidnet 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCapped = 4;

using namespace fluidnet;

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string join_ints(const std::vector<int>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += sep;
        out += std::to_string(v[i]);
    }
    return out;
}

// one-based states and inner jump times of a path, ';'-separated
std::string path_states(const BackgroundPath& p) {
    std::vector<int> s;
    for (int j : p.states) s.push_back(j + 1);
    return join_ints(s, ';');
}

std::string path_jump_times(const BackgroundPath& p) {
    std::string out;
    for (std::size_t i = 1; i + 1 < p.times.size(); ++i) {
        if (i > 1) out += ';';
        out += fmt(p.times[i]);
    }
    return out;
}

std::string join_vector(const Eigen::VectorXd& v, char sep) {
    std::string out;
    for (int i = 0; i < v.size(); ++i) {
        if (i > 0) out += sep;
        out += fmt(v(i));
    }
    return out;
}

struct Cli {
    ExperimentConfig cfg;
    std::string header;
    std::filesystem::path out_dir;
    int workers = 1;
};

int run_twist_info(const Cli& cli) {
    if (cli.cfg.modulated && cli.cfg.mod.num_states != 1) {
        std::cerr << "twist-info requires a non-modulated model\n";
        return kExitConfig;
    }
    if (!cli.cfg.has_target) {
        std::cerr << "twist-info requires a [target] section\n";
        return kExitConfig;
    }
    const NetworkSpec spec = cli.cfg.modulated ? cli.cfg.mod.to_network() : cli.cfg.network;
    for (const auto& w : rarity_warnings(spec, RareTarget{cli.cfg.a, 1})) {
        std::cerr << "warning: " << w << "\n";
    }
    const SegmentedMgf mgf = SegmentedMgf::from_network(spec);
    const TwistSolution sol = solve_twist(mgf, cli.cfg.a);
    const TwistPlan plan = build_plan(mgf, sol);

    std::ostringstream info;
    info << cli.header << "key,value\n";
    for (int l = 0; l < spec.nodes; ++l) {
        info << "theta_star_" << l + 1 << "," << fmt(sol.theta_star(l)) << "\n";
    }
    for (int l = 0; l < spec.nodes; ++l) {
        info << "b_star_" << l + 1 << "," << fmt(sol.b_star(l)) << "\n";
    }
    info << "rate," << fmt(sol.rate) << "\n";
    info << "log_mgf," << fmt(sol.log_mgf_at_star) << "\n";
    info << "tau," << fmt(sol.tau) << "\n";
    info << "active_count," << sol.active_count() << "\n";
    info << "q_arrival_mean," << fmt(plan.poisson_mean()) << "\n";
    info << "alpha," << fmt(alpha_constant(sol, cli.cfg.stopping.eps, cli.cfg.stopping.critical_value))
         << "\n";
    for (int n : cli.cfg.n_values) {
        info << "predicted_runs_n" << n << ","
             << fmt(predicted_runs(sol, n, cli.cfg.stopping.eps, cli.cfg.stopping.critical_value))
             << "\n";
    }
    write_file(cli.out_dir / "twist_info.csv", info.str());

    // epoch density in reversed (U) time and real time, plus twisted job rates
    const double t = spec.horizon;
    const double weight = plan.poisson_mean() / spec.lambda;  // int of beta over [0,t]
    std::ostringstream dens;
    dens << cli.header << "u,density_u,real_time,density_real";
    for (int l = 0; l < spec.nodes; ++l) dens << ",job_rate_" << l + 1;
    dens << "\n";
    const auto& seg = mgf.segments()[0];
    for (int k = 0; k <= cli.cfg.density_points; ++k) {
        const double u = t * k / cli.cfg.density_points;  // reversed time
        const double real = t - u;
        const double f = mgf.segment_epoch_weight(0, real, sol.theta_star) / weight;
        dens << fmt(u) << "," << fmt(f) << "," << fmt(real) << "," << fmt(f);
        const Eigen::VectorXd x = seg.propagate(real) * sol.theta_star;
        for (int l = 0; l < spec.nodes; ++l) {
            const bool expo = spec.jobs[l].kind == JobLaw::Kind::exponential;
            dens << "," << (expo ? fmt(spec.jobs[l].param - x(l)) : std::string("nan"));
        }
        dens << "\n";
    }
    write_file(cli.out_dir / "density.csv", dens.str());
    return kExitOk;
}

int run_estimate(const Cli& cli, bool twisted) {
    if (!cli.cfg.has_target || cli.cfg.n_values.empty()) {
        std::cerr << "is/mc modes require [target] with a and n\n";
        return kExitConfig;
    }
    std::ostringstream out;
    out << cli.header << "n,p_hat,half_width,variance,second_moment,runs,capped,seed\n";
    bool capped = false;
    for (int n : cli.cfg.n_values) {
        const RareTarget target{cli.cfg.a, n};
        Estimate est;
        if (cli.cfg.modulated) {
            est = twisted ? estimate_is(cli.cfg.mod, target, cli.cfg.stopping, cli.cfg.seed,
                                        cli.workers)
                          : estimate_mc(cli.cfg.mod, target, cli.cfg.stopping, cli.cfg.seed,
                                        cli.workers);
        } else {
            est = twisted ? estimate_is(cli.cfg.network, target, cli.cfg.stopping, cli.cfg.seed,
                                        cli.workers)
                          : estimate_mc(cli.cfg.network, target, cli.cfg.stopping, cli.cfg.seed,
                                        cli.workers);
        }
        capped = capped || est.capped;
        out << n << "," << fmt(est.p_hat) << "," << fmt(est.half_width) << ","
            << fmt(est.variance_hat) << "," << fmt(est.second_moment) << "," << est.runs << ","
            << (est.capped ? 1 : 0) << "," << est.master_seed << "\n";
    }
    write_file(cli.out_dir / "estimate.csv", out.str());
    return capped ? kExitCapped : kExitOk;
}

int run_sweep(const Cli& cli) {
    if (cli.cfg.modulated) {
        std::cerr << "sweep mode requires a non-modulated model\n";
        return kExitConfig;
    }
    if (!cli.cfg.has_target || cli.cfg.n_values.empty()) {
        std::cerr << "sweep mode requires [target] with a and a non-empty n list\n";
        return kExitConfig;
    }
    const auto rows = sweep_is(cli.cfg.network, cli.cfg.a, cli.cfg.n_values, cli.cfg.stopping,
                               cli.cfg.seed, cli.workers);
    std::ostringstream out;
    out << cli.header << "n,p_hat,half_width,runs,predicted_runs,br_approx,seed\n";
    bool capped = false;
    for (const auto& row : rows) {
        capped = capped || row.estimate.capped;
        out << row.n << "," << fmt(row.estimate.p_hat) << "," << fmt(row.estimate.half_width)
            << "," << row.estimate.runs << "," << fmt(row.predicted_runs) << ","
            << fmt(row.br_approx) << "," << row.seed << "\n";
    }
    write_file(cli.out_dir / "sweep.csv", out.str());
    return capped ? kExitCapped : kExitOk;
}

int run_moments(const Cli& cli) {
    const ModulatedNetworkSpec spec = cli.cfg.as_modulated();
    const int L = spec.nodes;
    Eigen::VectorXd x0 = cli.cfg.has_moments ? cli.cfg.x0 : Eigen::VectorXd::Zero(L);
    std::vector<double> grid;
    for (int k = 0; k < cli.cfg.moments_points; ++k) {
        grid.push_back(cli.cfg.moments_tmax * k / (cli.cfg.moments_points - 1));
    }
    const MomentState ms = transient_moments(spec, x0, grid, true);

    std::ostringstream out;
    out << cli.header << "t";
    for (int l = 0; l < L; ++l) out << ",mean_" << l + 1;
    for (int l = 0; l < L; ++l) out << ",var_" << l + 1;
    for (int l = 0; l < L; ++l) {
        for (int m = l + 1; m < L; ++m) out << ",corr_" << l + 1 << "_" << m + 1;
    }
    out << "\n";
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const Eigen::VectorXd mean = node_means(ms.z1.col(g), spec.num_states, L);
        const Eigen::MatrixXd second = node_second_moments(ms.z2.col(g), spec.num_states, L);
        const Eigen::MatrixXd corr = correlation_matrix(mean, second);
        out << fmt(grid[g]);
        for (int l = 0; l < L; ++l) out << "," << fmt(mean(l));
        for (int l = 0; l < L; ++l) out << "," << fmt(second(l, l) - mean(l) * mean(l));
        for (int l = 0; l < L; ++l) {
            for (int m = l + 1; m < L; ++m) out << "," << fmt(corr(l, m));
        }
        out << "\n";
    }
    write_file(cli.out_dir / "moments.csv", out.str());
    return kExitOk;
}

int run_decay(const Cli& cli) {
    if (!cli.cfg.modulated) {
        std::cerr << "decay mode requires a modulated model\n";
        return kExitConfig;
    }
    if (!cli.cfg.has_target) {
        std::cerr << "decay mode requires a [target] section\n";
        return kExitConfig;
    }
    const RunDiagnostics diag =
        decay_survey(cli.cfg.mod, cli.cfg.a, cli.cfg.decay_runs, cli.cfg.seed, cli.workers);

    std::ostringstream out;
    out << cli.header << "run,rate,jumps,states,jump_times,theta_star\n";
    for (std::size_t i = 0; i < diag.paths.size(); ++i) {
        const auto& rec = diag.paths[i];
        out << i << "," << fmt(rec.rate) << "," << rec.path.jumps() << ","
            << path_states(rec.path) << "," << path_jump_times(rec.path) << ","
            << join_vector(rec.theta_star, ';') << "\n";
    }
    write_file(cli.out_dir / "decay.csv", out.str());

    std::ostringstream sum;
    sum << cli.header << "key,value\n";
    sum << "runs," << diag.paths.size() << "\n";
    const auto& best = diag.best_path;
    sum << "best_rate," << fmt(best.rate) << "\n";
    sum << "best_states," << path_states(best.path) << "\n";
    sum << "best_jump_times," << path_jump_times(best.path) << "\n";
    sum << "best_theta_star," << join_vector(best.theta_star, ';') << "\n";
    // exact per-segment arrival means on the optimal path, under Q and under P
    const SegmentedMgf mgf = path_mgf(cli.cfg.mod, best.path);
    TwistSolution sol;
    sol.theta_star = best.theta_star;
    sol.log_mgf_at_star = mgf.value(best.theta_star);
    const TwistPlan plan = build_plan(mgf, sol);
    for (std::size_t i = 0; i < plan.segment_means().size(); ++i) {
        const auto& in = mgf.segments()[i].input;
        sum << "segment_" << i + 1 << "_q_mean," << fmt(plan.segment_means()[i]) << "\n";
        sum << "segment_" << i + 1 << "_p_mean," << fmt(in.lambda * (in.t1 - in.t0)) << "\n";
    }
    write_file(cli.out_dir / "decay_summary.csv", sum.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rare-event simulation for linear stochastic fluid networks"};
    std::string config_path;
    std::string mode;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 1;
    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_option("--mode", mode, "one of is, mc, sweep, twist-info, moments, decay")->required();
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides [run] seed)");
    app.add_option("--out", out_path, "output directory")->required();
    app.add_option("--workers", workers, "worker thread count")->check(CLI::PositiveNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }
    seed_given = seed_opt->count() > 0;

    Cli cli;
    try {
        cli.cfg = parse_config_file(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (seed_given) {
        cli.cfg.has_seed = true;
        cli.cfg.seed = seed;
    }
    if (!cli.cfg.has_seed) {
        std::cerr << "config error: no seed given (--seed or [run] seed)\n";
        return kExitConfig;
    }
    cli.workers = workers;
    cli.out_dir = out_path;
    cli.header = config_header(cli.cfg, kVersion);

    std::error_code ec;
    std::filesystem::create_directories(cli.out_dir, ec);
    if (ec) {
        std::cerr << "cannot create output directory: " << ec.message() << "\n";
        return kExitConfig;
    }

    try {
        if (mode == "twist-info") return run_twist_info(cli);
        if (mode == "is") return run_estimate(cli, true);
        if (mode == "mc") return run_estimate(cli, false);
        if (mode == "sweep") return run_sweep(cli);
        if (mode == "moments") return run_moments(cli);
        if (mode == "decay") return run_decay(cli);
        std::cerr << "unknown mode: " << mode << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::ostringstream diag;
        diag << cli.header << "error," << e.what() << "\n";
        try {
            write_file(cli.out_dir / "error.csv", diag.str());
        } catch (...) {
        }
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
}
