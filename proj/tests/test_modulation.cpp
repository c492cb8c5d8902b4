#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fluidnet/linops.hpp"
#include "fluidnet/modulation.hpp"
#include "fluidnet/quadrature.hpp"

using namespace fluidnet;

namespace {

// two-state single-node system from the first modulated experiment
ModulatedNetworkSpec mod_ex1() {
    ModulatedNetworkSpec spec;
    spec.nodes = 1;
    spec.num_states = 2;
    spec.generator = Eigen::MatrixXd(2, 2);
    spec.generator << -2.0, 2.0, 2.0, -2.0;
    spec.initial_state = 0;
    spec.horizon = 1.0;
    ModulatedNetworkSpec::State s;
    s.lambda = 2.0;
    s.jobs = {JobLaw::exponential(0.5)};
    s.drain = Eigen::VectorXd::Constant(1, 5.0);
    s.routing = Eigen::MatrixXd::Constant(1, 1, 1.0);
    spec.states.push_back(s);
    s.lambda = 1.0;
    s.jobs = {JobLaw::exponential(1.0)};
    s.drain = Eigen::VectorXd::Constant(1, 1.0);
    spec.states.push_back(s);
    return spec;
}

// second modulated experiment (slow switch, small decay rate)
ModulatedNetworkSpec mod_ex2() {
    ModulatedNetworkSpec spec;
    spec.nodes = 1;
    spec.num_states = 2;
    spec.generator = Eigen::MatrixXd(2, 2);
    spec.generator << -1.0, 1.0, 1.0, -1.0;
    spec.initial_state = 1;
    spec.horizon = 1.0;
    ModulatedNetworkSpec::State s;
    s.lambda = 0.9;
    s.jobs = {JobLaw::exponential(1.0 / 0.9)};
    s.drain = Eigen::VectorXd::Constant(1, 0.3);
    s.routing = Eigen::MatrixXd::Constant(1, 1, 1.0);
    spec.states.push_back(s);
    s.lambda = 1.0;
    s.jobs = {JobLaw::exponential(1.0)};
    s.drain = Eigen::VectorXd::Constant(1, 0.6);
    spec.states.push_back(s);
    return spec;
}

BackgroundPath make_path(const std::vector<int>& states, const std::vector<double>& times) {
    BackgroundPath p;
    p.states = states;
    p.times = times;
    return p;
}

// Independent path-conditional log MGF: per-stretch numeric integral with the
// decay assembled from plain matrix exponentials.
double oracle_path_log_mgf(const ModulatedNetworkSpec& spec, const BackgroundPath& path,
                           const Eigen::VectorXd& theta) {
    const int k = path.segments();
    double out = 0.0;
    for (int i = 0; i < k; ++i) {
        Eigen::MatrixXd suffix = Eigen::MatrixXd::Identity(spec.nodes, spec.nodes);
        for (int j = k - 1; j > i; --j) {
            const auto& st = spec.states[path.states[j]];
            suffix = matrix_exp_neg(build_rate_matrix(st.drain, st.routing),
                                    path.times[j + 1] - path.times[j]) *
                     suffix;
        }
        const auto& st = spec.states[path.states[i]];
        const Eigen::MatrixXd r = build_rate_matrix(st.drain, st.routing);
        auto f = [&](double u) {
            const Eigen::VectorXd x = matrix_exp_neg(r, path.times[i + 1] - u) * suffix * theta;
            double beta = 1.0;
            for (int l = 0; l < spec.nodes; ++l) {
                if (st.jobs[l].kind == JobLaw::Kind::exponential) {
                    beta *= st.jobs[l].param / (st.jobs[l].param - x(l));
                } else if (st.jobs[l].kind == JobLaw::Kind::deterministic) {
                    beta *= std::exp(st.jobs[l].param * x(l));
                }
            }
            return beta - 1.0;
        };
        out += st.lambda * integrate_adaptive(f, path.times[i], path.times[i + 1], 1e-13);
    }
    return out;
}

}  // namespace

TEST_CASE("single-state chains never jump") {
    const auto spec =
        ModulatedNetworkSpec::from_network(NetworkSpec::single_node(1.0, 1.0, 1.0, 1.0));
    RunRng rng(3);
    for (int k = 0; k < 20; ++k) {
        const auto path = sample_background_path(spec, rng);
        CHECK(path.segments() == 1);
        CHECK(path.states[0] == 0);
        CHECK(path.times.front() == 0.0);
        CHECK(path.times.back() == 1.0);
    }
}

TEST_CASE("jump counts and occupancy match the chain law") {
    const auto spec = mod_ex1();
    RunRng rng(5);
    const int reps = 100000;
    double jump_sum = 0.0;
    int in_state0 = 0;
    const double t_probe = 0.7;
    for (int k = 0; k < reps; ++k) {
        const auto path = sample_background_path(spec, rng);
        jump_sum += path.jumps();
        int state = path.states.back();
        for (int i = 0; i < path.segments(); ++i) {
            if (t_probe < path.times[i + 1]) {
                state = path.states[i];
                break;
            }
        }
        if (state == 0) ++in_state0;
    }
    // both exit rates are 2, so the jump count is Poisson(2)
    const double mean_jumps = jump_sum / reps;
    CHECK(std::abs(mean_jumps - 2.0) < 3.0 * std::sqrt(2.0 / reps));
    // occupancy against the transition semigroup
    const Eigen::MatrixXd pt = matrix_exp_neg(-spec.generator, t_probe);
    const double want = pt(0, 0);
    const double got = double(in_state0) / reps;
    CHECK(std::abs(got - want) < 0.01);
}

TEST_CASE("path segments carry the correct decay operators") {
    const auto spec = mod_ex1();
    const auto path = make_path({0, 1, 0}, {0.0, 0.654, 0.739, 1.0});
    const auto segs = path_segments(spec, path);
    REQUIRE(segs.size() == 3);
    const SegmentedMgf mgf(segs);

    // last stretch: plain decay to the horizon, suffix = I
    const Eigen::MatrixXd r0 = build_rate_matrix(spec.states[0].drain, spec.states[0].routing);
    const Eigen::MatrixXd r1 = build_rate_matrix(spec.states[1].drain, spec.states[1].routing);
    const auto& s2 = mgf.segments()[2];
    CHECK(std::abs(s2.propagate(1.0)(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(s2.propagate(0.8)(0, 0) - std::exp(-0.2 * 5.0)) < 1e-12);

    // middle stretch: own decay to its end, then the suffix of the last stretch
    const auto& s1 = mgf.segments()[1];
    const double suffix = std::exp(-(1.0 - 0.739) * 5.0);
    CHECK(std::abs(s1.propagate(0.7)(0, 0) - std::exp(-(0.739 - 0.7) * 1.0) * suffix) < 1e-12);

    // scalar fast-path coefficients agree with the matrix form
    for (const auto& seg : mgf.segments()) {
        CHECK(seg.scalar_exp);
        for (double u = seg.input.t0; u <= seg.input.t1; u += (seg.input.t1 - seg.input.t0) / 4) {
            CHECK(std::abs(seg.pbar * std::exp(seg.input.rate_matrix(0, 0) * u) -
                           seg.propagate(u)(0, 0)) < 1e-12);
        }
    }
    (void)r0;
    (void)r1;
}

TEST_CASE("path log MGF matches the oracle and degenerates correctly") {
    const auto spec = mod_ex1();
    const auto path = make_path({0, 1, 0}, {0.0, 0.654, 0.739, 1.0});
    CHECK(path_log_mgf(spec, path, Eigen::VectorXd::Zero(1)) == doctest::Approx(0.0));
    for (double th : {0.1, 0.25, 0.4}) {
        const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, th);
        CHECK(path_log_mgf(spec, path, theta) ==
              doctest::Approx(oracle_path_log_mgf(spec, path, theta)).epsilon(1e-9));
    }

    // d = 1 embedding reduces to the plain network's log MGF
    const auto plain = NetworkSpec::single_node(1.0, 1.0, 1.0, 1.0);
    const auto emb = ModulatedNetworkSpec::from_network(plain);
    const auto cpath = constant_path(emb, 0);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 0.3);
    CHECK(path_log_mgf(emb, cpath, theta) ==
          doctest::Approx(log_mgf(plain, theta)).epsilon(1e-12));
}

TEST_CASE("per-path twist reproduces the published decay rates") {
    const Eigen::VectorXd a3 = Eigen::VectorXd::Constant(1, 3.0);
    const auto spec1 = mod_ex1();
    const auto path1 = make_path({0, 1, 0}, {0.0, 0.654, 0.739, 1.0});
    const auto warm1 = constant_path_warm_starts(spec1, a3);
    const auto tw1 = solve_path_twist(spec1, path1, a3, &warm1);
    CHECK(tw1.solution.rate == doctest::Approx(0.573).epsilon(2e-3));

    const Eigen::VectorXd a08 = Eigen::VectorXd::Constant(1, 0.8);
    const auto spec2 = mod_ex2();
    const auto path2 = make_path({1, 0}, {0.0, 0.790, 1.0});
    const auto warm2 = constant_path_warm_starts(spec2, a08);
    const auto tw2 = solve_path_twist(spec2, path2, a08, &warm2);
    CHECK(tw2.solution.rate == doctest::Approx(0.000806).epsilon(0.02));

    // the per-run bound: log L + n rate <= 0 whenever Y_n lands in the target
    RunRng rng(31);
    int hits = 0;
    for (int k = 0; k < 2000; ++k) {
        const auto s = sample_yn_and_lr(tw1.plan, 5, rng);
        if (s.y(0) >= 5.0 * 3.0) {
            ++hits;
            CHECK(s.log_lr <= -5.0 * tw1.solution.rate + 1e-9);
        }
    }
    CHECK(hits > 0);
}

TEST_CASE("warm starts match the cold solve") {
    const auto spec = mod_ex1();
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 3.0);
    const auto path = make_path({0, 1}, {0.0, 0.5, 1.0});
    const auto warm = constant_path_warm_starts(spec, a);
    CHECK(warm.size() == 2);
    const auto hot = solve_path_twist(spec, path, a, &warm);
    const auto cold = solve_path_twist(spec, path, a, nullptr);
    CHECK(hot.solution.theta_star(0) ==
          doctest::Approx(cold.solution.theta_star(0)).epsilon(1e-8));
    CHECK(hot.solution.rate == doctest::Approx(cold.solution.rate).epsilon(1e-10));
}

TEST_CASE("path ordering prefers small rates then simple paths") {
    const auto a = make_path({0}, {0.0, 1.0});
    const auto b = make_path({0, 1}, {0.0, 0.5, 1.0});
    const auto c = make_path({0, 1}, {0.0, 0.6, 1.0});
    const auto d = make_path({1, 0}, {0.0, 0.5, 1.0});
    CHECK(path_rate_less(0.1, b, 0.2, a));           // smaller rate wins
    CHECK(!path_rate_less(0.2, a, 0.1, b));
    CHECK(path_rate_less(0.1, a, 0.1 + 1e-14, b));   // tie: fewer jumps
    CHECK(path_rate_less(0.1, b, 0.1, d));           // tie: lexicographic states
    CHECK(path_rate_less(0.1, b, 0.1, c));           // tie: earlier jump time
    CHECK(!path_rate_less(0.1, c, 0.1, b));
}
