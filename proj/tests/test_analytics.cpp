#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fluidnet/analytics.hpp"
#include "fluidnet/linops.hpp"
#include "fluidnet/quadrature.hpp"

using namespace fluidnet;

namespace {

NetworkSpec single_unit() { return NetworkSpec::single_node(1.0, 1.0, 1.0, 1.0); }

NetworkSpec tandem(double lambda = 1.0) {
    NetworkSpec spec;
    spec.nodes = 2;
    spec.lambda = lambda;
    spec.horizon = 1.0;
    spec.jobs = {JobLaw::exponential(1.0), JobLaw::zero()};
    spec.drain = Eigen::VectorXd(2);
    spec.drain << 2.0, 1.0;
    spec.routing = Eigen::MatrixXd(2, 2);
    spec.routing << 0.0, 1.0, 0.0, 1.0;
    return spec;
}

// Independent oracle: integrate the log of the product of per-node job MGFs
// along the decay path, without the SegmentedMgf closed forms.
double log_mgf_oracle(const NetworkSpec& spec, const Eigen::VectorXd& theta) {
    const Eigen::MatrixXd r = build_rate_matrix(spec);
    auto f = [&](double u) {
        const Eigen::VectorXd x = matrix_exp_neg(r, spec.horizon - u) * theta;
        double beta = 1.0;
        for (int l = 0; l < spec.nodes; ++l) {
            switch (spec.jobs[l].kind) {
                case JobLaw::Kind::exponential:
                    beta *= spec.jobs[l].param / (spec.jobs[l].param - x(l));
                    break;
                case JobLaw::Kind::deterministic:
                    beta *= std::exp(spec.jobs[l].param * x(l));
                    break;
                case JobLaw::Kind::zero:
                    break;
            }
        }
        return beta - 1.0;
    };
    return spec.lambda * integrate_adaptive(f, 0.0, spec.horizon, 1e-13);
}

}  // namespace

TEST_CASE("closed-form log MGF matches quadrature oracle") {
    const auto spec = single_unit();
    const SegmentedMgf mgf = SegmentedMgf::from_network(spec);
    for (double th : {0.0, 0.1, 0.3, 0.6, 0.9}) {
        const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, th);
        CHECK(mgf.value(theta) ==
              doctest::Approx(log_mgf_oracle(spec, theta)).epsilon(1e-10));
        CHECK(log_mgf(spec, theta) == doctest::Approx(mgf.value(theta)).epsilon(1e-12));
    }
    const auto tan = tandem();
    const SegmentedMgf mgf2 = SegmentedMgf::from_network(tan);
    Eigen::VectorXd theta(2);
    theta << 0.3, 0.5;
    CHECK(mgf2.value(theta) == doctest::Approx(log_mgf_oracle(tan, theta)).epsilon(1e-10));
}

TEST_CASE("gradient and Hessian match finite differences") {
    const auto tan = tandem();
    const SegmentedMgf mgf = SegmentedMgf::from_network(tan);
    Eigen::VectorXd theta(2);
    theta << 0.25, 0.45;
    const Eigen::VectorXd g = mgf.gradient(theta);
    const Eigen::MatrixXd h = mgf.hessian(theta);
    const double eps = 1e-6;
    for (int i = 0; i < 2; ++i) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp(i) += eps;
        tm(i) -= eps;
        CHECK(g(i) ==
              doctest::Approx((mgf.value(tp) - mgf.value(tm)) / (2.0 * eps)).epsilon(1e-7));
        const Eigen::VectorXd dg = (mgf.gradient(tp) - mgf.gradient(tm)) / (2.0 * eps);
        for (int j = 0; j < 2; ++j) CHECK(h(i, j) == doctest::Approx(dg(j)).epsilon(1e-6));
    }
    CHECK(h(0, 1) == doctest::Approx(h(1, 0)).epsilon(1e-12));
}

TEST_CASE("scalar closed forms") {
    // log_mgf_exp_closed against the analytic antiderivative
    const double mu = 1.3, r = 0.7, theta = 0.5, s = 1.1;
    const double want =
        std::log((mu * std::exp(r * s) - theta) / (mu - theta)) / r;
    CHECK(log_mgf_exp_closed(mu, r, theta, s) == doctest::Approx(want).epsilon(1e-13));

    // closed-form twist equals the Newton solve
    const auto spec = single_unit();
    RareTarget target{Eigen::VectorXd::Constant(1, 1.0), 1};
    const auto sol = solve_twist(spec, target);
    const double closed = exp_twist_closed_form(1.0, 1.0, 1.0, 1.0, 1.0);
    CHECK(sol.theta_star(0) == doctest::Approx(closed).epsilon(1e-10));
}

TEST_CASE("single-node reference solution") {
    RareTarget target{Eigen::VectorXd::Constant(1, 1.0), 1};
    const auto sol = solve_twist(single_unit(), target);
    CHECK(sol.theta_star(0) == doctest::Approx(0.2918).epsilon(1e-3));
    CHECK(sol.tau == doctest::Approx(1.8240).epsilon(1e-3));
    CHECK(sol.active_count() == 1);
    // first-order condition at the optimum
    const SegmentedMgf mgf = SegmentedMgf::from_network(single_unit());
    CHECK(mgf.gradient(sol.theta_star)(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.rate ==
          doctest::Approx(sol.theta_star(0) * 1.0 - sol.log_mgf_at_star).epsilon(1e-12));
}

TEST_CASE("downstream tandem reference solution") {
    Eigen::VectorXd a(2);
    a << 0.0, 1.0;
    const auto sol = solve_twist(tandem(), {a, 1});
    CHECK(sol.theta_star(0) == doctest::Approx(0.0));
    CHECK(sol.theta_star(1) == doctest::Approx(0.8104).epsilon(1e-3));
    CHECK(sol.active_count() == 1);
    CHECK(sol.tau == doctest::Approx(1.4774).epsilon(1e-3));
    CHECK(alpha_constant(sol, 0.1, 1.96) == doctest::Approx(474.3).epsilon(2e-3));
    // KKT: gradient meets a on the active coordinate, is >= a on the inactive one
    const SegmentedMgf mgf = SegmentedMgf::from_network(tandem());
    const Eigen::VectorXd g = mgf.gradient(sol.theta_star);
    CHECK(g(1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(g(0) >= 0.0);
}

TEST_CASE("joint tandem twist satisfies the stationarity condition") {
    Eigen::VectorXd a(2);
    a << 1.2, 1.1;
    const auto sol = solve_twist(tandem(), {a, 1});
    const SegmentedMgf mgf = SegmentedMgf::from_network(tandem());
    const Eigen::VectorXd g = mgf.gradient(sol.theta_star);
    CHECK(g(0) == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(g(1) == doctest::Approx(1.1).epsilon(1e-9));
    CHECK(sol.active_count() == 2);

    // coarse independent maximization of <theta,a> - log M over a grid
    double best = -1.0;
    Eigen::VectorXd best_theta(2);
    for (int i = 0; i <= 45; ++i) {
        for (int j = 0; j <= 45; ++j) {
            Eigen::VectorXd th(2);
            th << 0.02 * i, 0.02 * j;
            double v;
            try {
                v = th.dot(a) - mgf.value(th);
            } catch (const DomainExceeded&) {
                continue;
            }
            if (v > best) {
                best = v;
                best_theta = th;
            }
        }
    }
    CHECK(sol.rate >= best - 1e-12);
    CHECK((sol.theta_star - best_theta).cwiseAbs().maxCoeff() < 0.021);
}

TEST_CASE("time rescaling leaves the twist invariant") {
    // (t, r, lambda) -> (c t, r / c, lambda / c) preserves the law of X(t)
    const double c = 3.0;
    auto spec = single_unit();
    auto scaled = spec;
    scaled.horizon *= c;
    scaled.drain /= c;
    scaled.lambda /= c;
    RareTarget target{Eigen::VectorXd::Constant(1, 1.0), 1};
    const auto s1 = solve_twist(spec, target);
    const auto s2 = solve_twist(scaled, target);
    CHECK(s1.theta_star(0) == doctest::Approx(s2.theta_star(0)).epsilon(1e-10));
    CHECK(s1.rate == doctest::Approx(s2.rate).epsilon(1e-10));
    CHECK(s1.tau == doctest::Approx(s2.tau).epsilon(1e-8));
}

TEST_CASE("domain boundary raises DomainExceeded") {
    const SegmentedMgf mgf = SegmentedMgf::from_network(single_unit());
    CHECK_THROWS_AS(mgf.value(Eigen::VectorXd::Constant(1, 1.0)), DomainExceeded);
    CHECK_THROWS_AS(mgf.value(Eigen::VectorXd::Constant(1, 1.5)), DomainExceeded);
    const SegmentedMgf mgf2 = SegmentedMgf::from_network(tandem());
    Eigen::VectorXd theta(2);
    theta << 0.0, 2.0;  // decays into node 1 beyond mu
    CHECK_THROWS_AS(mgf2.value(theta), DomainExceeded);
}

TEST_CASE("typical targets give a zero twist") {
    const auto spec = single_unit();
    const Eigen::VectorXd m = mean_vector(spec);
    CHECK(m(0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    const auto sol = solve_twist(spec, {m, 1});
    CHECK(sol.theta_star(0) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(sol.rate == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("run-count asymptotics are internally consistent") {
    RareTarget target{Eigen::VectorXd::Constant(1, 1.0), 1};
    const auto sol = solve_twist(single_unit(), target);
    const int n = 40;
    const double d = 1.0;
    const double br = std::pow(n, -d / 2.0) / sol.theta_star(0) *
                      std::pow(2.0 * M_PI, -d / 2.0) / std::sqrt(sol.tau) *
                      std::exp(-n * sol.rate);
    CHECK(bahadur_rao_p(sol, n) == doctest::Approx(br).epsilon(1e-12));
    const double m2 = std::pow(n, -d / 2.0) / sol.theta_star(0) * std::pow(2.0, -d) *
                      std::pow(2.0 * M_PI, -d / 2.0) / std::sqrt(sol.tau) *
                      std::exp(-2.0 * n * sol.rate);
    CHECK(second_moment_asymptotic(sol, n) == doctest::Approx(m2).epsilon(1e-12));
    const double alpha = alpha_constant(sol, 0.1, 1.96);
    CHECK(predicted_runs(sol, n, 0.1, 1.96) ==
          doctest::Approx(alpha * std::sqrt(double(n))).epsilon(1e-12));
    // the predicted run count is the ratio asymptotics made explicit:
    // alpha n^{D/2} ~ (T/eps)^2 second_moment / p^2
    const double ratio = (1.96 / 0.1) * (1.96 / 0.1) * second_moment_asymptotic(sol, n) /
                         (bahadur_rao_p(sol, n) * bahadur_rao_p(sol, n));
    CHECK(predicted_runs(sol, n, 0.1, 1.96) == doctest::Approx(ratio).epsilon(1e-10));
}
