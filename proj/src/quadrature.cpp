#include "fluidnet/quadrature.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fluidnet {

namespace {

// Kronrod-15 abscissae on [0,1] (positive half) and weights; the Gauss-7
// rule shares the odd-indexed abscissae.
constexpr std::array<double, 8> kXgk = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr std::array<double, 4> kWg = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct PanelResult {
    double kronrod;
    double err;
};

PanelResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double resk = 0.0, resg = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double fsum = (i == 7) ? f(c) : f(c - h * kXgk[i]) + f(c + h * kXgk[i]);
        resk += kWgk[i] * fsum;
        if (i % 2 == 1) resg += kWg[i / 2] * fsum;
    }
    return {resk * h, std::abs(resk - resg) * h};
}

double adapt(const std::function<double(double)>& f, double a, double b, double tol,
             int depth, int max_depth) {
    const auto r = gk15(f, a, b);
    if (r.err <= tol || depth >= max_depth) return r.kronrod;
    const double c = 0.5 * (a + b);
    return adapt(f, a, c, tol * 0.5, depth + 1, max_depth) +
           adapt(f, c, b, tol * 0.5, depth + 1, max_depth);
}

struct PanelVec {
    Eigen::VectorXd kronrod;
    double err;
};

PanelVec gk15_vec(const std::function<Eigen::VectorXd(double)>& f, int dim, double a,
                  double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    Eigen::VectorXd resk = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd resg = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < 8; ++i) {
        Eigen::VectorXd fsum =
            (i == 7) ? f(c) : Eigen::VectorXd(f(c - h * kXgk[i]) + f(c + h * kXgk[i]));
        resk += kWgk[i] * fsum;
        if (i % 2 == 1) resg += kWg[i / 2] * fsum;
    }
    return {resk * h, (resk - resg).cwiseAbs().maxCoeff() * h};
}

Eigen::VectorXd adapt_vec(const std::function<Eigen::VectorXd(double)>& f, int dim,
                          double a, double b, double tol, int depth, int max_depth) {
    const auto r = gk15_vec(f, dim, a, b);
    if (r.err <= tol || depth >= max_depth) return r.kronrod;
    const double c = 0.5 * (a + b);
    return adapt_vec(f, dim, a, c, tol * 0.5, depth + 1, max_depth) +
           adapt_vec(f, dim, c, b, tol * 0.5, depth + 1, max_depth);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, int max_depth) {
    if (!(b > a)) return 0.0;
    return adapt(f, a, b, abs_tol, 0, max_depth);
}

Eigen::VectorXd integrate_adaptive_vec(const std::function<Eigen::VectorXd(double)>& f,
                                       int dim, double a, double b, double abs_tol,
                                       int max_depth) {
    if (!(b > a)) return Eigen::VectorXd::Zero(dim);
    return adapt_vec(f, dim, a, b, abs_tol, 0, max_depth);
}

double integrate_fixed64(const std::function<double(double)>& f, double a, double b) {
    // Gauss-Legendre nodes computed once by Newton iteration on P_64.
    static const auto rule = [] {
        constexpr int n = 64;
        std::array<double, n> x{}, w{};
        for (int i = 0; i < n; ++i) {
            double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                double dp = n * (t * p1 - p0) / (t * t - 1.0);
                double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-16) {
                    x[i] = t;
                    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
                    break;
                }
            }
        }
        return std::make_pair(x, w);
    }();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < 64; ++i) sum += rule.second[i] * f(c + h * rule.first[i]);
    return sum * h;
}

}  // namespace fluidnet
