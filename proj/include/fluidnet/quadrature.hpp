#pragma once

#include <Eigen/Dense>
#include <functional>

namespace fluidnet {

// Adaptive Gauss-Kronrod (G7/K15) quadrature with absolute tolerance.
// The integrands in this project (job-size MGFs along e^{-Ru} theta) are
// smooth, so a fixed 64-point Gauss-Legendre panel is provided as fallback.

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol = 1e-12, int max_depth = 30);

// Vector-valued variant; adapts on the max-norm of the Kronrod-Gauss
// difference across components.
Eigen::VectorXd integrate_adaptive_vec(const std::function<Eigen::VectorXd(double)>& f,
                                       int dim, double a, double b,
                                       double abs_tol = 1e-12, int max_depth = 30);

double integrate_fixed64(const std::function<double(double)>& f, double a, double b);

}  // namespace fluidnet
