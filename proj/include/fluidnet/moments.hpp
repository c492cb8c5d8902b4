#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fluidnet/model.hpp"

namespace fluidnet {

// Transient moment trajectories of a modulated network. Index layout
// (0-based, node index fastest): z1[j*L + l] = E[X_l(t); J(t)=j],
// z2[j*L*L + l*L + m] = E[X_l(t) X_m(t); J(t)=j]. One column per grid point.
struct MomentState {
    std::vector<double> grid;
    Eigen::MatrixXd pi;  // d x T
    Eigen::MatrixXd z1;  // (L d) x T
    Eigen::MatrixXd z2;  // (L^2 d) x T; zero rows if second moments not requested
};

// RK4 with fixed step grid_max/2048 (split to land on grid points), with a
// step-halving error check. x0 is the deterministic initial fluid level.
MomentState transient_moments(const ModulatedNetworkSpec& spec, const Eigen::VectorXd& x0,
                              const std::vector<double>& grid, bool second = true);

// pi^T Q = 0, entries summing to 1.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& generator);

Eigen::VectorXd stationary_first_moment(const ModulatedNetworkSpec& spec);
Eigen::VectorXd stationary_second_moment(const ModulatedNetworkSpec& spec);

// State-summed marginals from one grid column.
Eigen::VectorXd node_means(const Eigen::VectorXd& z1_col, int d, int nodes);
Eigen::MatrixXd node_second_moments(const Eigen::VectorXd& z2_col, int d, int nodes);
// Correlation matrix from marginal mean / second-moment blocks; degenerate
// components: both variances ~0 -> 1 (deterministic start), exactly one ~0 -> 0.
Eigen::MatrixXd correlation_matrix(const Eigen::VectorXd& mean, const Eigen::MatrixXd& second);

// Variant where shots occur only at background jumps (first moments only);
// jump intensity in state j is q_j = -Q_{jj}.
MomentState jump_shot_first_moment(const ModulatedNetworkSpec& spec, const Eigen::VectorXd& x0,
                                   const std::vector<double>& grid);
Eigen::VectorXd jump_shot_stationary_mean(const ModulatedNetworkSpec& spec);

}  // namespace fluidnet
