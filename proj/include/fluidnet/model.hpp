#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace fluidnet {

// Job-size law of one node. Components of the multi-node job vector are
// independent; "zero" marks nodes that receive nothing at an arrival.
struct JobLaw {
    enum class Kind { exponential, zero, deterministic };

    Kind kind = Kind::zero;
    double param = 0.0;  // rate mu for exponential, mass location for deterministic

    static JobLaw exponential(double mu) { return {Kind::exponential, mu}; }
    static JobLaw zero() { return {Kind::zero, 0.0}; }
    static JobLaw deterministic(double c) { return {Kind::deterministic, c}; }

    double mean() const;
    double second_moment() const;
};

// L-node linear fluid network with compound-Poisson input: arrival rate
// lambda, per-node job laws, per-node drain rate r_l, routing fractions
// p_{ll'} (p_{ll} is the fraction leaving the network), horizon t.
struct NetworkSpec {
    int nodes = 1;
    double lambda = 1.0;
    double horizon = 1.0;
    std::vector<JobLaw> jobs;
    Eigen::VectorXd drain;      // r_l > 0
    Eigen::MatrixXd routing;    // p_{ll'} >= 0, rows sum to 1

    static NetworkSpec single_node(double lambda, double mu, double r, double t);
};

// Per-state parameters of a modulated network.
struct ModulatedNetworkSpec {
    struct State {
        double lambda = 1.0;
        std::vector<JobLaw> jobs;
        Eigen::VectorXd drain;
        Eigen::MatrixXd routing;
    };

    int nodes = 1;
    int num_states = 1;
    Eigen::MatrixXd generator;  // d x d, conservative
    int initial_state = 0;
    double horizon = 1.0;
    std::vector<State> states;

    // d = 1 embedding of a plain network (round-trips exactly).
    static ModulatedNetworkSpec from_network(const NetworkSpec& spec);
    NetworkSpec to_network() const;  // requires num_states == 1
};

struct RareTarget {
    Eigen::VectorXd a;
    int n = 1;
};

// R_{ll} = r_l, R_{ll'} = -r_l p_{ll'}.
Eigen::MatrixXd build_rate_matrix(const Eigen::VectorXd& drain, const Eigen::MatrixXd& routing);
Eigen::MatrixXd build_rate_matrix(const NetworkSpec& spec);

// All invariant violations, deterministically ordered; empty means valid.
std::vector<std::string> validate(const NetworkSpec& spec);
std::vector<std::string> validate(const ModulatedNetworkSpec& spec);

// Rarity warnings for a target (never fatal for the modulated case, where
// only the d constant background paths can be checked).
std::vector<std::string> rarity_warnings(const NetworkSpec& spec, const RareTarget& target);
std::vector<std::string> rarity_warnings(const ModulatedNetworkSpec& spec, const RareTarget& target);

}  // namespace fluidnet
