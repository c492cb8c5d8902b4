#include "fluidnet/model.hpp"

#include <cmath>
#include <queue>
#include <sstream>

#include "fluidnet/linops.hpp"

namespace fluidnet {

namespace {
constexpr double kStochTol = 1e-12;
}

double JobLaw::mean() const {
    switch (kind) {
        case Kind::exponential: return 1.0 / param;
        case Kind::deterministic: return param;
        case Kind::zero: return 0.0;
    }
    return 0.0;
}

double JobLaw::second_moment() const {
    switch (kind) {
        case Kind::exponential: return 2.0 / (param * param);
        case Kind::deterministic: return param * param;
        case Kind::zero: return 0.0;
    }
    return 0.0;
}

NetworkSpec NetworkSpec::single_node(double lambda, double mu, double r, double t) {
    NetworkSpec spec;
    spec.nodes = 1;
    spec.lambda = lambda;
    spec.horizon = t;
    spec.jobs = {JobLaw::exponential(mu)};
    spec.drain = Eigen::VectorXd::Constant(1, r);
    spec.routing = Eigen::MatrixXd::Constant(1, 1, 1.0);
    return spec;
}

ModulatedNetworkSpec ModulatedNetworkSpec::from_network(const NetworkSpec& spec) {
    ModulatedNetworkSpec mod;
    mod.nodes = spec.nodes;
    mod.num_states = 1;
    mod.generator = Eigen::MatrixXd::Zero(1, 1);
    mod.initial_state = 0;
    mod.horizon = spec.horizon;
    mod.states = {{spec.lambda, spec.jobs, spec.drain, spec.routing}};
    return mod;
}

NetworkSpec ModulatedNetworkSpec::to_network() const {
    NetworkSpec spec;
    spec.nodes = nodes;
    spec.lambda = states.at(0).lambda;
    spec.horizon = horizon;
    spec.jobs = states.at(0).jobs;
    spec.drain = states.at(0).drain;
    spec.routing = states.at(0).routing;
    return spec;
}

Eigen::MatrixXd build_rate_matrix(const Eigen::VectorXd& drain, const Eigen::MatrixXd& routing) {
    const int n = static_cast<int>(drain.size());
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (int l = 0; l < n; ++l) {
        r(l, l) = drain(l);
        for (int m = 0; m < n; ++m) {
            if (m != l) r(l, m) = -drain(l) * routing(l, m);
        }
    }
    return r;
}

Eigen::MatrixXd build_rate_matrix(const NetworkSpec& spec) {
    return build_rate_matrix(spec.drain, spec.routing);
}

namespace {

void check_state(int nodes, double lambda, const std::vector<JobLaw>& jobs,
                 const Eigen::VectorXd& drain, const Eigen::MatrixXd& routing,
                 const std::string& prefix, std::vector<std::string>& out) {
    if (lambda <= 0.0) out.push_back(prefix + "arrival rate not positive");
    if (static_cast<int>(jobs.size()) != nodes) {
        out.push_back(prefix + "job law count does not match node count");
        return;
    }
    bool any_nonzero = false;
    for (int l = 0; l < nodes; ++l) {
        if (jobs[l].kind == JobLaw::Kind::exponential && jobs[l].param <= 0.0) {
            out.push_back(prefix + "node " + std::to_string(l + 1) +
                          ": exponential job rate not positive");
        }
        if (jobs[l].kind == JobLaw::Kind::deterministic && jobs[l].param <= 0.0) {
            out.push_back(prefix + "node " + std::to_string(l + 1) +
                          ": deterministic job size not positive");
        }
        if (jobs[l].kind != JobLaw::Kind::zero) any_nonzero = true;
    }
    if (!any_nonzero) out.push_back(prefix + "all job laws are zero");
    if (drain.size() != nodes || routing.rows() != nodes || routing.cols() != nodes) {
        out.push_back(prefix + "drain/routing dimensions do not match node count");
        return;
    }
    for (int l = 0; l < nodes; ++l) {
        if (drain(l) <= 0.0)
            out.push_back(prefix + "node " + std::to_string(l + 1) + ": drain rate not positive");
        double row_sum = 0.0;
        for (int m = 0; m < nodes; ++m) {
            if (routing(l, m) < 0.0)
                out.push_back(prefix + "routing fraction (" + std::to_string(l + 1) + "," +
                              std::to_string(m + 1) + ") negative");
            row_sum += routing(l, m);
        }
        if (std::abs(row_sum - 1.0) > kStochTol)
            out.push_back(prefix + "routing row " + std::to_string(l + 1) +
                          " does not sum to 1");
    }
}

bool irreducible(const Eigen::MatrixXd& q) {
    const int d = static_cast<int>(q.rows());
    if (d == 1) return true;
    // reachability on the positivity pattern, from every state
    for (int s = 0; s < d; ++s) {
        std::vector<bool> seen(d, false);
        std::queue<int> work;
        work.push(s);
        seen[s] = true;
        int count = 1;
        while (!work.empty()) {
            int j = work.front();
            work.pop();
            for (int k = 0; k < d; ++k) {
                if (k != j && q(j, k) > 0.0 && !seen[k]) {
                    seen[k] = true;
                    ++count;
                    work.push(k);
                }
            }
        }
        if (count != d) return false;
    }
    return true;
}

}  // namespace

std::vector<std::string> validate(const NetworkSpec& spec) {
    std::vector<std::string> out;
    if (spec.nodes < 1) {
        out.push_back("node count must be >= 1");
        return out;
    }
    if (spec.horizon <= 0.0) out.push_back("horizon not positive");
    check_state(spec.nodes, spec.lambda, spec.jobs, spec.drain, spec.routing, "", out);
    return out;
}

std::vector<std::string> validate(const ModulatedNetworkSpec& spec) {
    std::vector<std::string> out;
    if (spec.nodes < 1) out.push_back("node count must be >= 1");
    if (spec.num_states < 1) out.push_back("state count must be >= 1");
    if (spec.horizon <= 0.0) out.push_back("horizon not positive");
    if (spec.initial_state < 0 || spec.initial_state >= spec.num_states)
        out.push_back("initial state out of range");
    const int d = spec.num_states;
    if (spec.generator.rows() != d || spec.generator.cols() != d) {
        out.push_back("generator dimensions do not match state count");
        return out;
    }
    for (int j = 0; j < d; ++j) {
        double row_sum = 0.0;
        for (int k = 0; k < d; ++k) {
            if (k != j && spec.generator(j, k) < 0.0)
                out.push_back("generator off-diagonal (" + std::to_string(j + 1) + "," +
                              std::to_string(k + 1) + ") negative");
            row_sum += spec.generator(j, k);
        }
        if (std::abs(row_sum) > kStochTol)
            out.push_back("generator row " + std::to_string(j + 1) + " not conservative");
    }
    if (!irreducible(spec.generator)) out.push_back("generator not irreducible");
    if (static_cast<int>(spec.states.size()) != d) {
        out.push_back("per-state parameter count does not match state count");
        return out;
    }
    for (int j = 0; j < d; ++j) {
        check_state(spec.nodes, spec.states[j].lambda, spec.states[j].jobs,
                    spec.states[j].drain, spec.states[j].routing,
                    "state " + std::to_string(j + 1) + ": ", out);
    }
    return out;
}

namespace {

// m(t) = lambda (int_0^t e^{-Ru} du)^T E[B], with the integral R^{-1}(I - e^{-Rt}).
Eigen::VectorXd constant_path_mean(double lambda, const std::vector<JobLaw>& jobs,
                                   const Eigen::MatrixXd& r, double t) {
    const int n = static_cast<int>(r.rows());
    Eigen::VectorXd eb(n);
    for (int l = 0; l < n; ++l) eb(l) = jobs[l].mean();
    Eigen::MatrixXd integral =
        r.partialPivLu().solve(Eigen::MatrixXd::Identity(n, n) - matrix_exp_neg(r, t));
    return lambda * integral.transpose() * eb;
}

bool in_rare_set(const Eigen::VectorXd& m, const Eigen::VectorXd& a) {
    return (m.array() >= a.array()).all();
}

}  // namespace

std::vector<std::string> rarity_warnings(const NetworkSpec& spec, const RareTarget& target) {
    std::vector<std::string> out;
    const Eigen::VectorXd m =
        constant_path_mean(spec.lambda, spec.jobs, build_rate_matrix(spec), spec.horizon);
    if (in_rare_set(m, target.a)) {
        std::ostringstream os;
        os << "target set is not rare: mean vector lies inside A";
        out.push_back(os.str());
    }
    return out;
}

std::vector<std::string> rarity_warnings(const ModulatedNetworkSpec& spec,
                                         const RareTarget& target) {
    // Checking every background path is infeasible; the d constant paths are
    // checked and a warning (not an error) is emitted.
    std::vector<std::string> out;
    for (int j = 0; j < spec.num_states; ++j) {
        const auto& st = spec.states[j];
        const Eigen::VectorXd m = constant_path_mean(
            st.lambda, st.jobs, build_rate_matrix(st.drain, st.routing), spec.horizon);
        if (in_rare_set(m, target.a)) {
            out.push_back("target not rare along the constant background path in state " +
                          std::to_string(j + 1));
        }
    }
    return out;
}

}  // namespace fluidnet
