#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <vector>

#include "fluidnet/linops.hpp"
#include "fluidnet/model.hpp"

namespace fluidnet {

// theta left the domain of the job-size MGF at time u / node.
struct DomainExceeded : std::runtime_error {
    DomainExceeded(double u_, int node_)
        : std::runtime_error("MGF domain exceeded"), u(u_), node(node_) {}
    double u;
    int node;
};

struct NonConvergence : std::runtime_error {
    explicit NonConvergence(Eigen::VectorXd last)
        : std::runtime_error("twist solver did not converge"), last_iterate(std::move(last)) {}
    Eigen::VectorXd last_iterate;
};

// One piecewise-constant-parameter stretch [t0, t1) of the horizon. The decay
// applied to a shot arriving at real time u in this stretch is
// P(u) = e^{-(t1-u) R} * suffix, where suffix collects the decay over all
// later stretches. A plain network is the single stretch [0, t] with
// suffix = I.
struct SegmentInput {
    double t0 = 0.0;
    double t1 = 0.0;
    double lambda = 0.0;
    std::vector<JobLaw> jobs;
    Eigen::MatrixXd rate_matrix;
    Eigen::MatrixXd suffix;
};

// log M(theta) = sum_i lambda_i int_{t0_i}^{t1_i} (beta_i(P_i(u) theta) - 1) du
// together with its analytic gradient and Hessian. Single-node stretches with
// exponential jobs use closed forms; everything else adaptive quadrature.
class SegmentedMgf {
  public:
    struct Segment {
        SegmentInput input;
        std::shared_ptr<const Propagator> prop;
        bool scalar_exp = false;  // L = 1, exponential job: closed forms apply
        double pbar = 0.0;        // P(u) = pbar * e^{r u} in the scalar case
        double v0 = 0.0, v1 = 0.0;  // pbar * e^{r t0}, pbar * e^{r t1}

        Eigen::MatrixXd propagate(double u) const;  // P(u)
    };

    explicit SegmentedMgf(std::vector<SegmentInput> segments, double quad_tol = 1e-12);
    static SegmentedMgf from_network(const NetworkSpec& spec);

    int dim() const { return dim_; }
    double horizon() const { return horizon_; }
    const std::vector<Segment>& segments() const { return segments_; }

    double value(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;
    void eval(const Eigen::VectorXd& theta, double& value, Eigen::VectorXd& gradient,
              Eigen::MatrixXd& hessian) const;

    // lambda_i int (beta_i(P_i(u) theta)) du: the twisted Poisson mean of one
    // stretch; with theta = 0 this is lambda_i (t1 - t0).
    double segment_poisson_mean(int i, const Eigen::VectorXd& theta) const;
    // Unnormalized epoch density beta_i(P_i(u) theta) at real time u.
    double segment_epoch_weight(int i, double u, const Eigen::VectorXd& theta) const;

  private:
    int dim_;
    double horizon_;
    double quad_tol_;
    std::vector<Segment> segments_;
};

struct TwistSolution {
    Eigen::VectorXd theta_star;
    Eigen::VectorXd b_star;          // gradient of log M at theta_star
    double rate = 0.0;               // I(a)
    double log_mgf_at_star = 0.0;
    std::vector<int> active_set;     // indices with theta* > 0
    double tau = 1.0;                // det Hessian of log M restricted to the active set
    int iterations = 0;

    int active_count() const { return static_cast<int>(active_set.size()); }
};

// Maximizes <theta, a> - log M(theta) over theta >= 0 (projected Newton with
// feasibility backtracking against the MGF domain boundary).
TwistSolution solve_twist(const SegmentedMgf& mgf, const Eigen::VectorXd& a,
                          const Eigen::VectorXd* warm_start = nullptr);
TwistSolution solve_twist(const NetworkSpec& spec, const RareTarget& target);

// --- single-node exponential closed forms ---

// lambda-free integral int_0^s beta(e^{-ru} theta) du = (1/r) log((mu e^{rs} - theta)/(mu - theta)).
double log_mgf_exp_closed(double mu, double r, double theta, double s);
// Quadratic-root twist for a single node with exponential jobs.
double exp_twist_closed_form(double lambda, double mu, double r, double t, double a);

double log_mgf(const NetworkSpec& spec, const Eigen::VectorXd& theta);
Eigen::VectorXd mean_vector(const NetworkSpec& spec);
Eigen::MatrixXd hessian_log_mgf(const NetworkSpec& spec, const Eigen::VectorXd& theta);

// --- Bahadur-Rao / run-count asymptotics ---

// n^{-D/2} (prod_{i in active} 1/theta*_i) (2 pi)^{-D/2} tau^{-1/2} e^{-n I}.
double bahadur_rao_p(const TwistSolution& sol, int n);
// The 2^{-D}-scaled analogue with e^{-2 n I}.
double second_moment_asymptotic(const TwistSolution& sol, int n);
// alpha = (T^2/eps^2) (prod theta*_i) 2^{-D} (2 pi)^{D/2} sqrt(tau).
double alpha_constant(const TwistSolution& sol, double eps, double critical_value);
// alpha * n^{D/2}.
double predicted_runs(const TwistSolution& sol, int n, double eps, double critical_value);

}  // namespace fluidnet
