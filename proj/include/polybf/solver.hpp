#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace polybf::qcqp {

// minimize ||A x - b||^2  subject to  E x = f,  ||ball_ops[i] x|| <= radius.
struct Instance {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd E; // may have zero rows
    Eigen::VectorXd f;
    std::vector<Eigen::MatrixXd> ball_ops;
    double radius = 0.0;

    int dim() const { return static_cast<int>(A.cols()); }
    void validate() const;
};

struct Options {
    double kkt_tol = 1e-7;
    int max_newton_per_stage = 50;
    int barrier_stages = 12;
    double armijo_alpha = 0.3;
    double backtrack_beta = 0.7;
};

struct Solution {
    Eigen::VectorXd x;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::vector<int> active_balls;
    int iterations = 0;
    std::vector<double> multipliers;       // one per ball
    std::vector<double> stage_objectives;  // objective after each barrier stage
};

struct Infeasible : std::runtime_error {
    Infeasible(std::string msg, double min_max_norm, Eigen::VectorXd point)
        : std::runtime_error(std::move(msg)), min_max_ball_norm(min_max_norm),
          closest_point(std::move(point)) {}
    // smallest achievable max_i ||ball_ops[i] x|| over the equality affine set
    double min_max_ball_norm;
    Eigen::VectorXd closest_point;
};

struct NonConvergence : std::runtime_error {
    NonConvergence(std::string msg, Solution best_) : std::runtime_error(std::move(msg)), best(std::move(best_)) {}
    Solution best;
};

// Minimum-norm solution of E x = f when it clears every ball with slack
// >= 1e-9 * radius; otherwise a strictly interior point found by a phase-I
// search minimizing max_i ||ball_ops[i] x|| over the affine set.
Eigen::VectorXd feasible_start(const Instance& inst);

Solution solve(const Instance& inst, const Options& opts = {});

} // namespace polybf::qcqp
