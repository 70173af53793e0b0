#include "polybf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace polybf::qcqp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void Instance::validate() const {
    const int n = dim();
    if (n <= 0)
        throw std::invalid_argument("qcqp: instance has no variables");
    if (A.rows() != b.size())
        throw std::invalid_argument("qcqp: A/b row mismatch");
    if (E.rows() != f.size())
        throw std::invalid_argument("qcqp: E/f row mismatch");
    if (E.rows() > 0 && E.cols() != n)
        throw std::invalid_argument("qcqp: E column mismatch");
    for (const auto& B : ball_ops)
        if (B.cols() != n)
            throw std::invalid_argument("qcqp: ball operator column mismatch");
    if (!ball_ops.empty() && !(radius > 0.0 && std::isfinite(radius)))
        throw std::invalid_argument("qcqp: ball radius must be positive and finite");
    if (!A.allFinite() || !b.allFinite() || !E.allFinite() || !f.allFinite())
        throw std::invalid_argument("qcqp: non-finite instance data");
}

namespace {

struct Reduced {
    VectorXd x0; // minimum-norm solution of E x = f
    MatrixXd Z;  // orthonormal basis of null(E), n x nz
};

// Rank-revealing reduction of the equality constraints, tolerance 1e-10.
Reduced reduce_equalities(const MatrixXd& E, const VectorXd& f, int n) {
    Reduced red;
    if (E.rows() == 0) {
        red.x0 = VectorXd::Zero(n);
        red.Z = MatrixXd::Identity(n, n);
        return red;
    }
    Eigen::JacobiSVD<MatrixXd> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol)
            ++rank;
    if (rank < E.rows())
        throw std::invalid_argument("qcqp: equality constraints are rank deficient");
    VectorXd y = svd.matrixU().transpose() * f;
    VectorXd scaled = VectorXd::Zero(n);
    for (int i = 0; i < rank; ++i)
        scaled(i) = y(i) / sv(i);
    red.x0 = svd.matrixV() * scaled;
    red.Z = svd.matrixV().rightCols(n - rank);
    return red;
}

VectorXd solve_spd(const MatrixXd& H, const VectorXd& g) {
    const int n = static_cast<int>(H.rows());
    double jitter = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
        MatrixXd Hj = H;
        if (jitter > 0.0)
            Hj += jitter * MatrixXd::Identity(n, n);
        Eigen::LDLT<MatrixXd> ldlt(Hj);
        if (ldlt.info() == Eigen::Success) {
            VectorXd d = ldlt.solve(g);
            if (d.allFinite())
                return d;
        }
        jitter = (jitter == 0.0) ? 1e-12 * (1.0 + H.trace() / n) : jitter * 100.0;
    }
    throw std::runtime_error("qcqp: Newton system solve failed");
}

// Reduced ball data: value(z) = Br z + c must stay inside the radius.
struct ReducedBall {
    MatrixXd Br;
    VectorXd c;
};

struct BarrierResult {
    VectorXd z;
    double mu_final = 0.0;
    int newton_steps = 0;
    std::vector<double> stage_objectives;
};

// Newton minimization of f0(z) + mu * Phi(z) with backtracking line search.
// Callbacks provide the smooth objective; balls provide the barrier.
class BarrierProblem {
  public:
    BarrierProblem(MatrixXd H0, VectorXd g0_const, double f0_const,
                   std::vector<ReducedBall> balls, double radius_sq)
        : H0_(std::move(H0)), g0_const_(std::move(g0_const)), f0_const_(f0_const),
          balls_(std::move(balls)), radius_sq_(radius_sq) {}

    double objective(const VectorXd& z) const {
        return 0.5 * z.dot(H0_ * z) + g0_const_.dot(z) + f0_const_;
    }

    bool strictly_feasible(const VectorXd& z) const {
        for (const auto& ball : balls_)
            if (gap(ball, z) <= 0.0)
                return false;
        return true;
    }

    double gap(const ReducedBall& ball, const VectorXd& z) const {
        return radius_sq_ - (ball.Br * z + ball.c).squaredNorm();
    }

    double barrier(const VectorXd& z) const {
        double phi = 0.0;
        for (const auto& ball : balls_) {
            const double g = gap(ball, z);
            if (g <= 0.0)
                return std::numeric_limits<double>::infinity();
            phi -= std::log(g);
        }
        return phi;
    }

    VectorXd objective_gradient(const VectorXd& z) const { return H0_ * z + g0_const_; }

    VectorXd barrier_gradient(const VectorXd& z) const {
        VectorXd grad = VectorXd::Zero(z.size());
        for (const auto& ball : balls_) {
            const VectorXd v = ball.Br * z + ball.c;
            grad += 2.0 / gap(ball, z) * (ball.Br.transpose() * v);
        }
        return grad;
    }

    // One barrier stage: Newton steps until the decrement stalls.
    int minimize_stage(VectorXd& z, double mu, const Options& opts) const {
        int steps = 0;
        for (; steps < opts.max_newton_per_stage; ++steps) {
            VectorXd grad = objective_gradient(z) + mu * barrier_gradient(z);
            MatrixXd hess = H0_;
            for (const auto& ball : balls_) {
                const VectorXd v = ball.Br * z + ball.c;
                const double g = gap(ball, z);
                const VectorXd btv = ball.Br.transpose() * v;
                hess += (2.0 * mu / g) * (ball.Br.transpose() * ball.Br);
                hess += (4.0 * mu / (g * g)) * (btv * btv.transpose());
            }
            VectorXd dz = -solve_spd(hess, grad);
            double slope = grad.dot(dz);
            if (slope > 0.0) { // numerical fallback
                dz = -grad;
                slope = grad.dot(dz);
                if (slope >= 0.0)
                    break;
            }
            const double psi = objective(z) + mu * barrier(z);
            if (-slope * 0.5 <= 1e-13 * (1.0 + std::abs(psi)))
                break;
            double t = 1.0;
            while (t > 1e-18 && !strictly_feasible(z + t * dz))
                t *= opts.backtrack_beta;
            while (t > 1e-18) {
                const double trial = objective(z + t * dz) + mu * barrier(z + t * dz);
                if (trial <= psi + opts.armijo_alpha * t * slope)
                    break;
                t *= opts.backtrack_beta;
            }
            if (t <= 1e-18)
                break;
            z += t * dz;
        }
        return steps;
    }

    const std::vector<ReducedBall>& balls() const { return balls_; }

  private:
    MatrixXd H0_;
    VectorXd g0_const_;
    double f0_const_;
    std::vector<ReducedBall> balls_;
    double radius_sq_;
};

std::vector<ReducedBall> reduce_balls(const Instance& inst, const Reduced& red) {
    std::vector<ReducedBall> balls;
    balls.reserve(inst.ball_ops.size());
    for (const auto& B : inst.ball_ops)
        balls.push_back({B * red.Z, B * red.x0});
    return balls;
}

double max_ball_norm(const Instance& inst, const VectorXd& x) {
    double worst = 0.0;
    for (const auto& B : inst.ball_ops)
        worst = std::max(worst, (B * x).norm());
    return worst;
}

// Phase-I: minimize s subject to ||Br_i z + c_i||^2 <= s over the affine set,
// as an epigraph barrier problem in (z, s). Exits as soon as a point with
// max-norm strictly below the radius is found.
struct PhaseOneResult {
    bool feasible = false;
    VectorXd z;
    double best_max_norm = 0.0;
    int newton_steps = 0;
};

PhaseOneResult phase_one(const std::vector<ReducedBall>& balls, double radius, int nz,
                         const Options& opts) {
    const int dim = nz + 1;
    const double target = radius * (1.0 - 1e-9);

    VectorXd y = VectorXd::Zero(dim);
    double worst_sq = 0.0;
    for (const auto& ball : balls)
        worst_sq = std::max(worst_sq, ball.c.squaredNorm());
    y(nz) = worst_sq + std::max(1.0, 0.1 * worst_sq);

    auto ball_value = [&](const ReducedBall& ball, const VectorXd& yy) {
        return (ball.Br * yy.head(nz) + ball.c).eval();
    };
    auto gap = [&](const ReducedBall& ball, const VectorXd& yy) {
        return yy(nz) - ball_value(ball, yy).squaredNorm();
    };
    auto feasible = [&](const VectorXd& yy) {
        for (const auto& ball : balls)
            if (gap(ball, yy) <= 0.0)
                return false;
        return true;
    };
    auto barrier = [&](const VectorXd& yy) {
        double phi = 0.0;
        for (const auto& ball : balls) {
            const double g = gap(ball, yy);
            if (g <= 0.0)
                return std::numeric_limits<double>::infinity();
            phi -= std::log(g);
        }
        return phi;
    };
    auto current_max_norm = [&](const VectorXd& yy) {
        double worst = 0.0;
        for (const auto& ball : balls)
            worst = std::max(worst, ball_value(ball, yy).norm());
        return worst;
    };

    PhaseOneResult result;
    result.best_max_norm = current_max_norm(y);
    if (result.best_max_norm <= target) { // already strictly inside
        result.feasible = true;
        result.z = y.head(nz);
        return result;
    }

    // mu matched to the unit gradient of the epigraph objective
    VectorXd phi_grad = VectorXd::Zero(dim);
    for (const auto& ball : balls) {
        const VectorXd v = ball_value(ball, y);
        const double g = gap(ball, y);
        phi_grad.head(nz) += 2.0 / g * (ball.Br.transpose() * v);
        phi_grad(nz) -= 1.0 / g;
    }
    double mu = std::clamp(1.0 / std::max(phi_grad.norm(), 1e-12), 1e-9, 1e2);

    const int max_stages = 40;
    for (int stage = 0; stage < max_stages; ++stage) {
        for (int step = 0; step < opts.max_newton_per_stage; ++step) {
            VectorXd grad = VectorXd::Zero(dim);
            grad(nz) = 1.0;
            MatrixXd hess = MatrixXd::Zero(dim, dim);
            for (const auto& ball : balls) {
                const VectorXd v = ball_value(ball, y);
                const double g = gap(ball, y);
                VectorXd u = VectorXd::Zero(dim);
                u.head(nz) = -2.0 * (ball.Br.transpose() * v);
                u(nz) = 1.0;
                grad -= mu / g * u;
                hess += mu / (g * g) * (u * u.transpose());
                hess.topLeftCorner(nz, nz) += 2.0 * mu / g * (ball.Br.transpose() * ball.Br);
            }
            VectorXd dy = -solve_spd(hess, grad);
            double slope = grad.dot(dy);
            if (slope > 0.0) {
                dy = -grad;
                slope = grad.dot(dy);
            }
            const double psi = y(nz) + mu * barrier(y);
            if (-slope * 0.5 <= 1e-13 * (1.0 + std::abs(psi)))
                break;
            double t = 1.0;
            while (t > 1e-18 && !feasible(y + t * dy))
                t *= opts.backtrack_beta;
            while (t > 1e-18) {
                const VectorXd trial = y + t * dy;
                if (trial(nz) + mu * barrier(trial) <= psi + opts.armijo_alpha * t * slope)
                    break;
                t *= opts.backtrack_beta;
            }
            if (t <= 1e-18)
                break;
            y += t * dy;
            ++result.newton_steps;
            const double norm_now = current_max_norm(y);
            result.best_max_norm = std::min(result.best_max_norm, norm_now);
            if (norm_now <= target) {
                result.feasible = true;
                result.z = y.head(nz);
                return result;
            }
        }
        if (static_cast<double>(balls.size()) * mu <= 1e-12 * std::max(1.0, y(nz)))
            break;
        mu *= 0.1;
    }
    result.z = y.head(nz);
    result.best_max_norm = current_max_norm(y);
    return result;
}

struct KktReport {
    double residual;
    std::vector<double> multipliers;
};

KktReport kkt_residual(const Instance& inst, const Reduced& red, const VectorXd& x, double mu) {
    KktReport rep;
    VectorXd stat = 2.0 * inst.A.transpose() * (inst.A * x - inst.b);
    for (const auto& B : inst.ball_ops) {
        const double gap = inst.radius * inst.radius - (B * x).squaredNorm();
        const double lambda = (red.Z.cols() == 0) ? 0.0 : mu / std::max(gap, 1e-300);
        rep.multipliers.push_back(lambda);
        stat += lambda * 2.0 * (B.transpose() * (B * x));
    }
    // equality multipliers absorb the range(E^T) component exactly
    const double stat_norm =
        (red.Z.cols() == 0) ? 0.0 : (red.Z * (red.Z.transpose() * stat)).cwiseAbs().maxCoeff();
    const double eq_viol =
        (inst.E.rows() == 0) ? 0.0 : (inst.E * x - inst.f).cwiseAbs().maxCoeff();
    double ball_viol = 0.0;
    for (const auto& B : inst.ball_ops)
        ball_viol = std::max(ball_viol, (B * x).norm() - inst.radius);
    const double comp = inst.ball_ops.empty() ? 0.0 : mu;
    rep.residual = std::max({stat_norm, eq_viol, ball_viol, comp});
    return rep;
}

Solution finish_solution(const Instance& inst, const Reduced& red, const VectorXd& x, double mu,
                         int iterations, std::vector<double> stage_objectives) {
    Solution sol;
    sol.x = x;
    sol.objective = (inst.A * x - inst.b).squaredNorm();
    KktReport rep = kkt_residual(inst, red, x, mu);
    sol.kkt_residual = rep.residual;
    sol.multipliers = std::move(rep.multipliers);
    for (size_t i = 0; i < inst.ball_ops.size(); ++i)
        if (inst.radius - (inst.ball_ops[i] * x).norm() <= 1e-6 * inst.radius)
            sol.active_balls.push_back(static_cast<int>(i));
    sol.iterations = iterations;
    sol.stage_objectives = std::move(stage_objectives);

    if (inst.E.rows() > 0 && (inst.E * x - inst.f).cwiseAbs().maxCoeff() > 1e-8)
        throw std::runtime_error("qcqp: equality violation above tolerance in solution");
    for (const auto& B : inst.ball_ops)
        if ((B * x).norm() > inst.radius * (1.0 + 1e-6))
            throw std::runtime_error("qcqp: ball violation above tolerance in solution");
    return sol;
}

} // namespace

VectorXd feasible_start(const Instance& inst) {
    inst.validate();
    const Reduced red = reduce_equalities(inst.E, inst.f, inst.dim());
    if (inst.ball_ops.empty())
        return red.x0;
    if (max_ball_norm(inst, red.x0) <= inst.radius * (1.0 - 1e-9))
        return red.x0;
    if (red.Z.cols() == 0)
        throw Infeasible("qcqp: equality constraints pin an infeasible point",
                         max_ball_norm(inst, red.x0), red.x0);
    const auto balls = reduce_balls(inst, red);
    Options opts;
    const PhaseOneResult p1 = phase_one(balls, inst.radius, static_cast<int>(red.Z.cols()), opts);
    if (!p1.feasible) {
        std::ostringstream msg;
        msg << "qcqp: infeasible, min max-ball-norm " << p1.best_max_norm << " vs radius "
            << inst.radius;
        throw Infeasible(msg.str(), p1.best_max_norm, red.x0 + red.Z * p1.z);
    }
    return red.x0 + red.Z * p1.z;
}

Solution solve(const Instance& inst, const Options& opts) {
    inst.validate();
    const int n = inst.dim();
    const Reduced red = reduce_equalities(inst.E, inst.f, n);
    const int nz = static_cast<int>(red.Z.cols());

    // reduced least-squares data
    const MatrixXd Ar = inst.A * red.Z;
    const VectorXd br = inst.b - inst.A * red.x0;
    const MatrixXd H0 = 2.0 * Ar.transpose() * Ar;
    const VectorXd g0c = -2.0 * Ar.transpose() * br;
    const double f0c = br.squaredNorm();

    if (inst.ball_ops.empty()) {
        VectorXd z = VectorXd::Zero(nz);
        if (nz > 0)
            z = Ar.completeOrthogonalDecomposition().solve(br);
        const VectorXd x = red.x0 + red.Z * z;
        return finish_solution(inst, red, x, 0.0, 0, {(inst.A * x - inst.b).squaredNorm()});
    }

    if (nz == 0) {
        if (max_ball_norm(inst, red.x0) > inst.radius * (1.0 + 1e-9))
            throw Infeasible("qcqp: equality constraints pin an infeasible point",
                             max_ball_norm(inst, red.x0), red.x0);
        return finish_solution(inst, red, red.x0, 0.0, 0,
                               {(inst.A * red.x0 - inst.b).squaredNorm()});
    }

    auto balls = reduce_balls(inst, red);
    BarrierProblem problem(H0, g0c, f0c, balls, inst.radius * inst.radius);

    // strictly feasible start
    VectorXd z = VectorXd::Zero(nz);
    int iterations = 0;
    if (max_ball_norm(inst, red.x0) > inst.radius * (1.0 - 1e-9)) {
        const PhaseOneResult p1 = phase_one(balls, inst.radius, nz, opts);
        iterations += p1.newton_steps;
        if (!p1.feasible) {
            std::ostringstream msg;
            msg << "qcqp: infeasible, min max-ball-norm " << p1.best_max_norm << " vs radius "
                << inst.radius;
            throw Infeasible(msg.str(), p1.best_max_norm, red.x0 + red.Z * p1.z);
        }
        z = p1.z;
    }

    double mu = std::clamp(problem.objective_gradient(z).norm() /
                               std::max(problem.barrier_gradient(z).norm(), 1e-12),
                           1e-9, 1e2);
    std::vector<double> stage_objectives;
    double mu_last = mu;
    for (int stage = 0; stage < opts.barrier_stages; ++stage) {
        iterations += problem.minimize_stage(z, mu, opts);
        stage_objectives.push_back(problem.objective(z));
        mu_last = mu;
        const VectorXd x = red.x0 + red.Z * z;
        if (stage > 0 && kkt_residual(inst, red, x, mu_last).residual <= opts.kkt_tol)
            break;
        mu *= 0.1;
    }

    const VectorXd x = red.x0 + red.Z * z;
    Solution sol = finish_solution(inst, red, x, mu_last, iterations, std::move(stage_objectives));
    if (sol.kkt_residual > opts.kkt_tol)
        throw NonConvergence("qcqp: KKT residual " + std::to_string(sol.kkt_residual) +
                                 " above tolerance after barrier stages",
                             sol);
    return sol;
}

} // namespace polybf::qcqp
