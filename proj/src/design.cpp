#include "polybf/design.hpp"

#include <cmath>
#include <functional>
#include <future>
#include <mutex>
#include <thread>

namespace polybf {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

DesiredResponse make_desired_response(const DesignGrid& grid, const Direction& look,
                                      double mainlobe_halfwidth_deg) {
    if (!(mainlobe_halfwidth_deg > 0.0))
        throw std::invalid_argument("make_desired_response: half-width must be positive");
    const int m_count = grid.angle_count();
    DesiredResponse resp;
    resp.mainlobe_halfwidth_deg = mainlobe_halfwidth_deg;
    resp.values.resize(m_count);
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int m = 0; m < m_count; ++m) {
        const double dist = std::abs(grid.look_grid[m].phi_deg - look.phi_deg);
        if (dist < best) {
            best = dist;
            nearest = m;
        }
        resp.values(m) = (dist < mainlobe_halfwidth_deg)
                             ? 0.5 * (1.0 + std::cos(kPi * dist / mainlobe_halfwidth_deg))
                             : 0.0;
    }
    resp.values(nearest) = 1.0;
    return resp;
}

namespace {

// Complex matrix to real stacking [[Re, -Im], [Im, Re]], so that the real
// image of (G w) is (stacked G) * [Re w; Im w].
MatrixXd realify(const MatrixXcd& G) {
    const auto rows = G.rows();
    const auto cols = G.cols();
    MatrixXd out(2 * rows, 2 * cols);
    out.topLeftCorner(rows, cols) = G.real();
    out.topRightCorner(rows, cols) = -G.imag();
    out.bottomLeftCorner(rows, cols) = G.imag();
    out.bottomRightCorner(rows, cols) = G.real();
    return out;
}

struct PldData {
    MatrixXd steering; // D_i, N x N(P+1)
    VectorXcd a;       // steering vector at the PLD
    VectorXd bhat;     // desired magnitude response over the look grid
};

FrequencyDesign solve_one_frequency(const SteeringSet& set, int q, const std::vector<PldData>& plds,
                                    int mic_count, int order, double gamma,
                                    const qcqp::Options& solver_opts) {
    const int nc = mic_count * (order + 1); // complex dimension
    const int m_count = set.grid.angle_count();
    const int i_count = static_cast<int>(plds.size());
    const MatrixXcd& G = set.responses[q];

    qcqp::Instance inst;
    inst.A.resize(2 * i_count * m_count, 2 * nc);
    inst.b.resize(2 * i_count * m_count);
    inst.E.resize(2 * i_count, 2 * nc);
    inst.f.resize(2 * i_count);
    // With the distortionless equality a_i^T D_i w = 1 in force, the
    // white-noise-gain bound |a_i^T D_i w|^2 / ||D_i w||^2 >= gamma is
    // exactly the norm-ball constraint ||D_i w|| <= 1/sqrt(gamma).
    inst.radius = 1.0 / std::sqrt(gamma);
    for (int i = 0; i < i_count; ++i) {
        const MatrixXcd GD = G * plds[i].steering;
        inst.A.middleRows(2 * i * m_count, 2 * m_count) = realify(GD);
        inst.b.segment(2 * i * m_count, m_count) = plds[i].bhat;
        inst.b.segment(2 * i * m_count + m_count, m_count).setZero();

        const VectorXcd aD = plds[i].steering.transpose() * plds[i].a; // (a^T D)^T
        inst.E.row(2 * i) << aD.real().transpose(), -aD.imag().transpose();
        inst.E.row(2 * i + 1) << aD.imag().transpose(), aD.real().transpose();
        inst.f(2 * i) = 1.0;
        inst.f(2 * i + 1) = 0.0;

        MatrixXd ball = MatrixXd::Zero(2 * mic_count, 2 * nc);
        ball.topLeftCorner(mic_count, nc) = plds[i].steering;
        ball.bottomRightCorner(mic_count, nc) = plds[i].steering;
        inst.ball_ops.push_back(std::move(ball));
    }

    qcqp::Solution sol;
    try {
        sol = qcqp::solve(inst, solver_opts);
    } catch (const qcqp::Infeasible& e) {
        throw DesignError("design infeasible at " + std::to_string(set.grid.freqs_hz[q]) +
                              " Hz: " + e.what(),
                          set.grid.freqs_hz[q]);
    } catch (const qcqp::NonConvergence& e) {
        throw DesignError("design did not converge at " + std::to_string(set.grid.freqs_hz[q]) +
                              " Hz: " + e.what(),
                          set.grid.freqs_hz[q]);
    }

    FrequencyDesign fd;
    fd.freq_hz = set.grid.freqs_hz[q];
    fd.mic_count = mic_count;
    fd.ppf_order = order;
    fd.weights = sol.x.head(nc) + std::complex<double>(0.0, 1.0) * sol.x.tail(nc);
    fd.objective = sol.objective;
    for (int i = 0; i < i_count; ++i) {
        const VectorXcd dw = plds[i].steering * fd.weights;
        const std::complex<double> resp = plds[i].a.transpose() * dw;
        fd.pld_response.push_back(resp);
        fd.wng.push_back(std::norm(resp) / dw.squaredNorm());
        if (std::abs(resp - std::complex<double>(1.0, 0.0)) > 1e-6)
            throw DesignError("distortionless constraint violated at " +
                                  std::to_string(fd.freq_hz) + " Hz",
                              fd.freq_hz);
        if (fd.wng.back() < gamma * (1.0 - 1e-5))
            throw DesignError("white-noise-gain constraint violated at " +
                                  std::to_string(fd.freq_hz) + " Hz",
                              fd.freq_hz);
    }
    return fd;
}

using PldBuilder = std::function<std::vector<PldData>(int q)>;

// Per-frequency fan-out; results joined in frequency order, errors reported
// for the lowest failing frequency.
std::vector<FrequencyDesign> run_designs(const SteeringSet& set, const PldBuilder& build_plds,
                                         int mic_count, int order, double gamma_db,
                                         const DesignOptions& opts) {
    set.validate();
    const double gamma = std::pow(10.0, gamma_db / 10.0);
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("design: gamma must be positive and finite");
    const int q_count = set.grid.freq_count();
    std::vector<FrequencyDesign> designs(q_count);

    int threads = opts.threads > 0 ? opts.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, q_count));

    std::exception_ptr first_error;
    double first_error_freq = std::numeric_limits<double>::infinity();
    std::mutex error_mutex;
    auto worker = [&](int begin, int end) {
        for (int q = begin; q < end; ++q) {
            try {
                designs[q] = solve_one_frequency(set, q, build_plds(q), mic_count, order, gamma,
                                                 opts.solver);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (set.grid.freqs_hz[q] < first_error_freq) {
                    first_error_freq = set.grid.freqs_hz[q];
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };

    if (threads == 1) {
        worker(0, q_count);
    } else {
        std::vector<std::future<void>> futures;
        const int chunk = (q_count + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(q_count, begin + chunk);
            if (begin < end)
                futures.push_back(std::async(std::launch::async, worker, begin, end));
        }
        for (auto& fut : futures)
            fut.wait();
    }
    if (first_error)
        std::rethrow_exception(first_error);
    return designs;
}

} // namespace

std::vector<FrequencyDesign> design_rlsfi(const SteeringSet& set, const Direction& look,
                                          const DesiredResponse& desired, double gamma_db,
                                          const DesignOptions& opts) {
    const int n = set.mic_count();
    const int look_index = grid_index_of(set.grid, look);
    auto build = [&, look_index, n](int q) {
        PldData pd;
        pd.steering = MatrixXd::Identity(n, n);
        pd.a = set.responses[q].row(look_index).transpose();
        pd.bhat = desired.values;
        return std::vector<PldData>{std::move(pd)};
    };
    return run_designs(set, build, n, 0, gamma_db, opts);
}

std::vector<FrequencyDesign> design_rlsfip(const SteeringSet& set, const PolynomialOrderSpec& spec,
                                           const std::vector<DesiredResponse>& desired,
                                           double gamma_db, const DesignOptions& opts) {
    spec.validate();
    if (desired.size() != spec.plds.size())
        throw std::invalid_argument("design_rlsfip: one desired response per PLD required");
    const int n = set.mic_count();

    std::vector<int> pld_indices;
    std::vector<MatrixXd> steering_mats;
    for (const auto& pld : spec.plds) {
        pld_indices.push_back(grid_index_of(set.grid, pld));
        steering_mats.push_back(pld_steering_matrix(map_phi_to_D(pld.phi_deg), n, spec.order));
    }

    auto build = [&, n](int q) {
        std::vector<PldData> plds;
        plds.reserve(spec.plds.size());
        for (size_t i = 0; i < spec.plds.size(); ++i) {
            PldData pd;
            pd.steering = steering_mats[i];
            pd.a = set.responses[q].row(pld_indices[i]).transpose();
            pd.bhat = desired[i].values;
            plds.push_back(std::move(pd));
        }
        return plds;
    };
    return run_designs(set, build, n, spec.order, gamma_db, opts);
}

Eigen::VectorXcd extract_steered_weights(const FrequencyDesign& fd, double D) {
    const int n = fd.mic_count;
    const int p_count = fd.ppf_order + 1;
    VectorXcd out = VectorXcd::Zero(n);
    for (int ch = 0; ch < n; ++ch) {
        double power = 1.0;
        for (int p = 0; p < p_count; ++p) {
            out(ch) += power * fd.weights(ch * p_count + p);
            power *= D;
        }
    }
    return out;
}

} // namespace polybf
