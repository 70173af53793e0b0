#pragma once

#include "polybf/core.hpp"
#include "polybf/solver.hpp"
#include "polybf/steer.hpp"

#include <complex>
#include <vector>

namespace polybf {

// Frequency-invariant desired magnitude response sampled on the look grid.
// Unity at the grid point nearest the look direction, raised-cosine rolloff
// to zero over the mainlobe half-width, zero elsewhere.
struct DesiredResponse {
    Eigen::VectorXd values;
    double mainlobe_halfwidth_deg = 30.0;
};

DesiredResponse make_desired_response(const DesignGrid& grid, const Direction& look,
                                      double mainlobe_halfwidth_deg = 30.0);

// Optimal frequency-domain weights for one design frequency, layout
// weights[n*(P+1) + p] = W_{n,p}.
struct FrequencyDesign {
    double freq_hz = 0.0;
    int mic_count = 0;
    int ppf_order = 0;
    Eigen::VectorXcd weights;
    std::vector<double> wng;                          // per PLD, linear
    std::vector<std::complex<double>> pld_response;   // per PLD
    double objective = 0.0;
};

struct DesignOptions {
    qcqp::Options solver;
    int threads = 0; // 0 = hardware concurrency
};

struct DesignError : std::runtime_error {
    DesignError(std::string msg, double freq) : std::runtime_error(std::move(msg)), freq_hz(freq) {}
    double freq_hz;
};

// Single-look-direction robust design (one filter unit per channel).
std::vector<FrequencyDesign> design_rlsfi(const SteeringSet& set, const Direction& look,
                                          const DesiredResponse& desired, double gamma_db,
                                          const DesignOptions& opts = {});

// Polynomial design: joint least squares over all prototype look directions
// with per-PLD distortionless and white-noise-gain constraints.
std::vector<FrequencyDesign> design_rlsfip(const SteeringSet& set, const PolynomialOrderSpec& spec,
                                           const std::vector<DesiredResponse>& desired,
                                           double gamma_db, const DesignOptions& opts = {});

// Effective per-channel weights at steering parameter D: sum_p D^p W_{n,p}.
Eigen::VectorXcd extract_steered_weights(const FrequencyDesign& fd, double D);

} // namespace polybf
