#pragma once

#include "polybf/firsynth.hpp"
#include "polybf/steer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace polybf {

inline constexpr double kDbFloor = -80.0;

double to_db(double linear_magnitude);
double power_db(double linear_power);

// Beamformer response over the whole grid: entry (q, m) = sum_n W_n(w_q) g_n.
Eigen::MatrixXcd beampattern(const std::vector<Eigen::VectorXcd>& weights_by_freq,
                             const SteeringSet& set);

// White noise gain |a^T w|^2 / ||w||^2 (linear scale).
double wng(const Eigen::VectorXcd& weights, const Eigen::VectorXcd& steering);

// Effective per-channel weights at every design frequency for one steering
// angle; the hook lets callers evaluate designed weights or FIR responses.
using WeightsProvider = std::function<std::vector<Eigen::VectorXcd>(double phi_ld_deg)>;
using DesiredBuilder = std::function<Eigen::VectorXd(double phi_ld_deg)>;

struct MseEntry {
    double phi_ld_deg;
    double mse;
};

std::vector<MseEntry> mse_vs_steering(const WeightsProvider& weights_for, const SteeringSet& set,
                                      const DesiredBuilder& desired_for, double phi_step_deg);

// 10 log10 of the mean over frequency of |B(target)|^2 / |B(interferer)|^2,
// floored/capped at +-80 dB.
double suppression_gain_db(const Direction& target, const Direction& interferer,
                           const std::vector<Eigen::VectorXcd>& weights_by_freq,
                           const SteeringSet& set);

struct EvalReport {
    Eigen::MatrixXd beampattern_db; // Q x M
    Eigen::VectorXd wng_db;         // Q
    std::vector<MseEntry> mse_by_angle;
    std::string stage;              // "pre_fir" or "post_fir"
    std::string label;
};

// Effective weights from a filter bank at steering parameter D, evaluated at
// the grid frequencies via the exact DTFT of the synthesized filters.
std::vector<Eigen::VectorXcd> bank_weights(const FilterBank& bank, const DesignGrid& grid,
                                           double D);
std::vector<Eigen::VectorXcd> design_weights(const std::vector<FrequencyDesign>& designs,
                                             double D);

EvalReport make_report(const std::vector<Eigen::VectorXcd>& weights_by_freq,
                       const SteeringSet& set, const Direction& look, std::string stage,
                       std::string label = {});

void write_beampattern_csv(const std::string& path, const SteeringSet& set,
                           const Eigen::MatrixXd& beampattern_db);
void write_wng_csv(const std::string& path, const SteeringSet& set, const Eigen::VectorXd& wng_db);
void write_mse_csv(const std::string& path, const std::vector<MseEntry>& entries);

} // namespace polybf
