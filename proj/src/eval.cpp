#include "polybf/eval.hpp"

#include <cmath>
#include <fstream>

namespace polybf {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

double to_db(double linear_magnitude) {
    if (!(linear_magnitude > 0.0))
        return kDbFloor;
    return std::max(kDbFloor, 20.0 * std::log10(linear_magnitude));
}

double power_db(double linear_power) {
    if (!(linear_power > 0.0))
        return kDbFloor;
    return std::max(kDbFloor, 10.0 * std::log10(linear_power));
}

MatrixXcd beampattern(const std::vector<VectorXcd>& weights_by_freq, const SteeringSet& set) {
    if (static_cast<int>(weights_by_freq.size()) != set.grid.freq_count())
        throw std::invalid_argument("beampattern: weights do not cover the frequency grid");
    const int q_count = set.grid.freq_count();
    const int m_count = set.grid.angle_count();
    MatrixXcd grid(q_count, m_count);
    for (int q = 0; q < q_count; ++q) {
        if (weights_by_freq[q].size() != set.mic_count())
            throw std::invalid_argument("beampattern: weight/channel count mismatch");
        grid.row(q) = (set.responses[q] * weights_by_freq[q]).transpose();
    }
    return grid;
}

double wng(const VectorXcd& weights, const VectorXcd& steering) {
    if (weights.size() != steering.size())
        throw std::invalid_argument("wng: dimension mismatch");
    const double denom = weights.squaredNorm();
    if (!(denom > 0.0))
        throw std::domain_error("wng: undefined for zero weights");
    const std::complex<double> num = steering.transpose() * weights;
    return std::norm(num) / denom;
}

std::vector<MseEntry> mse_vs_steering(const WeightsProvider& weights_for, const SteeringSet& set,
                                      const DesiredBuilder& desired_for, double phi_step_deg) {
    if (!(phi_step_deg > 0.0) ||
        std::abs(std::round(180.0 / phi_step_deg) * phi_step_deg - 180.0) > 1e-9)
        throw std::invalid_argument("mse_vs_steering: step must divide 180 degrees");
    const int q_count = set.grid.freq_count();
    const int m_count = set.grid.angle_count();
    std::vector<MseEntry> table;
    const int steps = static_cast<int>(std::lround(180.0 / phi_step_deg));
    for (int s = 0; s <= steps; ++s) {
        const double phi_ld = s * phi_step_deg;
        const MatrixXcd grid = beampattern(weights_for(phi_ld), set);
        const VectorXd desired = desired_for(phi_ld);
        if (desired.size() != m_count)
            throw std::invalid_argument("mse_vs_steering: desired response length mismatch");
        double acc = 0.0;
        for (int q = 0; q < q_count; ++q)
            for (int m = 0; m < m_count; ++m) {
                const double diff = std::abs(grid(q, m)) - std::abs(desired(m));
                acc += diff * diff;
            }
        table.push_back({phi_ld, acc / (static_cast<double>(q_count) * m_count)});
    }
    return table;
}

double suppression_gain_db(const Direction& target, const Direction& interferer,
                           const std::vector<VectorXcd>& weights_by_freq, const SteeringSet& set) {
    if (static_cast<int>(weights_by_freq.size()) != set.grid.freq_count())
        throw std::invalid_argument("suppression_gain: weights do not cover the frequency grid");
    constexpr double kCap = 1e8; // +80 dB
    double mean_ratio = 0.0;
    const int q_count = set.grid.freq_count();
    for (int q = 0; q < q_count; ++q) {
        const std::complex<double> bt =
            steering_vector(set, target, q).transpose() * weights_by_freq[q];
        const std::complex<double> bi =
            steering_vector(set, interferer, q).transpose() * weights_by_freq[q];
        const double pt = std::norm(bt);
        const double pi = std::norm(bi);
        const double ratio = (pi > pt / kCap) ? pt / pi : kCap;
        mean_ratio += std::min(ratio, kCap) / q_count;
    }
    return std::min(10.0 * std::log10(std::max(mean_ratio, 1e-300)), 80.0);
}

std::vector<VectorXcd> bank_weights(const FilterBank& bank, const DesignGrid& grid, double D) {
    std::vector<VectorXcd> weights;
    weights.reserve(grid.freq_count());
    std::vector<double> powers(bank.ppf_order + 1);
    for (int p = 0; p <= bank.ppf_order; ++p)
        powers[p] = std::pow(D, p);
    for (double f : grid.freqs_hz) {
        VectorXcd w = VectorXcd::Zero(bank.mic_count);
        for (int n = 0; n < bank.mic_count; ++n)
            for (int p = 0; p <= bank.ppf_order; ++p)
                w(n) += powers[p] * frequency_response(bank, n, p, f);
        weights.push_back(std::move(w));
    }
    return weights;
}

std::vector<VectorXcd> design_weights(const std::vector<FrequencyDesign>& designs, double D) {
    std::vector<VectorXcd> weights;
    weights.reserve(designs.size());
    for (const auto& fd : designs)
        weights.push_back(extract_steered_weights(fd, D));
    return weights;
}

EvalReport make_report(const std::vector<VectorXcd>& weights_by_freq, const SteeringSet& set,
                       const Direction& look, std::string stage, std::string label) {
    EvalReport report;
    report.stage = std::move(stage);
    report.label = std::move(label);
    const MatrixXcd grid = beampattern(weights_by_freq, set);
    report.beampattern_db.resize(grid.rows(), grid.cols());
    for (int q = 0; q < grid.rows(); ++q)
        for (int m = 0; m < grid.cols(); ++m)
            report.beampattern_db(q, m) = to_db(std::abs(grid(q, m)));
    report.wng_db.resize(set.grid.freq_count());
    for (int q = 0; q < set.grid.freq_count(); ++q)
        report.wng_db(q) = power_db(wng(weights_by_freq[q], steering_vector(set, look, q)));
    return report;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open CSV file for writing: " + path);
    out.precision(12);
    return out;
}

} // namespace

void write_beampattern_csv(const std::string& path, const SteeringSet& set,
                           const MatrixXd& beampattern_db) {
    auto out = open_csv(path);
    out << "f_hz,phi_deg,db\n";
    for (int q = 0; q < set.grid.freq_count(); ++q)
        for (int m = 0; m < set.grid.angle_count(); ++m)
            out << set.grid.freqs_hz[q] << ',' << set.grid.look_grid[m].phi_deg << ','
                << beampattern_db(q, m) << '\n';
}

void write_wng_csv(const std::string& path, const SteeringSet& set, const VectorXd& wng_db) {
    auto out = open_csv(path);
    out << "f_hz,db\n";
    for (int q = 0; q < set.grid.freq_count(); ++q)
        out << set.grid.freqs_hz[q] << ',' << wng_db(q) << '\n';
}

void write_mse_csv(const std::string& path, const std::vector<MseEntry>& entries) {
    auto out = open_csv(path);
    out << "phi_ld_deg,mse\n";
    for (const auto& e : entries)
        out << e.phi_ld_deg << ',' << e.mse << '\n';
}

} // namespace polybf
