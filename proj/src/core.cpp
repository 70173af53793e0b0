#include "polybf/core.hpp"

#include <cmath>
#include <iostream>

namespace polybf {

void Direction::validate() const {
    if (!std::isfinite(phi_deg) || phi_deg < 0.0 || phi_deg >= 360.0)
        throw std::domain_error("Direction: azimuth must lie in [0, 360), got " +
                                std::to_string(phi_deg));
    if (!std::isfinite(theta_deg) || theta_deg < 0.0 || theta_deg > 180.0)
        throw std::domain_error("Direction: elevation must lie in [0, 180], got " +
                                std::to_string(theta_deg));
}

Eigen::Vector3d Direction::unit_vector() const {
    const double phi = deg2rad(phi_deg);
    const double theta = deg2rad(theta_deg);
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

void ArrayGeometry::validate() const {
    if (mics.empty())
        throw std::invalid_argument("ArrayGeometry: no microphones");
    for (const auto& m : mics)
        if (!m.allFinite())
            throw std::invalid_argument("ArrayGeometry: non-finite microphone position");
    if (head_radius) {
        if (!(*head_radius > 0.0))
            throw std::invalid_argument("ArrayGeometry: head radius must be positive");
        for (const auto& m : mics)
            if (std::abs(m.norm() - *head_radius) > 1e-6)
                throw std::invalid_argument(
                    "ArrayGeometry: microphone off the sphere surface by more than 1e-6 m");
    }
}

ArrayGeometry ArrayGeometry::on_sphere(double radius_m, const std::vector<Direction>& mic_dirs,
                                       std::string label) {
    ArrayGeometry geom;
    geom.head_radius = radius_m;
    geom.label = std::move(label);
    geom.mics.reserve(mic_dirs.size());
    for (const auto& d : mic_dirs) {
        d.validate();
        geom.mics.push_back(radius_m * d.unit_vector());
    }
    geom.validate();
    return geom;
}

void DesignGrid::validate() const {
    if (freqs_hz.empty())
        throw std::invalid_argument("DesignGrid: empty frequency grid");
    if (!(sample_rate_hz > 0.0))
        throw std::invalid_argument("DesignGrid: sample rate must be positive");
    double prev = 0.0;
    for (double f : freqs_hz) {
        if (!(f > prev))
            throw std::invalid_argument("DesignGrid: frequencies must be strictly increasing and positive");
        if (!(f < 0.5 * sample_rate_hz))
            throw std::invalid_argument("DesignGrid: frequency at or above Nyquist");
        prev = f;
    }
    if (look_grid.size() < 2)
        throw std::invalid_argument("DesignGrid: need at least two look directions");
    double prev_phi = -1.0;
    for (const auto& d : look_grid) {
        d.validate();
        if (!(d.phi_deg > prev_phi))
            throw std::invalid_argument("DesignGrid: look azimuths must be strictly increasing");
        prev_phi = d.phi_deg;
    }
}

DesignGrid DesignGrid::make_uniform(double f_lo_hz, double f_hi_hz, int num_freqs,
                                    double sample_rate_hz, double phi_step_deg,
                                    double theta_deg) {
    DesignGrid grid;
    grid.sample_rate_hz = sample_rate_hz;
    grid.freqs_hz.resize(num_freqs);
    for (int q = 0; q < num_freqs; ++q) {
        const double t = (num_freqs == 1) ? 0.0 : static_cast<double>(q) / (num_freqs - 1);
        grid.freqs_hz[q] = f_lo_hz + t * (f_hi_hz - f_lo_hz);
    }
    const int m_count = static_cast<int>(std::lround(180.0 / phi_step_deg)) + 1;
    grid.look_grid.reserve(m_count);
    for (int m = 0; m < m_count; ++m)
        grid.look_grid.push_back({m * phi_step_deg, theta_deg});
    grid.validate();
    return grid;
}

void PolynomialOrderSpec::validate() const {
    if (order < 0)
        throw std::invalid_argument("PolynomialOrderSpec: order must be >= 0");
    if (plds.empty())
        throw std::invalid_argument("PolynomialOrderSpec: need at least one prototype look direction");
    const double theta0 = plds.front().theta_deg;
    for (size_t i = 0; i < plds.size(); ++i) {
        plds[i].validate();
        if (plds[i].phi_deg < 0.0 || plds[i].phi_deg > 180.0)
            throw std::invalid_argument("PolynomialOrderSpec: PLD azimuth outside [0, 180]");
        if (std::abs(plds[i].theta_deg - theta0) > 1e-9)
            throw std::invalid_argument("PolynomialOrderSpec: PLDs must share a common elevation");
        for (size_t j = 0; j < i; ++j)
            if (std::abs(plds[i].phi_deg - plds[j].phi_deg) < 1e-9)
                throw std::invalid_argument("PolynomialOrderSpec: duplicate PLD azimuth");
    }
    if (pld_count() < order + 1)
        std::cerr << "polybf: warning: " << pld_count() << " prototype look directions for order "
                  << order << " postfilter (recommend at least " << order + 1 << ")\n";
}

double map_phi_to_D(double phi_deg) {
    if (!std::isfinite(phi_deg) || phi_deg < 0.0 || phi_deg > 180.0)
        throw std::domain_error("map_phi_to_D: azimuth must lie in [0, 180], got " +
                                std::to_string(phi_deg));
    return (phi_deg - 90.0) / 90.0;
}

Eigen::MatrixXd pld_steering_matrix(double D, int mic_count, int order) {
    if (mic_count < 1 || order < 0)
        throw std::invalid_argument("pld_steering_matrix: bad dimensions");
    if (std::abs(D) > 1.0)
        std::cerr << "polybf: warning: steering parameter D = " << D << " outside [-1, 1]\n";
    const int cols_per_mic = order + 1;
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(mic_count, mic_count * cols_per_mic);
    for (int n = 0; n < mic_count; ++n) {
        double power = 1.0;
        for (int p = 0; p <= order; ++p) {
            mat(n, n * cols_per_mic + p) = power;
            power *= D;
        }
    }
    return mat;
}

} // namespace polybf
