#pragma once

#include "polybf/core.hpp"

#include <complex>
#include <string>
#include <vector>

namespace polybf {

enum class SourceKind { free_field, sphere, measured };

std::string to_string(SourceKind kind);
SourceKind source_kind_from_string(const std::string& s);

// Sensor-response matrices G(w_q) over the design grid. responses[q] is
// M x N with entry (m, n) = g_n(w_q, phi_m, theta_m).
struct SteeringSet {
    DesignGrid grid;
    std::vector<Eigen::MatrixXcd> responses;
    SourceKind kind = SourceKind::free_field;

    int mic_count() const { return responses.empty() ? 0 : static_cast<int>(responses.front().cols()); }
    void validate() const;
};

struct SteeringModel {
    SourceKind kind = SourceKind::free_field;
    double speed_of_sound = kDefaultSpeedOfSound;
    std::string measured_path; // only for SourceKind::measured
};

// Plane wave arriving from dir: element n = exp(-j*2*pi*f*tau_n) with
// tau_n = -(r_n . u(dir)) / c. A mic displaced toward the source leads in phase.
Eigen::VectorXcd free_field_response(const ArrayGeometry& geom, const Direction& dir, double f_hz,
                                     double speed_of_sound = kDefaultSpeedOfSound);

// Pressure on a rigid sphere of radius a for a unit plane wave arriving from
// src_dir, evaluated at the surface point mic_dir. Classical scattering series
//   H(mu, Theta) = (1/mu^2) sum_m (2m+1) P_m(cos Theta) (-j)^(m-1) / h'_m(mu)
// with mu = k*a and Theta the angle between mic and source directions.
// Truncated once two successive terms drop below 1e-10 relative magnitude;
// hard cap m <= 10 + ceil(2*mu). Throws on non-convergence at the cap.
std::complex<double> sphere_response(double radius_m, const Direction& mic_dir,
                                     const Direction& src_dir, double f_hz,
                                     double speed_of_sound = kDefaultSpeedOfSound);

SteeringSet build_steering_set(const SteeringModel& model, const ArrayGeometry& geom,
                               const DesignGrid& grid);

// Row of G(w_q) for a direction on the grid (matched to within 0.5 degrees).
Eigen::VectorXcd steering_vector(const SteeringSet& set, const Direction& dir, int q);
int grid_index_of(const DesignGrid& grid, const Direction& dir);

// Measured transfer-function file (JSON): fields sample_rate_hz, directions,
// freqs_hz, responses [direction][freq][mic] of [re, im], mic_count.
void write_steering_file(const std::string& path, const SteeringSet& set);
SteeringSet read_steering_file(const std::string& path);

// Load a measured file onto a caller-supplied grid: directions matched within
// 0.5 degrees, responses linearly interpolated in frequency (real and
// imaginary parts separately), never in angle.
SteeringSet load_measured_steering_set(const std::string& path, const DesignGrid& grid);

struct SteeringLoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace polybf
