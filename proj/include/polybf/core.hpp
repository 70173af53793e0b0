#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace polybf {

inline constexpr double kDefaultSpeedOfSound = 343.0; // m/s
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Azimuth measured from the positive x-axis, elevation from the positive
// z-axis, both in degrees.
struct Direction {
    double phi_deg = 0.0;
    double theta_deg = 90.0;

    void validate() const;
    Eigen::Vector3d unit_vector() const;
};

// Microphone positions in meters (x-y-z, z up). head_radius is set when the
// mics sit on a rigid-sphere head model; every mic must then lie on the
// sphere surface to within 1e-6 m.
struct ArrayGeometry {
    std::vector<Eigen::Vector3d> mics;
    std::optional<double> head_radius;
    std::string label;

    int mic_count() const { return static_cast<int>(mics.size()); }
    void validate() const;

    // Place mics on the sphere surface at the given directions.
    static ArrayGeometry on_sphere(double radius_m, const std::vector<Direction>& mic_dirs,
                                   std::string label = {});
};

// Design grid: Q strictly increasing frequencies and M look directions with
// a common elevation and strictly increasing azimuths.
struct DesignGrid {
    std::vector<double> freqs_hz;
    double sample_rate_hz = 0.0;
    std::vector<Direction> look_grid;

    int freq_count() const { return static_cast<int>(freqs_hz.size()); }
    int angle_count() const { return static_cast<int>(look_grid.size()); }
    void validate() const;

    static DesignGrid make_uniform(double f_lo_hz, double f_hi_hz, int num_freqs,
                                   double sample_rate_hz, double phi_step_deg,
                                   double theta_deg);
};

// Polynomial postfilter order P and the I prototype look directions.
struct PolynomialOrderSpec {
    int order = 0;
    std::vector<Direction> plds;

    int pld_count() const { return static_cast<int>(plds.size()); }
    void validate() const;
};

// Azimuth-to-steering-parameter map D = (phi - 90) / 90, valid on [0, 180].
double map_phi_to_D(double phi_deg);

// N x N(P+1) matrix with rows [1, D, ..., D^P] placed block-diagonally, so
// that (matrix * w) gives the per-channel polynomial sum over filter units.
Eigen::MatrixXd pld_steering_matrix(double D, int mic_count, int order);

} // namespace polybf
