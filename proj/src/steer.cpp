#include "polybf/steer.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace polybf {

using std::complex;
using json = nlohmann::json;

namespace {

constexpr complex<double> kJ{0.0, 1.0};

} // namespace

std::string to_string(SourceKind kind) {
    switch (kind) {
    case SourceKind::free_field: return "free_field";
    case SourceKind::sphere: return "sphere";
    case SourceKind::measured: return "measured";
    }
    return "unknown";
}

SourceKind source_kind_from_string(const std::string& s) {
    if (s == "free_field") return SourceKind::free_field;
    if (s == "sphere") return SourceKind::sphere;
    if (s == "measured") return SourceKind::measured;
    throw std::invalid_argument("unknown steering source kind: " + s);
}

void SteeringSet::validate() const {
    grid.validate();
    if (static_cast<int>(responses.size()) != grid.freq_count())
        throw std::invalid_argument("SteeringSet: response count does not match frequency grid");
    const int m = grid.angle_count();
    const int n = mic_count();
    for (const auto& g : responses) {
        if (g.rows() != m || g.cols() != n)
            throw std::invalid_argument("SteeringSet: response matrix shape mismatch");
        if (!g.allFinite())
            throw std::invalid_argument("SteeringSet: non-finite sensor response");
    }
}

Eigen::VectorXcd free_field_response(const ArrayGeometry& geom, const Direction& dir, double f_hz,
                                     double speed_of_sound) {
    if (!(f_hz > 0.0))
        throw std::domain_error("free_field_response: frequency must be positive");
    dir.validate();
    const Eigen::Vector3d u = dir.unit_vector();
    Eigen::VectorXcd resp(geom.mic_count());
    for (int n = 0; n < geom.mic_count(); ++n) {
        const double tau = -geom.mics[n].dot(u) / speed_of_sound;
        resp(n) = std::exp(-kJ * (2.0 * kPi * f_hz * tau));
    }
    return resp;
}

namespace {

// Spherical Hankel functions of the first kind via upward recurrence,
// h_{m+1}(x) = (2m+1)/x * h_m(x) - h_{m-1}(x); derivative from
// h'_m(x) = h_{m-1}(x) - (m+1)/x * h_m(x).
struct HankelRecurrence {
    double x;
    int m = 0;
    complex<double> h_prev, h_curr; // h_{m-1}, h_m

    explicit HankelRecurrence(double x_) : x(x_) {
        const complex<double> eix = std::exp(kJ * x);
        h_curr = -kJ * eix / x; // h_0
        h_prev = eix / x;       // h_{-1}, keeps the derivative identity valid at m = 0
    }

    complex<double> derivative() const { return h_prev - (m + 1.0) / x * h_curr; }

    void advance() {
        const complex<double> h_next = (2.0 * m + 1.0) / x * h_curr - h_prev;
        h_prev = h_curr;
        h_curr = h_next;
        ++m;
    }
};

complex<double> sphere_series(double mu, double cos_theta, int cap, double rel_tol) {
    HankelRecurrence hankel(mu);
    complex<double> minus_j_pow = kJ; // (-j)^(m-1) at m = 0
    double p_prev = 0.0, p_curr = 1.0; // Legendre P_{m-1}, P_m
    complex<double> sum = 0.0;
    int small_run = 0;
    for (int m = 0; m <= cap; ++m) {
        const complex<double> term = (2.0 * m + 1.0) * p_curr * minus_j_pow / hankel.derivative();
        sum += term;
        const double scale = std::max(std::abs(sum), 1e-12);
        small_run = (std::abs(term) < rel_tol * scale) ? small_run + 1 : 0;
        if (small_run >= 2)
            return sum / (mu * mu);
        // next order
        hankel.advance();
        minus_j_pow *= -kJ;
        const double p_next = ((2.0 * m + 1.0) * cos_theta * p_curr - m * p_prev) / (m + 1.0);
        p_prev = p_curr;
        p_curr = p_next;
    }
    std::ostringstream msg;
    msg << "sphere_response: series not converged at cap (ka = " << mu
        << ", cos Theta = " << cos_theta << ")";
    throw std::runtime_error(msg.str());
}

} // namespace

complex<double> sphere_response(double radius_m, const Direction& mic_dir, const Direction& src_dir,
                                double f_hz, double speed_of_sound) {
    if (!(radius_m > 0.0))
        throw std::domain_error("sphere_response: radius must be positive");
    if (f_hz < 0.0)
        throw std::domain_error("sphere_response: negative frequency");
    mic_dir.validate();
    src_dir.validate();
    const double mu = 2.0 * kPi * f_hz * radius_m / speed_of_sound;
    if (mu < 1e-8)
        return {1.0, 0.0}; // long-wavelength limit, no scattering
    double cos_theta = mic_dir.unit_vector().dot(src_dir.unit_vector());
    cos_theta = std::clamp(cos_theta, -1.0, 1.0);
    const int cap = 10 + static_cast<int>(std::ceil(2.0 * mu));
    return sphere_series(mu, cos_theta, cap, 1e-10);
}

SteeringSet build_steering_set(const SteeringModel& model, const ArrayGeometry& geom,
                               const DesignGrid& grid) {
    geom.validate();
    grid.validate();
    if (model.kind == SourceKind::measured)
        return load_measured_steering_set(model.measured_path, grid);

    SteeringSet set;
    set.grid = grid;
    set.kind = model.kind;
    const int q_count = grid.freq_count();
    const int m_count = grid.angle_count();
    const int n_count = geom.mic_count();
    set.responses.assign(q_count, Eigen::MatrixXcd(m_count, n_count));

    if (model.kind == SourceKind::free_field) {
        for (int q = 0; q < q_count; ++q)
            for (int m = 0; m < m_count; ++m)
                set.responses[q].row(m) =
                    free_field_response(geom, grid.look_grid[m], grid.freqs_hz[q], model.speed_of_sound)
                        .transpose();
    } else {
        if (!geom.head_radius)
            throw std::invalid_argument("build_steering_set: sphere model needs a head radius");
        const double a = *geom.head_radius;
        std::vector<Direction> mic_dirs(n_count);
        for (int n = 0; n < n_count; ++n) {
            const Eigen::Vector3d u = geom.mics[n] / geom.mics[n].norm();
            double phi = rad2deg(std::atan2(u.y(), u.x()));
            if (phi < 0.0) phi += 360.0;
            if (phi >= 360.0) phi = 0.0;
            mic_dirs[n] = {phi, rad2deg(std::acos(std::clamp(u.z(), -1.0, 1.0)))};
        }
        for (int q = 0; q < q_count; ++q) {
            for (int m = 0; m < m_count; ++m)
                for (int n = 0; n < n_count; ++n)
                    set.responses[q](m, n) = sphere_response(a, mic_dirs[n], grid.look_grid[m],
                                                             grid.freqs_hz[q], model.speed_of_sound);
            if (set.responses[q].cwiseAbs().maxCoeff() > 4.0)
                throw std::runtime_error("build_steering_set: sphere response magnitude above bound");
        }
    }
    set.validate();
    return set;
}

int grid_index_of(const DesignGrid& grid, const Direction& dir) {
    for (int m = 0; m < grid.angle_count(); ++m) {
        const auto& g = grid.look_grid[m];
        if (std::abs(g.phi_deg - dir.phi_deg) <= 0.5 && std::abs(g.theta_deg - dir.theta_deg) <= 0.5)
            return m;
    }
    std::ostringstream msg;
    msg << "direction (" << dir.phi_deg << ", " << dir.theta_deg
        << ") is not on the angular grid";
    throw std::out_of_range(msg.str());
}

Eigen::VectorXcd steering_vector(const SteeringSet& set, const Direction& dir, int q) {
    if (q < 0 || q >= set.grid.freq_count())
        throw std::out_of_range("steering_vector: frequency index out of range");
    return set.responses[q].row(grid_index_of(set.grid, dir)).transpose();
}

void write_steering_file(const std::string& path, const SteeringSet& set) {
    set.validate();
    json doc;
    doc["sample_rate_hz"] = set.grid.sample_rate_hz;
    doc["mic_count"] = set.mic_count();
    doc["source_kind"] = to_string(set.kind);
    json dirs = json::array();
    for (const auto& d : set.grid.look_grid)
        dirs.push_back({{"phi", d.phi_deg}, {"theta", d.theta_deg}});
    doc["directions"] = std::move(dirs);
    doc["freqs_hz"] = set.grid.freqs_hz;
    json resp = json::array();
    for (int m = 0; m < set.grid.angle_count(); ++m) {
        json per_freq = json::array();
        for (int q = 0; q < set.grid.freq_count(); ++q) {
            json per_mic = json::array();
            for (int n = 0; n < set.mic_count(); ++n) {
                const auto v = set.responses[q](m, n);
                per_mic.push_back({v.real(), v.imag()});
            }
            per_freq.push_back(std::move(per_mic));
        }
        resp.push_back(std::move(per_freq));
    }
    doc["responses"] = std::move(resp);

    std::ofstream out(path);
    if (!out)
        throw SteeringLoadError("cannot open steering file for writing: " + path);
    out << doc.dump(1) << '\n';
}

namespace {

struct MeasuredFile {
    double sample_rate_hz;
    int mic_count;
    std::vector<Direction> directions;
    std::vector<double> freqs_hz;
    // responses[dir][freq] is an N-vector
    std::vector<std::vector<Eigen::VectorXcd>> responses;
};

MeasuredFile parse_measured_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SteeringLoadError("cannot open steering file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw SteeringLoadError("malformed steering file " + path + ": " + e.what());
    }
    try {
        MeasuredFile mf;
        mf.sample_rate_hz = doc.at("sample_rate_hz").get<double>();
        mf.mic_count = doc.at("mic_count").get<int>();
        for (const auto& d : doc.at("directions"))
            mf.directions.push_back({d.at("phi").get<double>(), d.at("theta").get<double>()});
        mf.freqs_hz = doc.at("freqs_hz").get<std::vector<double>>();
        const auto& resp = doc.at("responses");
        if (resp.size() != mf.directions.size())
            throw SteeringLoadError("steering file: responses/directions length mismatch");
        for (const auto& per_dir : resp) {
            if (per_dir.size() != mf.freqs_hz.size())
                throw SteeringLoadError("steering file: responses/freqs length mismatch");
            std::vector<Eigen::VectorXcd> rows;
            for (const auto& per_freq : per_dir) {
                if (static_cast<int>(per_freq.size()) != mf.mic_count)
                    throw SteeringLoadError("steering file: responses/mic_count mismatch");
                Eigen::VectorXcd v(mf.mic_count);
                for (int n = 0; n < mf.mic_count; ++n)
                    v(n) = {per_freq[n][0].get<double>(), per_freq[n][1].get<double>()};
                rows.push_back(std::move(v));
            }
            mf.responses.push_back(std::move(rows));
        }
        return mf;
    } catch (const json::exception& e) {
        throw SteeringLoadError("steering file " + path + " missing field: " + e.what());
    }
}

} // namespace

SteeringSet read_steering_file(const std::string& path) {
    MeasuredFile mf = parse_measured_file(path);
    SteeringSet set;
    set.kind = SourceKind::measured;
    set.grid.sample_rate_hz = mf.sample_rate_hz;
    set.grid.freqs_hz = mf.freqs_hz;
    set.grid.look_grid = mf.directions;
    set.responses.assign(mf.freqs_hz.size(), Eigen::MatrixXcd(mf.directions.size(), mf.mic_count));
    for (size_t m = 0; m < mf.directions.size(); ++m)
        for (size_t q = 0; q < mf.freqs_hz.size(); ++q)
            set.responses[q].row(static_cast<int>(m)) = mf.responses[m][q].transpose();
    set.validate();
    return set;
}

SteeringSet load_measured_steering_set(const std::string& path, const DesignGrid& grid) {
    MeasuredFile mf = parse_measured_file(path);

    // Angles are matched, never interpolated.
    std::vector<int> dir_index(grid.angle_count(), -1);
    std::string missing;
    for (int m = 0; m < grid.angle_count(); ++m) {
        const auto& want = grid.look_grid[m];
        for (size_t d = 0; d < mf.directions.size(); ++d) {
            if (std::abs(mf.directions[d].phi_deg - want.phi_deg) <= 0.5 &&
                std::abs(mf.directions[d].theta_deg - want.theta_deg) <= 0.5) {
                dir_index[m] = static_cast<int>(d);
                break;
            }
        }
        if (dir_index[m] < 0) {
            missing += (missing.empty() ? "" : ", ") + std::to_string(want.phi_deg) + "/" +
                       std::to_string(want.theta_deg);
        }
    }
    if (!missing.empty())
        throw SteeringLoadError("steering file " + path +
                                " lacks angular coverage for directions (phi/theta): " + missing);

    const double file_lo = mf.freqs_hz.front();
    const double file_hi = mf.freqs_hz.back();
    for (double f : grid.freqs_hz)
        if (f < file_lo - 1e-9 || f > file_hi + 1e-9)
            throw SteeringLoadError("steering file " + path + " does not cover frequency " +
                                    std::to_string(f) + " Hz");

    SteeringSet set;
    set.kind = SourceKind::measured;
    set.grid = grid;
    set.responses.assign(grid.freq_count(), Eigen::MatrixXcd(grid.angle_count(), mf.mic_count));
    for (int q = 0; q < grid.freq_count(); ++q) {
        const double f = grid.freqs_hz[q];
        // bracketing file bins; linear on real and imaginary parts
        size_t hi = 0;
        while (hi + 1 < mf.freqs_hz.size() && mf.freqs_hz[hi] < f)
            ++hi;
        const size_t lo = (hi == 0) ? 0 : hi - 1;
        const double f_lo = mf.freqs_hz[lo];
        const double f_hi = mf.freqs_hz[hi];
        const double t = (f_hi > f_lo) ? std::clamp((f - f_lo) / (f_hi - f_lo), 0.0, 1.0) : 0.0;
        for (int m = 0; m < grid.angle_count(); ++m) {
            const auto& rows = mf.responses[dir_index[m]];
            set.responses[q].row(m) = ((1.0 - t) * rows[lo] + t * rows[hi]).transpose();
        }
    }
    set.validate();
    return set;
}

} // namespace polybf
