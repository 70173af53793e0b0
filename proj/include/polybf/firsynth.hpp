#pragma once

#include "polybf/design.hpp"

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace polybf {

// Real FIR filters for all (channel, filter-unit) pairs, taps in (n, p, l)
// order. modeling_delay_samples is (L-1)/2 for odd L and L/2 for even L.
struct FilterBank {
    int mic_count = 0;
    int ppf_order = 0;
    int fir_length = 0;
    double sample_rate_hz = 0.0;
    int modeling_delay_samples = 0;
    std::string config_hash;
    std::string design_metadata_json; // carried through bank files, may be empty
    std::vector<double> taps;

    double tap(int n, int p, int l) const {
        return taps[(static_cast<size_t>(n) * (ppf_order + 1) + p) * fir_length + l];
    }
    const double* filter(int n, int p) const {
        return taps.data() + (static_cast<size_t>(n) * (ppf_order + 1) + p) * fir_length;
    }
    void validate() const;
};

inline constexpr int kMaxFirLength = 8192;

// Frequency-sampling synthesis core: sample the response on a dense K = 4L
// point half-spectrum, apply the modeling-delay linear phase, enforce
// conjugate symmetry, inverse transform, Hann window.
std::vector<double> synthesize_taps(const std::function<std::complex<double>(double)>& response,
                                    int length, double sample_rate_hz);

FilterBank synthesize(const std::vector<FrequencyDesign>& designs, int length,
                      double sample_rate_hz, std::string config_hash = {});

// Exact DTFT sum of one filter at frequency f.
std::complex<double> frequency_response(const FilterBank& bank, int channel, int fsu, double f_hz);

struct BankIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_filter_bank(const std::string& path, const FilterBank& bank);
FilterBank read_filter_bank(const std::string& path);

} // namespace polybf
