#include "polybf/firsynth.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <thread>

namespace polybf {

using std::complex;
using json = nlohmann::json;

void FilterBank::validate() const {
    if (mic_count < 1 || ppf_order < 0)
        throw std::invalid_argument("FilterBank: bad dimensions");
    if (fir_length < 2 || fir_length > kMaxFirLength)
        throw std::invalid_argument("FilterBank: filter length out of range");
    const int expected_delay = (fir_length % 2 == 1) ? (fir_length - 1) / 2 : fir_length / 2;
    if (modeling_delay_samples != expected_delay)
        throw std::invalid_argument("FilterBank: modeling delay inconsistent with length");
    if (!(sample_rate_hz > 0.0))
        throw std::invalid_argument("FilterBank: sample rate must be positive");
    if (taps.size() != static_cast<size_t>(mic_count) * (ppf_order + 1) * fir_length)
        throw std::invalid_argument("FilterBank: tap count mismatch");
    for (double t : taps)
        if (!std::isfinite(t))
            throw std::invalid_argument("FilterBank: non-finite tap");
}

std::vector<double> synthesize_taps(const std::function<complex<double>(double)>& response,
                                    int length, double sample_rate_hz) {
    if (length < 2 || length > kMaxFirLength)
        throw std::invalid_argument("synthesize_taps: filter length out of range");
    const int half_bins = 4 * length; // K
    const int nfft = 2 * half_bins;
    const double bin_hz = sample_rate_hz / nfft;
    const int delay = (length % 2 == 1) ? (length - 1) / 2 : length / 2;

    std::vector<double> re(half_bins + 1), im(half_bins + 1);
    for (int k = 0; k <= half_bins; ++k) {
        const double f = k * bin_hz;
        const complex<double> w = response(f);
        const double phase = -2.0 * kPi * f * delay / sample_rate_hz;
        const complex<double> h = w * std::polar(1.0, phase);
        re[k] = h.real();
        im[k] = h.imag();
    }
    // conjugate symmetry: DC and Nyquist bins are real
    im[0] = 0.0;
    im[half_bins] = 0.0;

    std::vector<double> cos_tab(nfft), sin_tab(nfft);
    for (int i = 0; i < nfft; ++i) {
        cos_tab[i] = std::cos(2.0 * kPi * i / nfft);
        sin_tab[i] = std::sin(2.0 * kPi * i / nfft);
    }

    // inverse transform of the conjugate-symmetric spectrum, first L samples
    std::vector<double> taps(length);
    for (int l = 0; l < length; ++l) {
        double acc = re[0] + ((l % 2 == 0) ? re[half_bins] : -re[half_bins]);
        int idx = 0;
        for (int k = 1; k < half_bins; ++k) {
            idx += l;
            if (idx >= nfft)
                idx -= nfft;
            acc += 2.0 * (re[k] * cos_tab[idx] - im[k] * sin_tab[idx]);
        }
        taps[l] = acc / nfft;
    }

    for (int l = 0; l < length; ++l)
        taps[l] *= 0.5 * (1.0 - std::cos(2.0 * kPi * l / (length - 1)));
    return taps;
}

namespace {

// Piecewise-linear interpolation of the designed weights (real and imaginary
// parts separately), pulled to zero outside the band edges with 50 Hz
// raised-cosine transitions.
class BandSampler {
  public:
    BandSampler(const std::vector<FrequencyDesign>& designs, int coeff_index)
        : designs_(designs), coeff_(coeff_index) {}

    complex<double> operator()(double f) const {
        const double f_lo = designs_.front().freq_hz;
        const double f_hi = designs_.back().freq_hz;
        if (f >= f_lo && f <= f_hi)
            return interpolate(f);
        constexpr double kTransitionHz = 50.0;
        if (f < f_lo) {
            const double edge = std::max(0.0, f_lo - kTransitionHz);
            if (f <= edge || f_lo <= edge)
                return {0.0, 0.0};
            const double t = (f - edge) / (f_lo - edge);
            return designs_.front().weights(coeff_) * (0.5 * (1.0 - std::cos(kPi * t)));
        }
        const double edge = f_hi + kTransitionHz;
        if (f >= edge)
            return {0.0, 0.0};
        const double t = (f - f_hi) / kTransitionHz;
        return designs_.back().weights(coeff_) * (0.5 * (1.0 + std::cos(kPi * t)));
    }

  private:
    complex<double> interpolate(double f) const {
        size_t hi = 1;
        while (hi + 1 < designs_.size() && designs_[hi].freq_hz < f)
            ++hi;
        const auto& d0 = designs_[hi - 1];
        const auto& d1 = designs_[hi];
        const double span = d1.freq_hz - d0.freq_hz;
        const double t = (span > 0.0) ? std::clamp((f - d0.freq_hz) / span, 0.0, 1.0) : 0.0;
        const complex<double> w0 = d0.weights(coeff_);
        const complex<double> w1 = d1.weights(coeff_);
        return {(1.0 - t) * w0.real() + t * w1.real(), (1.0 - t) * w0.imag() + t * w1.imag()};
    }

    const std::vector<FrequencyDesign>& designs_;
    int coeff_;
};

} // namespace

FilterBank synthesize(const std::vector<FrequencyDesign>& designs, int length,
                      double sample_rate_hz, std::string config_hash) {
    if (designs.empty())
        throw std::invalid_argument("synthesize: no designs");
    if (length < 2 || length > kMaxFirLength)
        throw std::invalid_argument("synthesize: filter length out of range");
    const int n = designs.front().mic_count;
    const int order = designs.front().ppf_order;
    double prev_f = 0.0;
    for (const auto& d : designs) {
        if (d.mic_count != n || d.ppf_order != order ||
            d.weights.size() != static_cast<long>(n) * (order + 1))
            throw std::invalid_argument("synthesize: inconsistent designs");
        if (!(d.freq_hz > prev_f))
            throw std::invalid_argument("synthesize: design frequencies must increase");
        if (!(d.freq_hz < 0.5 * sample_rate_hz))
            throw std::invalid_argument("synthesize: design frequency above Nyquist");
        prev_f = d.freq_hz;
    }

    FilterBank bank;
    bank.mic_count = n;
    bank.ppf_order = order;
    bank.fir_length = length;
    bank.sample_rate_hz = sample_rate_hz;
    bank.modeling_delay_samples = (length % 2 == 1) ? (length - 1) / 2 : length / 2;
    bank.config_hash = std::move(config_hash);
    bank.taps.resize(static_cast<size_t>(n) * (order + 1) * length);

    const int filter_count = n * (order + 1);
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, filter_count));
    auto worker = [&](int begin, int end) {
        for (int idx = begin; idx < end; ++idx) {
            BandSampler sampler(designs, idx);
            const std::vector<double> taps = synthesize_taps(sampler, length, sample_rate_hz);
            std::copy(taps.begin(), taps.end(),
                      bank.taps.begin() + static_cast<size_t>(idx) * length);
        }
    };
    if (threads == 1) {
        worker(0, filter_count);
    } else {
        std::vector<std::future<void>> futures;
        const int chunk = (filter_count + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(filter_count, begin + chunk);
            if (begin < end)
                futures.push_back(std::async(std::launch::async, worker, begin, end));
        }
        for (auto& fut : futures)
            fut.get();
    }
    bank.validate();
    return bank;
}

complex<double> frequency_response(const FilterBank& bank, int channel, int fsu, double f_hz) {
    if (channel < 0 || channel >= bank.mic_count || fsu < 0 || fsu > bank.ppf_order)
        throw std::out_of_range("frequency_response: filter index out of range");
    if (f_hz < 0.0 || f_hz > 0.5 * bank.sample_rate_hz)
        throw std::domain_error("frequency_response: frequency outside [0, fs/2]");
    const double omega = 2.0 * kPi * f_hz / bank.sample_rate_hz;
    const complex<double> rot = std::polar(1.0, -omega);
    const double* taps = bank.filter(channel, fsu);
    complex<double> acc = 0.0;
    complex<double> phase = 1.0;
    for (int l = 0; l < bank.fir_length; ++l) {
        acc += taps[l] * phase;
        phase *= rot;
    }
    return acc;
}

namespace {

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        unsigned int v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Alphabet[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Alphabet[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    unsigned int buf = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r')
            continue;
        const int v = value_of(c);
        if (v < 0)
            throw BankIoError("invalid base64 character in filter bank file");
        buf = (buf << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((buf >> bits) & 0xff));
        }
    }
    return out;
}

} // namespace

void write_filter_bank(const std::string& path, const FilterBank& bank) {
    bank.validate();
    json doc;
    doc["format"] = "polybf-bank-v1";
    doc["mic_count"] = bank.mic_count;
    doc["ppf_order"] = bank.ppf_order;
    doc["fir_length"] = bank.fir_length;
    doc["sample_rate_hz"] = bank.sample_rate_hz;
    doc["modeling_delay_samples"] = bank.modeling_delay_samples;
    doc["config_hash"] = bank.config_hash;
    if (!bank.design_metadata_json.empty())
        doc["design"] = json::parse(bank.design_metadata_json);
    // taps as little-endian float64 in (n, p, l) order
    static_assert(sizeof(double) == 8);
    std::vector<unsigned char> raw(bank.taps.size() * 8);
    std::memcpy(raw.data(), bank.taps.data(), raw.size());
    doc["taps_base64"] = base64_encode(raw.data(), raw.size());

    std::ofstream out(path);
    if (!out)
        throw BankIoError("cannot open filter bank file for writing: " + path);
    out << doc.dump(1) << '\n';
    if (!out)
        throw BankIoError("failed writing filter bank file: " + path);
}

FilterBank read_filter_bank(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw BankIoError("cannot open filter bank file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw BankIoError("malformed filter bank file " + path + ": " + e.what());
    }
    FilterBank bank;
    try {
        if (doc.at("format").get<std::string>() != "polybf-bank-v1")
            throw BankIoError("unsupported filter bank format in " + path);
        bank.mic_count = doc.at("mic_count").get<int>();
        bank.ppf_order = doc.at("ppf_order").get<int>();
        bank.fir_length = doc.at("fir_length").get<int>();
        bank.sample_rate_hz = doc.at("sample_rate_hz").get<double>();
        bank.modeling_delay_samples = doc.at("modeling_delay_samples").get<int>();
        bank.config_hash = doc.value("config_hash", std::string{});
        if (doc.contains("design"))
            bank.design_metadata_json = doc["design"].dump();
        const std::vector<unsigned char> raw = base64_decode(doc.at("taps_base64").get<std::string>());
        if (raw.size() != static_cast<size_t>(bank.mic_count) * (bank.ppf_order + 1) *
                              bank.fir_length * 8)
            throw BankIoError("filter bank tap payload size mismatch in " + path);
        bank.taps.resize(raw.size() / 8);
        std::memcpy(bank.taps.data(), raw.data(), raw.size());
    } catch (const json::exception& e) {
        throw BankIoError("filter bank file " + path + " missing field: " + e.what());
    }
    bank.validate();
    return bank;
}

} // namespace polybf
