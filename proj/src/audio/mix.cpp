#include "duplex/audio/mix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace duplex::audio {

double rms(std::span<const float> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double snr_db(std::span<const float> signal, std::span<const float> noise) {
    return 20.0 * std::log10(rms(signal) / rms(noise));
}

double snr_gain(std::span<const float> signal, std::span<const float> noise, double target_db) {
    const double rs = rms(signal);
    const double rn = rms(noise);
    if (rs == 0.0) throw std::invalid_argument("mix: signal has zero RMS");
    if (rn == 0.0) throw std::invalid_argument("mix: noise has zero RMS");
    if (!std::isfinite(target_db)) throw std::invalid_argument("mix: SNR must be finite");
    return (rs / rn) * std::pow(10.0, -target_db / 20.0);
}

MixResult mix_at_snr(std::span<const float> signal, std::span<const float> noise, double target_db) {
    if (signal.size() != noise.size()) {
        throw std::invalid_argument("mix: noise length " + std::to_string(noise.size()) +
                                    " != signal length " + std::to_string(signal.size()));
    }
    MixResult r;
    r.gain = snr_gain(signal, noise, target_db);
    r.samples.resize(signal.size());
    for (std::size_t i = 0; i < signal.size(); ++i) {
        r.samples[i] = static_cast<float>(signal[i] + r.gain * noise[i]);
    }
    r.clipped = clip_unit(r.samples);
    return r;
}

std::vector<float> fit_length(std::span<const float> x, std::size_t n) {
    if (x.empty()) throw std::invalid_argument("fit_length: empty input");
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i % x.size()];
    return out;
}

std::size_t clip_unit(std::span<float> x) {
    std::size_t n = 0;
    for (float& v : x) {
        if (v > 1.0f) {
            v = 1.0f;
            ++n;
        } else if (v < -1.0f) {
            v = -1.0f;
            ++n;
        }
    }
    return n;
}

}  // namespace duplex::audio
