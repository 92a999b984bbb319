#include "duplex/audio/mel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace duplex::audio {
namespace {

// The FFTW planner is not thread-safe, execution is. One unaligned real-to-
// complex plan per transform size is created on first use and kept for the
// life of the process.
fftw_plan r2c_plan(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, fftw_plan> plans;
    std::lock_guard lock(mu);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw std::runtime_error("mel: fftw planning failed");
    plans.emplace(n, p);
    return p;
}

}  // namespace

void FeatureChunk::append(std::span<const float> r) {
    if (n_bins == 0) n_bins = r.size();
    if (r.size() != n_bins) throw std::invalid_argument("feature row width mismatch");
    data.insert(data.end(), r.begin(), r.end());
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<float> mel_filterbank(const MelConfig& c) {
    const std::size_t n_freq = c.n_fft / 2 + 1;
    std::vector<float> fb(c.n_mels * n_freq, 0.0f);
    const double mel_lo = hz_to_mel(c.f_min);
    const double mel_hi = hz_to_mel(c.f_max);
    std::vector<double> edges(c.n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                          static_cast<double>(c.n_mels + 1));
    }
    const double bin_hz = static_cast<double>(kSampleRate) / static_cast<double>(c.n_fft);
    for (std::size_t m = 0; m < c.n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (std::size_t k = 0; k < n_freq; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double w = 0.0;
            if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
            fb[m * n_freq + k] = static_cast<float>(w);
        }
    }
    return fb;
}

LogMelExtractor::LogMelExtractor(MelConfig config)
    : config_(config),
      history_(config.window, 0.0f),
      hann_(config.window),
      filters_(mel_filterbank(config)),
      input_(config.n_fft),
      spectrum_(config.n_fft / 2 + 1),
      power_(config.n_fft / 2 + 1) {
    if (config_.hop != kFrameSamples) throw std::invalid_argument("mel: hop must equal one frame");
    if (config_.window < config_.hop || config_.window > config_.n_fft) {
        throw std::invalid_argument("mel: window must lie in [hop, n_fft]");
    }
    for (std::size_t i = 0; i < config_.window; ++i) {
        hann_[i] = static_cast<float>(
            0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                 static_cast<double>(config_.window)));
    }
}

void LogMelExtractor::reset() { std::fill(history_.begin(), history_.end(), 0.0f); }

std::vector<float> LogMelExtractor::push(const AudioFrame& frame) {
    std::vector<float> out(config_.n_mels);
    push(frame, out);
    return out;
}

void LogMelExtractor::push(const AudioFrame& frame, std::span<float> out) {
    const std::size_t keep = config_.window - config_.hop;
    std::copy(history_.end() - static_cast<std::ptrdiff_t>(keep), history_.end(), history_.begin());
    std::copy(frame.samples.begin(), frame.samples.end(),
              history_.begin() + static_cast<std::ptrdiff_t>(keep));

    std::fill(input_.begin(), input_.end(), 0.0);
    for (std::size_t i = 0; i < config_.window; ++i) input_[i] = history_[i] * hann_[i];
    auto* spec = reinterpret_cast<fftw_complex*>(spectrum_.data());
    fftw_execute_dft_r2c(r2c_plan(config_.n_fft), input_.data(), spec);
    for (std::size_t k = 0; k < power_.size(); ++k) power_[k] = std::norm(spectrum_[k]);

    const std::size_t n_freq = power_.size();
    for (std::size_t m = 0; m < config_.n_mels; ++m) {
        double e = 0.0;
        const float* w = filters_.data() + m * n_freq;
        for (std::size_t k = 0; k < n_freq; ++k) e += w[k] * power_[k];
        out[m] = static_cast<float>(std::log(e + config_.epsilon));
    }
}

FeatureChunk log_mel(std::span<const AudioFrame> frames, const MelConfig& config) {
    if (frames.empty()) throw std::invalid_argument("log_mel: at least one frame required");
    LogMelExtractor ex(config);
    FeatureChunk chunk;
    chunk.n_bins = config.n_mels;
    chunk.data.resize(frames.size() * config.n_mels);
    for (std::size_t i = 0; i < frames.size(); ++i) ex.push(frames[i], chunk.row(i));
    return chunk;
}

}  // namespace duplex::audio
