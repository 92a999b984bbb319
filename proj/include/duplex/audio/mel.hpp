#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "duplex/audio/frame.hpp"

namespace duplex::audio {

struct MelConfig {
    std::size_t n_mels = 80;
    std::size_t window = 400;  // 25 ms
    std::size_t hop = kFrameSamples;
    std::size_t n_fft = 512;
    double f_min = 20.0;
    double f_max = 8000.0;
    double epsilon = 1e-10;
};

/// Row-major [rows x n_bins] log-mel matrix, one row per 10 ms hop.
struct FeatureChunk {
    std::vector<float> data;
    std::size_t n_bins = 0;
    double frame_hop = kFrameSeconds;

    std::size_t rows() const { return n_bins == 0 ? 0 : data.size() / n_bins; }
    std::span<const float> row(std::size_t i) const { return {data.data() + i * n_bins, n_bins}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * n_bins, n_bins}; }
    void append(std::span<const float> r);
};

/// Triangular HTK-style filters, [n_mels x (n_fft/2 + 1)] row-major.
std::vector<float> mel_filterbank(const MelConfig& config);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Streaming log-mel front end. Keeps the previous window - hop samples so each
/// 10 ms frame yields exactly one 25 ms analysis row. One instance per stream.
class LogMelExtractor {
public:
    explicit LogMelExtractor(MelConfig config = {});

    std::vector<float> push(const AudioFrame& frame);
    void push(const AudioFrame& frame, std::span<float> out);
    void reset();

    const MelConfig& config() const { return config_; }
    std::size_t n_bins() const { return config_.n_mels; }

private:
    MelConfig config_;
    std::vector<float> history_;  // last `window` samples, oldest first
    std::vector<float> hann_;
    std::vector<float> filters_;
    std::vector<double> input_;
    std::vector<std::complex<double>> spectrum_;
    std::vector<double> power_;
};

FeatureChunk log_mel(std::span<const AudioFrame> frames, const MelConfig& config = {});

}  // namespace duplex::audio
