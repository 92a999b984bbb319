#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace duplex::audio {

double rms(std::span<const float> x);

/// 20 log10(rms(signal) / rms(noise)).
double snr_db(std::span<const float> signal, std::span<const float> noise);

/// Gain g such that snr_db(signal, g * noise) == target_db. Throws
/// std::invalid_argument when either input has zero energy.
double snr_gain(std::span<const float> signal, std::span<const float> noise, double target_db);

struct MixResult {
    std::vector<float> samples;
    double gain = 0.0;
    std::size_t clipped = 0;
};

/// signal + g * noise at the requested SNR, clipped to [-1, 1]. `noise` must be
/// the same length as `signal`; see fit_length.
MixResult mix_at_snr(std::span<const float> signal, std::span<const float> noise, double target_db);

/// Tiles or truncates `x` to exactly `n` samples.
std::vector<float> fit_length(std::span<const float> x, std::size_t n);

/// Clips in place, returning the number of samples that were out of range.
std::size_t clip_unit(std::span<float> x);

}  // namespace duplex::audio
