#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "duplex/audio/frame.hpp"

namespace duplex::pvad {

inline constexpr std::size_t kMixtureSamples = 5 * audio::kSampleRate;
inline constexpr double kMinTrainingSnrDb = 0.0;
inline constexpr double kMaxTrainingSnrDb = 30.0;

enum class MixtureSource { interferer, noise };

struct TrainingMixture {
    std::vector<float> samples;   // 5 s
    std::vector<std::uint8_t> labels;  // one per 10 ms frame, 1 = target active
    double snr_db = 0.0;
    MixtureSource source = MixtureSource::noise;
    std::size_t clipped = 0;
};

/// Target + (interferer or noise, 50/50) at SNR ~ U[0, 30] dB, all tiled or
/// trimmed to 5 s. Deterministic in `seed`.
TrainingMixture build_training_mixture(const audio::Utterance& target, const audio::Utterance& interferer,
                                       std::span<const float> noise, std::uint64_t seed);

/// Per-frame activity labels for `n_frames` frames of `utt` tiled end to end.
std::vector<std::uint8_t> activity_labels(const audio::Utterance& utt, std::size_t n_frames);

}  // namespace duplex::pvad
