#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "duplex/audio/frame.hpp"
#include "duplex/audio/mel.hpp"

namespace duplex::pvad {

inline constexpr std::size_t kEmbeddingDim = 192;
inline constexpr std::uint64_t kProjectionSeed = 0x5eed'0192ULL;

/// Unit-norm speaker vector conditioning the personalized VAD.
class SpeakerEmbedding {
public:
    SpeakerEmbedding() = default;

    /// Normalizes `v` to unit L2 norm. Throws on an all-zero vector.
    static SpeakerEmbedding from_vector(std::vector<float> v);

    std::span<const float> values() const { return v_; }
    std::size_t dim() const { return v_.size(); }
    bool empty() const { return v_.empty(); }
    double norm() const;

    friend bool operator==(const SpeakerEmbedding&, const SpeakerEmbedding&) = default;

private:
    std::vector<float> v_;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);
double cosine_similarity(const SpeakerEmbedding& a, const SpeakerEmbedding& b);

/// Pluggable speaker encoder. A trained encoder (e.g. ECAPA-TDNN behind an
/// adapter) implements the same interface.
class SpeakerEncoder {
public:
    virtual ~SpeakerEncoder() = default;
    virtual SpeakerEmbedding encode(std::span<const audio::AudioFrame> audio) const = 0;
    virtual std::size_t dim() const = 0;
};

/// Deterministic reference encoder: mean spectral shape (see spectral_shape)
/// of the voiced frames, mapped to 192 dims by a fixed seeded random
/// projection.
class ReferenceSpeakerEncoder final : public SpeakerEncoder {
public:
    explicit ReferenceSpeakerEncoder(std::uint64_t seed = kProjectionSeed,
                                     audio::MelConfig mel = {});

    SpeakerEmbedding encode(std::span<const audio::AudioFrame> audio) const override;
    std::size_t dim() const override { return kEmbeddingDim; }

    /// Projection of a single shape vector (not normalized).
    std::vector<float> project(std::span<const float> shape) const;

    const audio::MelConfig& mel_config() const { return mel_; }

private:
    audio::MelConfig mel_;
    std::vector<float> projection_;  // [kEmbeddingDim x n_mels]
};

/// Log-mel row with its broad spectral envelope removed: the row minus a
/// +-3 bin moving average across frequency. Keeps harmonic spacing and formant
/// peaks; level and tilt cancel.
void spectral_shape(std::span<const float> row, std::span<float> out);

/// Log of the mean linear energy across bins of a log-mel row.
double row_log_energy(std::span<const float> row);

/// Requires at least 1 s (100 frames) of audio; throws std::invalid_argument
/// otherwise.
SpeakerEmbedding enroll(std::span<const audio::AudioFrame> enrollment_audio,
                        const SpeakerEncoder& encoder);

}  // namespace duplex::pvad
