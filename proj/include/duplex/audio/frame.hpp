#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace duplex::audio {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameSamples = 160;
inline constexpr double kFrameSeconds = 0.010;

/// Session-relative time of the start of frame `index`.
inline constexpr double frame_time(std::int64_t index) {
    return static_cast<double>(index) * kFrameSeconds;
}

/// Index of the first frame whose start time is >= t. Tolerates float noise on
/// grid-aligned inputs (0.5 -> 50, not 51).
std::int64_t frame_index_at_or_after(double t);

/// 10 ms of mono audio. Frames of one stream are contiguous: frame k starts at
/// k * 10 ms.
struct AudioFrame {
    std::array<float, kFrameSamples> samples{};
    std::int64_t index = 0;
    // Number of trailing zero samples appended to fill the last frame.
    std::uint16_t padding = 0;

    double start_time() const { return frame_time(index); }
    double end_time() const { return frame_time(index + 1); }
    static constexpr double duration() { return kFrameSeconds; }
    static constexpr int sample_rate() { return kSampleRate; }
    bool padded() const { return padding != 0; }

    friend bool operator==(const AudioFrame&, const AudioFrame&) = default;
};

/// Half-open time interval in seconds.
struct Interval {
    double start = 0.0;
    double end = 0.0;
    double duration() const { return end - start; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Language { zh, en };

std::string to_string(Language lang);
Language language_from_string(const std::string& s);

struct Utterance {
    std::vector<AudioFrame> audio;
    std::string transcript;
    Language language = Language::en;
    // Ground-truth voiced intervals, relative to the first frame.
    std::vector<Interval> activity;
};

/// Splits PCM into 10 ms frames starting at `first_index`. A trailing partial
/// frame is zero padded and flagged. Throws std::invalid_argument for any
/// sample rate other than 16 kHz.
std::vector<AudioFrame> frame_stream(std::span<const float> pcm, int sample_rate,
                                     std::int64_t first_index = 0);

/// Inverse of frame_stream: concatenates samples, dropping padding.
std::vector<float> concat_samples(std::span<const AudioFrame> frames);

}  // namespace duplex::audio
