#include "duplex/audio/frame.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace duplex::audio {

std::int64_t frame_index_at_or_after(double t) {
    return static_cast<std::int64_t>(std::ceil(t / kFrameSeconds - 1e-6));
}

std::string to_string(Language lang) {
    return lang == Language::zh ? "zh" : "en";
}

Language language_from_string(const std::string& s) {
    if (s == "zh") return Language::zh;
    if (s == "en") return Language::en;
    throw std::invalid_argument("unknown language '" + s + "'");
}

std::vector<AudioFrame> frame_stream(std::span<const float> pcm, int sample_rate,
                                     std::int64_t first_index) {
    if (sample_rate != kSampleRate) {
        throw std::invalid_argument("unsupported sample rate " + std::to_string(sample_rate) +
                                    " Hz (expected 16000)");
    }
    std::vector<AudioFrame> frames;
    frames.reserve((pcm.size() + kFrameSamples - 1) / kFrameSamples);
    for (std::size_t pos = 0; pos < pcm.size(); pos += kFrameSamples) {
        const std::size_t n = std::min(kFrameSamples, pcm.size() - pos);
        AudioFrame f;
        std::copy_n(pcm.begin() + static_cast<std::ptrdiff_t>(pos), n, f.samples.begin());
        f.index = first_index + static_cast<std::int64_t>(frames.size());
        f.padding = static_cast<std::uint16_t>(kFrameSamples - n);
        frames.push_back(f);
    }
    return frames;
}

std::vector<float> concat_samples(std::span<const AudioFrame> frames) {
    std::vector<float> out;
    out.reserve(frames.size() * kFrameSamples);
    for (const auto& f : frames) {
        out.insert(out.end(), f.samples.begin(), f.samples.end() - f.padding);
    }
    return out;
}

}  // namespace duplex::audio
