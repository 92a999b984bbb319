#include "duplex/sim/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "duplex/audio/mix.hpp"
#include "duplex/runtime/random.hpp"

namespace duplex::sim {
namespace {

constexpr double kFs = audio::kSampleRate;

struct Vowel {
    double f1, f2, f3;
};

// Adult male reference formants.
constexpr std::array<Vowel, 6> kVowels{{
    {730, 1090, 2440},  // a
    {270, 2290, 3010},  // i
    {300, 870, 2240},   // u
    {530, 1840, 2480},  // e
    {570, 840, 2410},   // o
    {660, 1720, 2410},  // ae
}};

/// Two-pole resonator, unity gain at DC normalised out by the caller.
class Resonator {
public:
    void set(double freq, double bw) {
        const double r = std::exp(-std::numbers::pi * bw / kFs);
        a1_ = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / kFs);
        a2_ = -r * r;
        g_ = 1.0 - a1_ - a2_;
    }
    double step(double x) {
        const double y = g_ * x + a1_ * y1_ + a2_ * y2_;
        y2_ = y1_;
        y1_ = y;
        return y;
    }

private:
    double a1_ = 0, a2_ = 0, g_ = 1, y1_ = 0, y2_ = 0;
};

std::size_t to_frames(double seconds) {
    return static_cast<std::size_t>(std::llround(seconds / audio::kFrameSeconds));
}

const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> words{
        "hello", "weather", "today", "please", "book", "flight", "music", "play", "stop", "what",
        "time", "tomorrow", "call", "mother", "open", "window", "light", "kitchen", "news", "search",
        "order", "coffee", "remind", "meeting", "train", "ticket", "city", "rain", "sunny", "thanks"};
    return words;
}

}  // namespace

const std::vector<VoiceProfile>& builtin_voices() {
    static const std::vector<VoiceProfile> voices{
        {"bass", 95.0, 0.90, 0.94, 0.02},
        {"soprano", 235.0, 1.24, 0.80, 0.05},
        {"tenor", 140.0, 1.02, 0.90, 0.03},
        {"alto", 190.0, 1.15, 0.85, 0.04},
    };
    return voices;
}

const VoiceProfile& voice_by_name(const std::string& name) {
    for (const auto& v : builtin_voices()) {
        if (v.name == name) return v;
    }
    throw std::invalid_argument("unknown voice '" + name + "'");
}

std::string random_transcript(std::uint64_t seed, std::size_t words) {
    SeededRng rng(seed);
    const auto& vocab = vocabulary();
    std::ostringstream out;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) out << ' ';
        out << vocab[rng.index(vocab.size())];
    }
    return out.str();
}

audio::Utterance synthesize(const VoiceProfile& voice, const std::string& transcript, std::uint64_t seed,
                            audio::Language language, const SynthOptions& options) {
    std::istringstream words_in(transcript);
    std::vector<std::string> words;
    for (std::string w; words_in >> w;) words.push_back(w);
    if (words.empty()) throw std::invalid_argument("synthesize: empty transcript");

    SeededRng rng(seed);
    const std::size_t lead = to_frames(options.lead_silence) * audio::kFrameSamples;
    std::vector<float> pcm(lead, 0.0f);

    std::array<Resonator, 3> formants;
    double phase = 0.0;
    double src_lp = 0.0;
    const std::size_t voiced_start = pcm.size();
    for (std::size_t w = 0; w < words.size(); ++w) {
        const std::size_t syllables = 1 + (words[w].size() > 5 ? 1 : 0);
        for (std::size_t s = 0; s < syllables; ++s) {
            const Vowel& v = kVowels[rng.index(kVowels.size())];
            const double dur = rng.uniform(0.16, 0.28);
            const auto n = static_cast<std::size_t>(dur * kFs);
            const double f0_start = voice.f0 * rng.uniform(0.92, 1.10);
            const double f0_end = f0_start * rng.uniform(0.85, 1.02);
            formants[0].set(v.f1 * voice.formant_scale, 80.0);
            formants[1].set(v.f2 * voice.formant_scale, 110.0);
            formants[2].set(v.f3 * voice.formant_scale, 160.0);
            const std::size_t ramp = static_cast<std::size_t>(0.02 * kFs);
            for (std::size_t i = 0; i < n; ++i) {
                const double u = static_cast<double>(i) / static_cast<double>(n);
                const double f0 = f0_start + (f0_end - f0_start) * u;
                phase += f0 / kFs;
                if (phase >= 1.0) phase -= 1.0;
                const double pulse = 1.0 - 2.0 * phase;  // sawtooth, rich in harmonics
                src_lp = voice.tilt * src_lp + (1.0 - voice.tilt) * pulse;
                const double src = src_lp + voice.breathiness * rng.uniform(-1.0, 1.0);
                double y = 0.0;
                y += formants[0].step(src);
                y += 0.6 * formants[1].step(src);
                y += 0.3 * formants[2].step(src);
                double env = 1.0;
                if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
                if (n - i <= ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - i) / ramp);
                pcm.push_back(static_cast<float>(y * env));
            }
            // Short intra-word transition.
            pcm.insert(pcm.end(), static_cast<std::size_t>(rng.uniform(0.015, 0.04) * kFs), 0.0f);
        }
        if (w + 1 < words.size()) {
            pcm.insert(pcm.end(), static_cast<std::size_t>(rng.uniform(0.03, 0.09) * kFs), 0.0f);
        }
    }
    // Pad the voiced span to the frame grid so the activity interval is exact.
    const std::size_t voiced_len = pcm.size() - voiced_start;
    const std::size_t voiced_frames = (voiced_len + audio::kFrameSamples - 1) / audio::kFrameSamples;
    pcm.resize(voiced_start + voiced_frames * audio::kFrameSamples, 0.0f);
    const std::size_t voiced_end = pcm.size();
    pcm.insert(pcm.end(), to_frames(options.tail_silence) * audio::kFrameSamples, 0.0f);

    const double level = audio::rms(std::span<const float>(pcm).subspan(voiced_start, voiced_end - voiced_start));
    const double g = options.target_rms / level;
    for (float& x : pcm) x = static_cast<float>(x * g);
    audio::clip_unit(pcm);

    audio::Utterance u;
    u.audio = audio::frame_stream(pcm, audio::kSampleRate);
    u.transcript = transcript;
    u.language = language;
    u.activity.push_back({static_cast<double>(voiced_start) / kFs, static_cast<double>(voiced_end) / kFs});
    return u;
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::white: return "white";
        case NoiseKind::pink: return "pink";
        case NoiseKind::brown: return "brown";
        case NoiseKind::babble_hum: return "babble_hum";
    }
    return "unknown";
}

std::vector<float> make_noise(NoiseKind kind, double seconds, std::uint64_t seed) {
    SeededRng rng(seed);
    const auto n = static_cast<std::size_t>(seconds * kFs);
    std::vector<float> out(n);
    // Paul Kellet's economy pink filter state.
    double b0 = 0, b1 = 0, b2 = 0, brown = 0, mod_phase = rng.uniform01();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = rng.uniform(-1.0, 1.0);
        double y = 0.0;
        switch (kind) {
            case NoiseKind::white: y = w; break;
            case NoiseKind::pink:
                b0 = 0.99765 * b0 + w * 0.0990460;
                b1 = 0.96300 * b1 + w * 0.2965164;
                b2 = 0.57000 * b2 + w * 1.0526913;
                y = b0 + b1 + b2 + w * 0.1848;
                break;
            case NoiseKind::brown:
                brown = 0.995 * brown + 0.05 * w;
                y = brown;
                break;
            case NoiseKind::babble_hum: {
                const double t = static_cast<double>(i) / kFs;
                mod_phase += 3.0 / kFs;
                b0 = 0.97 * b0 + 0.1 * w;
                y = 0.4 * std::sin(2.0 * std::numbers::pi * 100.0 * t) +
                    b0 * (0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * mod_phase));
                break;
            }
        }
        out[i] = static_cast<float>(y);
    }
    const double level = audio::rms(out);
    if (level > 0) {
        for (float& x : out) x = static_cast<float>(x * 0.1 / level);
    }
    return out;
}

}  // namespace duplex::sim
