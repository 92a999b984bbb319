#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duplex/audio/frame.hpp"

namespace duplex::sim {

/// Parameters of a synthetic talker for the formant synthesizer.
struct VoiceProfile {
    std::string name;
    double f0 = 120.0;            // mean pitch, Hz
    double formant_scale = 1.0;   // vocal-tract scaling applied to vowel formants
    double tilt = 0.9;            // glottal source low-pass pole
    double breathiness = 0.02;    // aspiration noise relative to voicing
};

/// Built-in distinct talkers; index 0 and 1 differ most.
const std::vector<VoiceProfile>& builtin_voices();
const VoiceProfile& voice_by_name(const std::string& name);

struct SynthOptions {
    double lead_silence = 0.2;   // rounded to whole frames
    double tail_silence = 0.2;
    double target_rms = 0.1;     // RMS over the voiced interval
};

/// Deterministic formant-synthesized utterance of `transcript` (one or two
/// vowel syllables per word). Ground-truth activity is one interval from the
/// first syllable onset to the last syllable end, both on the 10 ms grid.
audio::Utterance synthesize(const VoiceProfile& voice, const std::string& transcript, std::uint64_t seed,
                            audio::Language language = audio::Language::en, const SynthOptions& options = {});

/// Random English-like transcript of `words` words from a fixed vocabulary.
std::string random_transcript(std::uint64_t seed, std::size_t words);

enum class NoiseKind { white, pink, brown, babble_hum };

std::string to_string(NoiseKind kind);

/// Stationary synthetic noise, unit-free (callers scale by SNR).
std::vector<float> make_noise(NoiseKind kind, double seconds, std::uint64_t seed);

}  // namespace duplex::sim
