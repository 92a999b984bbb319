#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "duplex/audio/frame.hpp"

namespace duplex::sim {

struct NamedClip {
    std::string name;
    std::vector<float> samples;
};

/// Source material for scenario generation. Interferer clips hold voiced
/// audio only.
struct ScenarioPool {
    std::vector<NamedClip> noises;
    std::vector<NamedClip> interferers;
};

struct GroundTruth {
    double primary_onset = 0.0;
    double primary_end = 0.0;
    std::optional<audio::Interval> interferer;
    std::optional<audio::Interval> noise;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ScenarioOptions {
    double noise_probability = 0.5;
    bool interferer_enabled = true;
    double snr_noise_db = 5.0;
    double snr_interferer_db = 20.0;
    double interferer_seconds = 2.0;
    // How far the noise starts before the onset and runs past it.
    double noise_lead_min = 0.2, noise_lead_max = 0.8;
    double noise_overlap_min = 0.2, noise_overlap_max = 0.6;
    // Silence before the primary utterance (rounded to whole frames).
    double lead_in = 1.0;
    double tail = 0.5;
    double min_primary_seconds = 0.5;
};

/// A synthetic evaluation session. Every clip is stored exactly as it is
/// placed; render_scenario only scales and sums.
struct Scenario {
    std::uint64_t seed = 0;
    std::string name;
    audio::Utterance primary;
    // Start of the primary utterance's first frame.
    double lead_in = 0.0;
    bool noise_present = false;
    std::string noise_name;
    std::vector<float> noise;
    std::string interferer_name;
    std::vector<float> interferer;
    double interferer_offset = 0.0;
    double snr_noise_db = 5.0;
    double snr_interferer_db = 20.0;
    // Rendered length in seconds, a whole number of frames.
    double duration = 0.0;
    GroundTruth ground_truth;
};

/// Seeded draws: noise presence (p = noise_probability), noise clip and its
/// placement around the onset, interferer clip, and interferer offset
/// ~ U[-1, 1] s relative to the primary end. Throws std::invalid_argument when
/// the primary's voiced span is shorter than min_primary_seconds or a needed
/// pool is empty.
Scenario generate_scenario(const audio::Utterance& primary, const ScenarioPool& pool, std::uint64_t seed,
                           const ScenarioOptions& options = {});

enum LabelBits : std::uint8_t { kPrimaryActive = 1, kInterfererActive = 2, kNoiseActive = 4 };

struct Rendered {
    std::vector<float> samples;
    // One entry per 10 ms frame: LabelBits from the ground truth.
    std::vector<std::uint8_t> labels;
    std::size_t clipped = 0;
    double noise_gain = 0.0;
    double interferer_gain = 0.0;

    std::vector<audio::AudioFrame> frames() const;
};

/// Mixes the scenario at its SNRs. The noise gain is set on the region where
/// noise and primary speech overlap, the interferer gain against the primary's
/// voiced span. With include_primary = false the same noise and interferer
/// are rendered without the primary (for primary-silent trials).
Rendered render_scenario(const Scenario& s, bool include_primary = true);

/// Built-in pool: four noise colours and interferers from the built-in voices
/// other than `primary_voice`.
ScenarioPool default_pool(std::uint64_t seed, audio::Language language = audio::Language::en,
                          std::size_t primary_voice = 0);

/// The enrolled user's voice for generated corpora.
audio::Utterance primary_utterance(std::uint64_t seed, audio::Language language = audio::Language::en,
                                   std::size_t voice = 0);
/// At least 2 s of the primary voice for enrollment.
audio::Utterance enrollment_utterance(std::uint64_t seed, std::size_t voice = 0);

/// `count` scenarios with seeds seed, seed + 1, ...
std::vector<Scenario> make_scenarios(std::size_t count, std::uint64_t seed,
                                     audio::Language language = audio::Language::en,
                                     const ScenarioOptions& options = {});

}  // namespace duplex::sim
