#include "duplex/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

#include "duplex/audio/mix.hpp"
#include "duplex/runtime/random.hpp"
#include "duplex/sim/synth.hpp"

namespace duplex::sim {
namespace {

constexpr double kFs = audio::kSampleRate;

std::size_t to_sample(double t) { return static_cast<std::size_t>(std::llround(std::max(0.0, t) * kFs)); }

double round_to_frames(double t) { return audio::frame_time(std::llround(t / audio::kFrameSeconds)); }

std::vector<float> primary_samples(const Scenario& s) { return audio::concat_samples(s.primary.audio); }

// Mark frames overlapping [a, b).
void label(std::vector<std::uint8_t>& labels, const audio::Interval& iv, std::uint8_t bit) {
    if (!(iv.end > iv.start)) return;
    const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(iv.start / audio::kFrameSeconds + 1e-9)));
    const auto last = audio::frame_index_at_or_after(iv.end);  // exclusive
    for (auto k = first; k < last && k < static_cast<std::int64_t>(labels.size()); ++k) {
        labels[static_cast<std::size_t>(k)] |= bit;
    }
}

}  // namespace

Scenario generate_scenario(const audio::Utterance& primary, const ScenarioPool& pool, std::uint64_t seed,
                           const ScenarioOptions& o) {
    if (primary.activity.empty()) throw std::invalid_argument("scenario: primary utterance has no voiced interval");
    const double voiced = primary.activity.back().end - primary.activity.front().start;
    if (voiced < o.min_primary_seconds) {
        throw std::invalid_argument("scenario: primary speech lasts " + std::to_string(voiced) + " s, need at least " +
                                    std::to_string(o.min_primary_seconds) + " s");
    }
    if (o.noise_probability > 0.0 && pool.noises.empty()) throw std::invalid_argument("scenario: empty noise pool");
    if (o.interferer_enabled && pool.interferers.empty()) {
        throw std::invalid_argument("scenario: empty interferer pool");
    }

    SeededRng rng(seed);
    // Every draw is made unconditionally so one field never shifts another.
    const bool noise_present = rng.bernoulli(o.noise_probability);
    const std::size_t noise_idx = pool.noises.empty() ? 0 : rng.index(pool.noises.size());
    const double lead = rng.uniform(o.noise_lead_min, o.noise_lead_max);
    const double overlap = rng.uniform(o.noise_overlap_min, o.noise_overlap_max);
    const std::size_t interferer_idx = pool.interferers.empty() ? 0 : rng.index(pool.interferers.size());
    const double offset = rng.uniform(-1.0, 1.0);

    Scenario s;
    s.seed = seed;
    s.name = "scenario-" + std::to_string(seed);
    s.primary = primary;
    s.lead_in = round_to_frames(o.lead_in);
    s.snr_noise_db = o.snr_noise_db;
    s.snr_interferer_db = o.snr_interferer_db;
    auto& gt = s.ground_truth;
    gt.primary_onset = s.lead_in + primary.activity.front().start;
    gt.primary_end = s.lead_in + primary.activity.back().end;
    double end = s.lead_in + double(primary.audio.size()) * audio::kFrameSeconds;

    if (noise_present) {
        const auto& clip = pool.noises[noise_idx];
        const audio::Interval iv{std::max(0.0, gt.primary_onset - lead),
                                 std::min(gt.primary_end, gt.primary_onset + overlap)};
        s.noise_present = true;
        s.noise_name = clip.name;
        s.noise = audio::fit_length(clip.samples, to_sample(iv.end) - to_sample(iv.start));
        gt.noise = iv;
        end = std::max(end, iv.end);
    }
    if (o.interferer_enabled) {
        const auto& clip = pool.interferers[interferer_idx];
        const double start = gt.primary_end + offset;
        s.interferer_name = clip.name;
        s.interferer_offset = offset;
        s.interferer = audio::fit_length(clip.samples, to_sample(start + o.interferer_seconds) - to_sample(start));
        gt.interferer = audio::Interval{start, start + o.interferer_seconds};
        end = std::max(end, gt.interferer->end);
    }
    s.duration = audio::frame_time(audio::frame_index_at_or_after(end + o.tail));
    return s;
}

std::vector<audio::AudioFrame> Rendered::frames() const { return audio::frame_stream(samples, audio::kSampleRate); }

Rendered render_scenario(const Scenario& s, bool include_primary) {
    Rendered r;
    const std::size_t n = to_sample(s.duration);
    r.samples.assign(n, 0.0f);
    r.labels.assign(static_cast<std::size_t>(audio::frame_index_at_or_after(s.duration)), 0);

    const auto primary = primary_samples(s);
    const std::size_t p0 = to_sample(s.lead_in);
    const auto& gt = s.ground_truth;
    const std::size_t on = to_sample(gt.primary_onset), off = to_sample(gt.primary_end);
    auto region = [&](std::size_t a, std::size_t b) {
        return std::span<const float>(primary).subspan(a - p0, b - a);
    };
    if (p0 + primary.size() > n) throw std::invalid_argument("render: primary exceeds the scenario duration");

    if (include_primary) {
        for (std::size_t i = 0; i < primary.size(); ++i) r.samples[p0 + i] += primary[i];
        label(r.labels, {gt.primary_onset, gt.primary_end}, kPrimaryActive);
    }
    if (s.noise_present && gt.noise) {
        const std::size_t a = to_sample(gt.noise->start);
        const std::size_t ov_a = std::max(a, on), ov_b = std::min(a + s.noise.size(), off);
        if (ov_b <= ov_a) throw std::invalid_argument("render: noise does not overlap the primary speech");
        r.noise_gain = audio::snr_gain(region(ov_a, ov_b),
                                       std::span<const float>(s.noise).subspan(ov_a - a, ov_b - ov_a), s.snr_noise_db);
        for (std::size_t i = 0; i < s.noise.size() && a + i < n; ++i) {
            r.samples[a + i] += static_cast<float>(r.noise_gain * s.noise[i]);
        }
        label(r.labels, *gt.noise, kNoiseActive);
    }
    if (!s.interferer.empty() && gt.interferer) {
        const std::size_t a = to_sample(gt.interferer->start);
        r.interferer_gain = audio::snr_gain(region(on, off), s.interferer, s.snr_interferer_db);
        for (std::size_t i = 0; i < s.interferer.size() && a + i < n; ++i) {
            r.samples[a + i] += static_cast<float>(r.interferer_gain * s.interferer[i]);
        }
        label(r.labels, *gt.interferer, kInterfererActive);
    }
    r.clipped = audio::clip_unit(r.samples);
    return r;
}

ScenarioPool default_pool(std::uint64_t seed, audio::Language language, std::size_t primary_voice) {
    ScenarioPool pool;
    std::uint64_t k = 0;
    for (auto kind : {NoiseKind::white, NoiseKind::pink, NoiseKind::brown, NoiseKind::babble_hum}) {
        pool.noises.push_back({to_string(kind), make_noise(kind, 4.0, seed * 131 + k++)});
    }
    const auto& voices = builtin_voices();
    for (std::size_t v = 0; v < voices.size(); ++v) {
        if (v == primary_voice) continue;
        for (std::uint64_t i = 0; i < 3; ++i) {
            const auto text = random_transcript(seed * 7919 + v * 101 + i, 6);
            auto u = synthesize(voices[v], text, seed * 31 + v * 17 + i, language);
            const auto pcm = audio::concat_samples(u.audio);
            const auto a = to_sample(u.activity.front().start), b = to_sample(u.activity.back().end);
            pool.interferers.push_back({voices[v].name + "-" + std::to_string(i),
                                        std::vector<float>(pcm.begin() + std::ptrdiff_t(a), pcm.begin() + std::ptrdiff_t(b))});
        }
    }
    return pool;
}

audio::Utterance primary_utterance(std::uint64_t seed, audio::Language language, std::size_t voice) {
    SeededRng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const std::size_t words = 3 + rng.index(6);
    return synthesize(builtin_voices().at(voice), random_transcript(seed, words), seed, language);
}

audio::Utterance enrollment_utterance(std::uint64_t seed, std::size_t voice) {
    return synthesize(builtin_voices().at(voice), random_transcript(seed, 12), seed);
}

std::vector<Scenario> make_scenarios(std::size_t count, std::uint64_t seed, audio::Language language,
                                     const ScenarioOptions& options) {
    const auto pool = default_pool(seed, language);
    std::vector<Scenario> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto s = seed + i;
        out.push_back(generate_scenario(primary_utterance(s, language), pool, s, options));
    }
    return out;
}

}  // namespace duplex::sim
