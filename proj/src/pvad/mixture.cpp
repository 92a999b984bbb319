#include "duplex/pvad/mixture.hpp"

#include <stdexcept>

#include "duplex/audio/mix.hpp"
#include "duplex/runtime/random.hpp"

namespace duplex::pvad {

std::vector<std::uint8_t> activity_labels(const audio::Utterance& utt, std::size_t n_frames) {
    const auto samples = audio::concat_samples(utt.audio);
    if (samples.empty()) throw std::invalid_argument("activity_labels: empty utterance");
    std::vector<std::uint8_t> labels(n_frames, 0);
    for (std::size_t k = 0; k < n_frames; ++k) {
        // Frame start in utterance-local time, wrapped for tiling. Sample-exact
        // arithmetic avoids fmod drift on grid points.
        const std::size_t sample = (k * audio::kFrameSamples) % samples.size();
        const double t = static_cast<double>(sample) / audio::kSampleRate;
        for (const auto& iv : utt.activity) {
            if (t >= iv.start - 1e-9 && t < iv.end - 1e-9) {
                labels[k] = 1;
                break;
            }
        }
    }
    return labels;
}

TrainingMixture build_training_mixture(const audio::Utterance& target, const audio::Utterance& interferer,
                                       std::span<const float> noise, std::uint64_t seed) {
    SeededRng rng(seed);
    TrainingMixture m;
    m.source = rng.bernoulli(0.5) ? MixtureSource::interferer : MixtureSource::noise;
    m.snr_db = rng.uniform(kMinTrainingSnrDb, kMaxTrainingSnrDb);

    const auto tgt = audio::fit_length(audio::concat_samples(target.audio), kMixtureSamples);
    const auto other = m.source == MixtureSource::interferer
                           ? audio::fit_length(audio::concat_samples(interferer.audio), kMixtureSamples)
                           : audio::fit_length(noise, kMixtureSamples);
    auto mixed = audio::mix_at_snr(tgt, other, m.snr_db);
    m.samples = std::move(mixed.samples);
    m.clipped = mixed.clipped;
    m.labels = activity_labels(target, kMixtureSamples / audio::kFrameSamples);
    return m;
}

}  // namespace duplex::pvad
