#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "duplex/audio/mel.hpp"
#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/model.hpp"

namespace duplex::pvad {

/// Carry-over between 10 ms steps: the last kernel-1 inputs of every conv layer
/// and the GRU hidden vector. One per stream.
class PvadState {
public:
    PvadState() = default;
    static PvadState for_model(const PvadModel& model);

    /// Back to the all-zeros initial condition.
    void reset();

    bool matches(const PvadModel& model) const;

    // history[l] holds (kernel-1) x in_channels, oldest step first.
    std::vector<std::vector<float>> history;
    std::vector<float> hidden;

private:
    friend float pvad_step(PvadState&, std::span<const float>, const SpeakerEmbedding&, const PvadModel&);
    std::vector<std::vector<float>> scratch_;
};

/// One 10 ms step: consumes one log-mel row, returns the probability that the
/// enrolled speaker is talking. Throws std::invalid_argument naming the
/// mismatched axis (features, embedding, state).
float pvad_step(PvadState& state, std::span<const float> features, const SpeakerEmbedding& embedding,
                const PvadModel& model);

/// Steps a fresh state over every row.
std::vector<float> pvad_run(const audio::FeatureChunk& features, const SpeakerEmbedding& embedding,
                            const PvadModel& model);

}  // namespace duplex::pvad
