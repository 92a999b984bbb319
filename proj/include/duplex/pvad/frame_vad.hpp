#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "duplex/audio/frame.hpp"
#include "duplex/audio/mel.hpp"
#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/model.hpp"
#include "duplex/pvad/streaming.hpp"

namespace duplex::pvad {

/// Per-frame speech probability source driving the session's smoother. Each
/// instance owns its streaming state and serves one stream.
class FrameVad {
public:
    virtual ~FrameVad() = default;

    virtual float push(const audio::AudioFrame& frame) = 0;
    virtual void reset() = 0;
    virtual std::string name() const = 0;

    /// Personalized backends accept an enrollment embedding; before one is set
    /// they behave like a plain energy detector.
    virtual bool personalized() const { return false; }
    virtual bool enrolled() const { return true; }
    virtual void set_embedding(const SpeakerEmbedding&) {}
};

struct EnergyVadConfig {
    // Natural-log mean mel energy. With the default front end a voice at 0.1
    // RMS averages about -3, digital silence log(1e-10).
    double threshold = -7.0;
    double scale = 0.5;
};

/// Speaker-agnostic baseline: sigmoid of frame log energy.
class EnergyVad final : public FrameVad {
public:
    explicit EnergyVad(EnergyVadConfig config = {}, audio::MelConfig mel = {});

    float push(const audio::AudioFrame& frame) override;
    void reset() override;
    std::string name() const override { return "energy"; }

private:
    EnergyVadConfig config_;
    audio::LogMelExtractor mel_;
    std::vector<float> row_;
};

struct ReferencePvadConfig {
    EnergyVadConfig energy{};
    // EMA factor over spectral-shape rows (about 80 ms memory).
    double smoothing = 0.12;
    double similarity_threshold = 0.3;
    double similarity_scale = 0.08;
};

/// Heuristic personalized detector: energy gate times a speaker-similarity
/// gate (cosine between the projected running spectral shape and the
/// enrollment embedding).
class ReferencePvad final : public FrameVad {
public:
    explicit ReferencePvad(std::shared_ptr<const ReferenceSpeakerEncoder> encoder,
                           ReferencePvadConfig config = {},
                           std::optional<SpeakerEmbedding> embedding = std::nullopt);

    float push(const audio::AudioFrame& frame) override;
    void reset() override;
    std::string name() const override { return "reference-pvad"; }
    bool personalized() const override { return true; }
    bool enrolled() const override { return embedding_.has_value(); }
    void set_embedding(const SpeakerEmbedding& e) override { embedding_ = e; }

    /// Last computed similarity, for diagnostics.
    double last_similarity() const { return last_similarity_; }

private:
    std::shared_ptr<const ReferenceSpeakerEncoder> encoder_;
    ReferencePvadConfig config_;
    std::optional<SpeakerEmbedding> embedding_;
    audio::LogMelExtractor mel_;
    std::vector<float> row_;
    std::vector<float> frame_shape_;
    std::vector<float> shape_;
    bool primed_ = false;
    double last_similarity_ = 0.0;
};

/// The streaming neural pVAD behind the FrameVad interface. Until an
/// embedding is set it defers to an energy detector.
class NeuralPvad final : public FrameVad {
public:
    NeuralPvad(std::shared_ptr<const PvadModel> model, std::optional<SpeakerEmbedding> embedding = std::nullopt,
               audio::MelConfig mel = {});

    float push(const audio::AudioFrame& frame) override;
    void reset() override;
    std::string name() const override { return "neural-pvad"; }
    bool personalized() const override { return true; }
    bool enrolled() const override { return embedding_.has_value(); }
    void set_embedding(const SpeakerEmbedding& e) override;

private:
    std::shared_ptr<const PvadModel> model_;
    std::optional<SpeakerEmbedding> embedding_;
    audio::LogMelExtractor mel_;
    PvadState state_;
    EnergyVad fallback_;
    std::vector<float> row_;
};

}  // namespace duplex::pvad
