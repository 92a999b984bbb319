#include "duplex/pvad/frame_vad.hpp"

#include <cmath>
#include <stdexcept>

namespace duplex::pvad {
namespace {

float sigmoid(double x) { return static_cast<float>(1.0 / (1.0 + std::exp(-x))); }

}  // namespace

EnergyVad::EnergyVad(EnergyVadConfig config, audio::MelConfig mel)
    : config_(config), mel_(mel), row_(mel.n_mels) {}

float EnergyVad::push(const audio::AudioFrame& frame) {
    mel_.push(frame, row_);
    return sigmoid((row_log_energy(row_) - config_.threshold) / config_.scale);
}

void EnergyVad::reset() { mel_.reset(); }

ReferencePvad::ReferencePvad(std::shared_ptr<const ReferenceSpeakerEncoder> encoder, ReferencePvadConfig config,
                             std::optional<SpeakerEmbedding> embedding)
    : encoder_(std::move(encoder)),
      config_(config),
      embedding_(std::move(embedding)),
      mel_(encoder_->mel_config()),
      row_(encoder_->mel_config().n_mels),
      frame_shape_(row_.size()),
      shape_(row_.size(), 0.0f) {}

float ReferencePvad::push(const audio::AudioFrame& frame) {
    mel_.push(frame, row_);
    const double energy = row_log_energy(row_);
    const double gate = sigmoid((energy - config_.energy.threshold) / config_.energy.scale);

    spectral_shape(row_, frame_shape_);
    // Only frames that pass the energy gate update the spectral shape, so
    // silence between words does not wash it out.
    const double a = primed_ ? config_.smoothing * gate : 1.0;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        shape_[i] = static_cast<float>((1.0 - a) * shape_[i] + a * frame_shape_[i]);
    }
    primed_ = true;
    if (!embedding_) return static_cast<float>(gate);

    last_similarity_ = cosine_similarity(encoder_->project(shape_), embedding_->values());
    const double speaker = sigmoid((last_similarity_ - config_.similarity_threshold) / config_.similarity_scale);
    return static_cast<float>(gate * speaker);
}

void ReferencePvad::reset() {
    mel_.reset();
    std::fill(shape_.begin(), shape_.end(), 0.0f);
    primed_ = false;
    last_similarity_ = 0.0;
}

NeuralPvad::NeuralPvad(std::shared_ptr<const PvadModel> model, std::optional<SpeakerEmbedding> embedding,
                       audio::MelConfig mel)
    : model_(std::move(model)),
      embedding_(std::move(embedding)),
      mel_(mel),
      state_(PvadState::for_model(*model_)),
      fallback_({}, mel),
      row_(mel.n_mels) {
    if (model_->n_mels() != mel.n_mels) {
        throw std::invalid_argument("neural pvad: model expects " + std::to_string(model_->n_mels()) +
                                    " mel bins, front end produces " + std::to_string(mel.n_mels));
    }
    if (embedding_ && embedding_->dim() != model_->embedding_dim) {
        throw std::invalid_argument("neural pvad: embedding dimension mismatch");
    }
}

void NeuralPvad::set_embedding(const SpeakerEmbedding& e) {
    if (e.dim() != model_->embedding_dim) throw std::invalid_argument("neural pvad: embedding dimension mismatch");
    embedding_ = e;
    state_.reset();
}

float NeuralPvad::push(const audio::AudioFrame& frame) {
    if (!embedding_) return fallback_.push(frame);
    mel_.push(frame, row_);
    return pvad_step(state_, row_, *embedding_, *model_);
}

void NeuralPvad::reset() {
    mel_.reset();
    state_.reset();
    fallback_.reset();
}

}  // namespace duplex::pvad
