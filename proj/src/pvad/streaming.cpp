#include "duplex/pvad/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace duplex::pvad {
namespace {

float sigmoid(double x) { return static_cast<float>(1.0 / (1.0 + std::exp(-x))); }

}  // namespace

PvadState PvadState::for_model(const PvadModel& model) {
    model.validate();
    PvadState s;
    for (const auto& c : model.conv) {
        s.history.emplace_back((c.kernel - 1) * c.in_channels, 0.0f);
        s.scratch_.emplace_back(c.out_channels, 0.0f);
    }
    s.hidden.assign(model.gru.hidden, 0.0f);
    return s;
}

void PvadState::reset() {
    for (auto& h : history) std::fill(h.begin(), h.end(), 0.0f);
    std::fill(hidden.begin(), hidden.end(), 0.0f);
}

bool PvadState::matches(const PvadModel& model) const {
    if (history.size() != model.conv.size() || hidden.size() != model.gru.hidden) return false;
    for (std::size_t l = 0; l < history.size(); ++l) {
        const auto& c = model.conv[l];
        if (history[l].size() != (c.kernel - 1) * c.in_channels) return false;
    }
    return scratch_.size() == model.conv.size();
}

float pvad_step(PvadState& state, std::span<const float> features, const SpeakerEmbedding& embedding,
                const PvadModel& model) {
    if (features.size() != model.n_mels()) {
        throw std::invalid_argument("pvad_step: features axis has " + std::to_string(features.size()) +
                                    " bins, model expects " + std::to_string(model.n_mels()));
    }
    if (embedding.dim() != model.embedding_dim) {
        throw std::invalid_argument("pvad_step: embedding axis has " + std::to_string(embedding.dim()) +
                                    " dims, model expects " + std::to_string(model.embedding_dim));
    }
    if (!state.matches(model)) {
        throw std::invalid_argument("pvad_step: state axis does not match model dimensions");
    }

    std::span<const float> x = features;
    for (std::size_t l = 0; l < model.conv.size(); ++l) {
        const auto& c = model.conv[l];
        auto& hist = state.history[l];
        auto& y = state.scratch_[l];
        const std::size_t past = c.kernel - 1;
        for (std::size_t o = 0; o < c.out_channels; ++o) {
            double acc = c.bias[o];
            for (std::size_t k = 0; k < c.kernel; ++k) {
                const float* in = k < past ? hist.data() + k * c.in_channels : x.data();
                for (std::size_t i = 0; i < c.in_channels; ++i) acc += c.w(o, i, k) * in[i];
            }
            y[o] = static_cast<float>(std::max(acc, 0.0));
        }
        if (past > 0) {
            std::copy(hist.begin() + static_cast<std::ptrdiff_t>(c.in_channels), hist.end(), hist.begin());
            std::copy(x.begin(), x.end(), hist.end() - static_cast<std::ptrdiff_t>(c.in_channels));
        }
        x = y;
    }

    const auto& g = model.gru;
    const std::size_t H = g.hidden;
    const std::size_t conv_dim = x.size();
    auto input_at = [&](std::size_t j) -> float {
        return j < conv_dim ? x[j] : embedding.values()[j - conv_dim];
    };
    std::vector<double> gi(3 * H), gh(3 * H);
    for (std::size_t r = 0; r < 3 * H; ++r) {
        double a = g.bias_ih[r];
        const float* w = g.weight_ih.data() + r * g.input;
        for (std::size_t j = 0; j < g.input; ++j) a += w[j] * input_at(j);
        gi[r] = a;
        double b = g.bias_hh[r];
        const float* u = g.weight_hh.data() + r * H;
        for (std::size_t j = 0; j < H; ++j) b += u[j] * state.hidden[j];
        gh[r] = b;
    }
    for (std::size_t j = 0; j < H; ++j) {
        const double reset = 1.0 / (1.0 + std::exp(-(gi[j] + gh[j])));
        const double update = 1.0 / (1.0 + std::exp(-(gi[H + j] + gh[H + j])));
        const double cand = std::tanh(gi[2 * H + j] + reset * gh[2 * H + j]);
        state.hidden[j] = static_cast<float>((1.0 - update) * cand + update * state.hidden[j]);
    }

    double logit = model.classifier.bias[0];
    for (std::size_t j = 0; j < H; ++j) logit += model.classifier.weight[j] * state.hidden[j];
    return sigmoid(logit);
}

std::vector<float> pvad_run(const audio::FeatureChunk& features, const SpeakerEmbedding& embedding,
                            const PvadModel& model) {
    auto state = PvadState::for_model(model);
    std::vector<float> out;
    out.reserve(features.rows());
    for (std::size_t t = 0; t < features.rows(); ++t) {
        out.push_back(pvad_step(state, features.row(t), embedding, model));
    }
    return out;
}

}  // namespace duplex::pvad
