#include "duplex/pvad/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "duplex/runtime/random.hpp"

namespace duplex::pvad {

SpeakerEmbedding SpeakerEmbedding::from_vector(std::vector<float> v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (sq == 0.0 || !std::isfinite(sq)) throw std::invalid_argument("embedding: zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
    SpeakerEmbedding e;
    e.v_ = std::move(v);
    return e;
}

double SpeakerEmbedding::norm() const {
    double sq = 0.0;
    for (float x : v_) sq += static_cast<double>(x) * x;
    return std::sqrt(sq);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

double cosine_similarity(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
    return cosine_similarity(a.values(), b.values());
}

void spectral_shape(std::span<const float> row, std::span<float> out) {
    constexpr std::ptrdiff_t half = 3;
    const auto n = static_cast<std::ptrdiff_t>(row.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        int count = 0;
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - half); j <= std::min(n - 1, i + half); ++j) {
            acc += row[static_cast<std::size_t>(j)];
            ++count;
        }
        out[static_cast<std::size_t>(i)] = static_cast<float>(row[static_cast<std::size_t>(i)] - acc / count);
    }
}

double row_log_energy(std::span<const float> row) {
    const float mx = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (float v : row) acc += std::exp(static_cast<double>(v) - mx);
    return mx + std::log(acc / static_cast<double>(row.size()));
}

ReferenceSpeakerEncoder::ReferenceSpeakerEncoder(std::uint64_t seed, audio::MelConfig mel)
    : mel_(mel), projection_(kEmbeddingDim * mel.n_mels) {
    SeededRng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(mel.n_mels));
    for (float& w : projection_) w = static_cast<float>(rng.uniform(-1.0, 1.0) * scale);
}

std::vector<float> ReferenceSpeakerEncoder::project(std::span<const float> shape) const {
    if (shape.size() != mel_.n_mels) throw std::invalid_argument("project: mel width mismatch");
    std::vector<float> out(kEmbeddingDim, 0.0f);
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        const float* w = projection_.data() + i * mel_.n_mels;
        double acc = 0.0;
        for (std::size_t j = 0; j < mel_.n_mels; ++j) acc += static_cast<double>(w[j]) * shape[j];
        out[i] = static_cast<float>(acc);
    }
    return out;
}

SpeakerEmbedding ReferenceSpeakerEncoder::encode(std::span<const audio::AudioFrame> frames) const {
    const auto mel = audio::log_mel(frames, mel_);
    const std::size_t n = mel.rows();
    std::vector<double> energy(n);
    double peak = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
        energy[i] = row_log_energy(mel.row(i));
        peak = std::max(peak, energy[i]);
    }
    // Voiced rows: within 30 dB of the loudest frame.
    const double floor = peak - std::log(1000.0);
    std::vector<double> mean(mel_.n_mels, 0.0);
    std::vector<float> shape(mel_.n_mels);
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (energy[i] < floor) continue;
        spectral_shape(mel.row(i), shape);
        for (std::size_t j = 0; j < mel_.n_mels; ++j) mean[j] += shape[j];
        ++used;
    }
    std::vector<float> avg(mel_.n_mels);
    for (std::size_t j = 0; j < mel_.n_mels; ++j) avg[j] = static_cast<float>(mean[j] / static_cast<double>(used));
    return SpeakerEmbedding::from_vector(project(avg));
}

SpeakerEmbedding enroll(std::span<const audio::AudioFrame> enrollment_audio, const SpeakerEncoder& encoder) {
    const auto seconds = static_cast<double>(enrollment_audio.size()) * audio::kFrameSeconds;
    if (enrollment_audio.size() < 100) {
        throw std::invalid_argument("enrollment needs at least 1 s of audio, got " + std::to_string(seconds) + " s");
    }
    return encoder.encode(enrollment_audio);
}

}  // namespace duplex::pvad
