#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace duplex::pvad {

struct PvadDims {
    std::size_t n_mels = 80;
    std::vector<std::size_t> conv_channels{64, 64, 64};
    std::size_t kernel = 3;
    std::size_t embedding = 192;
    std::size_t hidden = 128;
};

/// 1-D convolution over time with left-only padding. weight is [out][in][k];
/// tap k multiplies the input k - (kernel - 1) steps from now, so tap
/// kernel - 1 is the current frame. Followed by ReLU.
struct CausalConv1d {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::vector<float> weight;
    std::vector<float> bias;

    float w(std::size_t o, std::size_t i, std::size_t k) const {
        return weight[(o * in_channels + i) * kernel + k];
    }
};

/// Single-layer GRU, PyTorch layout: gate blocks ordered (reset, update, new)
/// in weight_ih [3H x I], weight_hh [3H x H], bias_ih [3H], bias_hh [3H].
struct GruParams {
    std::size_t input = 0;
    std::size_t hidden = 0;
    std::vector<float> weight_ih;
    std::vector<float> weight_hh;
    std::vector<float> bias_ih;
    std::vector<float> bias_hh;
};

struct Affine {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<float> weight;  // [out x in]
    std::vector<float> bias;
};

/// mel -> causal conv stack -> concat(speaker embedding) -> GRU -> affine -> sigmoid.
struct PvadModel {
    std::vector<CausalConv1d> conv;
    std::size_t embedding_dim = 0;
    GruParams gru;
    Affine classifier;

    static PvadModel zeros(const PvadDims& dims = {});
    /// Weights uniform in [-scale/sqrt(fan_in), scale/sqrt(fan_in)].
    static PvadModel random(const PvadDims& dims, std::uint64_t seed, double scale = 1.0);

    std::size_t n_mels() const { return conv.empty() ? 0 : conv.front().in_channels; }
    std::size_t conv_out() const { return conv.empty() ? 0 : conv.back().out_channels; }

    /// Throws std::invalid_argument describing the first inconsistent tensor.
    void validate() const;
};

/// Weight file: "PVAD", u16 version, then tensors until EOF, each encoded as
/// u32 name length, name bytes, u32 rank, u32 dims[rank], float32 data. All
/// integers and floats little-endian.
inline constexpr std::uint16_t kWeightFormatVersion = 1;

void save_pvad(std::ostream& out, const PvadModel& model);
PvadModel load_pvad(std::istream& in);
void save_pvad(const std::filesystem::path& path, const PvadModel& model);
PvadModel load_pvad(const std::filesystem::path& path);

}  // namespace duplex::pvad
