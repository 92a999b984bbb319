#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the implementation paths it is used to check.

#include <cstddef>
#include <span>
#include <vector>

#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/model.hpp"

namespace duplex::oracle {

/// Log-mel rows computed offline: whole-signal framing with explicit zero
/// history, naive O(N^2) DFT, independently built HTK filterbank.
std::vector<std::vector<double>> offline_log_mel(std::span<const float> pcm, std::size_t n_mels = 80,
                                                 std::size_t window = 400, std::size_t hop = 160,
                                                 std::size_t n_fft = 512, double f_min = 20.0,
                                                 double f_max = 8000.0, double eps = 1e-10);

/// Whole-sequence pVAD evaluation: each conv layer is applied to the full
/// left-zero-padded sequence, then the GRU is unrolled. Shares no code with
/// the streaming implementation.
std::vector<double> pvad_batch_oracle(const std::vector<std::vector<double>>& features,
                                      const pvad::SpeakerEmbedding& embedding, const pvad::PvadModel& model);

}  // namespace duplex::oracle
