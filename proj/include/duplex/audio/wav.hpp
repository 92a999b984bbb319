#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace duplex::audio {

/// Little-endian PCM16 <-> float in [-1, 1]. Encoding rounds and saturates.
std::vector<std::uint8_t> encode_pcm16(std::span<const float> samples);
std::vector<float> decode_pcm16(std::span<const std::uint8_t> bytes);
std::int16_t float_to_pcm16(float x);

/// Reads a 16 kHz mono PCM16 RIFF/WAVE file. Any other format is rejected with
/// std::runtime_error naming the offending field.
std::vector<float> read_wav(const std::filesystem::path& path);
std::vector<float> parse_wav(std::span<const std::uint8_t> bytes);

void write_wav(const std::filesystem::path& path, std::span<const float> samples);
std::vector<std::uint8_t> serialize_wav(std::span<const float> samples);

}  // namespace duplex::audio
