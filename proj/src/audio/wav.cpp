#include "duplex/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "duplex/audio/frame.hpp"

namespace duplex::audio {
namespace {

std::uint32_t rd32(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t rd16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

std::int16_t float_to_pcm16(float x) {
    const float c = std::clamp(x, -1.0f, 1.0f);
    return static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0f, -32768.0f, 32767.0f)));
}

std::vector<std::uint8_t> encode_pcm16(std::span<const float> samples) {
    std::vector<std::uint8_t> out;
    out.reserve(samples.size() * 2);
    for (float s : samples) put16(out, static_cast<std::uint16_t>(float_to_pcm16(s)));
    return out;
}

std::vector<float> decode_pcm16(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 2 != 0) throw std::invalid_argument("PCM16 payload has odd byte count");
    std::vector<float> out(bytes.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(static_cast<std::int16_t>(rd16(bytes, 2 * i))) / 32768.0f;
    }
    return out;
}

std::vector<float> parse_wav(std::span<const std::uint8_t> b) {
    if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
        std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
        throw std::runtime_error("wav: not a RIFF/WAVE file");
    }
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::uint32_t size = rd32(b, pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > b.size()) throw std::runtime_error("wav: truncated chunk");
        if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
            if (size < 16) throw std::runtime_error("wav: short fmt chunk");
            const auto format = rd16(b, body);
            const auto channels = rd16(b, body + 2);
            const auto rate = rd32(b, body + 4);
            const auto bits = rd16(b, body + 14);
            if (format != 1) throw std::runtime_error("wav: format " + std::to_string(format) + " is not PCM");
            if (channels != 1) throw std::runtime_error("wav: " + std::to_string(channels) + " channels, expected mono");
            if (rate != static_cast<std::uint32_t>(kSampleRate)) {
                throw std::runtime_error("wav: sample rate " + std::to_string(rate) + ", expected 16000");
            }
            if (bits != 16) throw std::runtime_error("wav: " + std::to_string(bits) + " bits per sample, expected 16");
            have_fmt = true;
        } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
            if (!have_fmt) throw std::runtime_error("wav: data chunk before fmt chunk");
            return decode_pcm16(b.subspan(body, size & ~1u));
        }
        pos = body + size + (size & 1u);
    }
    throw std::runtime_error("wav: no data chunk");
}

std::vector<float> read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("wav: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_wav(bytes);
}

std::vector<std::uint8_t> serialize_wav(std::span<const float> samples) {
    const auto pcm = encode_pcm16(samples);
    std::vector<std::uint8_t> out;
    out.reserve(44 + pcm.size());
    put_tag(out, "RIFF");
    put32(out, static_cast<std::uint32_t>(36 + pcm.size()));
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put32(out, 16);
    put16(out, 1);
    put16(out, 1);
    put32(out, kSampleRate);
    put32(out, kSampleRate * 2);
    put16(out, 2);
    put16(out, 16);
    put_tag(out, "data");
    put32(out, static_cast<std::uint32_t>(pcm.size()));
    out.insert(out.end(), pcm.begin(), pcm.end());
    return out;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples) {
    const auto bytes = serialize_wav(samples);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("wav: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace duplex::audio
