#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duplex/audio/frame.hpp"
#include "duplex/eot/backend.hpp"

namespace duplex::eot {

struct EotExample {
    std::string text;
    EotLabel label = EotLabel::finished;
    audio::Language language = audio::Language::en;

    friend bool operator==(const EotExample&, const EotExample&) = default;
};

/// Chinese when the text contains any CJK ideograph, English otherwise.
audio::Language detect_language(std::string_view text);

struct CorpusBuild {
    std::vector<EotExample> examples;
    std::size_t skipped = 0;  // utterances with fewer than two content tokens
};

/// One Finished example per source plus `spans_per_utterance` Unfinished
/// prefixes, sampled with replacement at token boundaries (whitespace tokens
/// for English, code points for Chinese). A prefix always leaves at least one
/// non-punctuation token out, and is an exact leading substring of the source.
CorpusBuild build_eot_corpus(std::span<const std::string> full_utterances, std::size_t spans_per_utterance,
                             std::uint64_t seed);

/// JSONL rows {"text", "label", "lang"}.
std::vector<EotExample> read_eot_jsonl(std::istream& in);
std::vector<EotExample> read_eot_jsonl(const std::filesystem::path& path);
void write_eot_jsonl(std::ostream& out, std::span<const EotExample> examples);

/// Sentence-like English or Chinese utterances for corpus generation.
std::vector<std::string> sample_utterances(std::size_t count, std::uint64_t seed, audio::Language language);

}  // namespace duplex::eot
