#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duplex/audio/frame.hpp"
#include "duplex/eot/backend.hpp"
#include "duplex/eot/corpus.hpp"

namespace duplex::eot {

/// One scored example: reference label and the backend's answer.
struct EotResult {
    EotLabel label = EotLabel::finished;
    EotLabel predicted = EotLabel::finished;
    audio::Language language = audio::Language::en;
};

struct EotAccuracy {
    std::size_t finished_total = 0;
    std::size_t finished_correct = 0;
    std::size_t unfinished_total = 0;
    std::size_t unfinished_correct = 0;
    // Undefined when the class has no examples.
    std::optional<double> finished_acc;
    std::optional<double> unfinished_acc;
    // Unweighted mean of the defined class accuracies.
    std::optional<double> average_acc;
    // Correct over all examples, regardless of class.
    std::optional<double> pooled_acc;
    std::vector<std::string> warnings;

    friend bool operator==(const EotAccuracy&, const EotAccuracy&) = default;
};

using EotReport = std::map<audio::Language, EotAccuracy>;

EotReport score_results(std::span<const EotResult> results);

/// Runs the backend over every example and scores per language. Throws
/// std::invalid_argument on an empty example list.
EotReport eot_eval(std::span<const EotExample> examples, const EotBackend& backend);

/// JSONL rows {"label", "predicted", "lang"}.
std::vector<EotResult> read_results_jsonl(std::istream& in);

}  // namespace duplex::eot
