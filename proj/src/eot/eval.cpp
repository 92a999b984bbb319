#include "duplex/eot/eval.hpp"

#include <istream>
#include <json.hpp>
#include <stdexcept>

#include "duplex/util/text.hpp"

namespace duplex::eot {

EotReport score_results(std::span<const EotResult> results) {
    EotReport report;
    for (const auto& r : results) {
        auto& acc = report[r.language];
        const bool ok = r.label == r.predicted;
        if (r.label == EotLabel::finished) {
            ++acc.finished_total;
            acc.finished_correct += ok;
        } else {
            ++acc.unfinished_total;
            acc.unfinished_correct += ok;
        }
    }
    for (auto& [lang, acc] : report) {
        double sum = 0.0;
        int defined = 0;
        if (acc.finished_total > 0) {
            acc.finished_acc = double(acc.finished_correct) / double(acc.finished_total);
            sum += *acc.finished_acc;
            ++defined;
        } else {
            acc.warnings.push_back(audio::to_string(lang) + ": no finished examples; accuracy undefined");
        }
        if (acc.unfinished_total > 0) {
            acc.unfinished_acc = double(acc.unfinished_correct) / double(acc.unfinished_total);
            sum += *acc.unfinished_acc;
            ++defined;
        } else {
            acc.warnings.push_back(audio::to_string(lang) + ": no unfinished examples; accuracy undefined");
        }
        if (defined > 0) acc.average_acc = sum / defined;
        const auto total = acc.finished_total + acc.unfinished_total;
        acc.pooled_acc = double(acc.finished_correct + acc.unfinished_correct) / double(total);
    }
    return report;
}

EotReport eot_eval(std::span<const EotExample> examples, const EotBackend& backend) {
    if (examples.empty()) throw std::invalid_argument("eot_eval: no examples");
    std::vector<EotResult> results;
    results.reserve(examples.size());
    for (const auto& e : examples) {
        results.push_back({e.label, eot_decide(e.text, backend).label, e.language});
    }
    return score_results(results);
}

std::vector<EotResult> read_results_jsonl(std::istream& in) {
    std::vector<EotResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line);
        out.push_back({label_from_string(j.at("label").get<std::string>()),
                       label_from_string(j.at("predicted").get<std::string>()),
                       audio::language_from_string(j.at("lang").get<std::string>())});
    }
    return out;
}

}  // namespace duplex::eot
