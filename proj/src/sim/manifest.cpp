#include "duplex/sim/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include "duplex/audio/wav.hpp"

namespace duplex::sim {
namespace {

using nlohmann::json;

json interval_json(const std::optional<audio::Interval>& iv) {
    if (!iv) return nullptr;
    return json::array({iv->start, iv->end});
}

std::optional<audio::Interval> interval_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return audio::Interval{j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

json scenario_to_json(const Scenario& s, const std::string& primary_wav, const std::string& noise_wav,
                      const std::string& interferer_wav) {
    auto activity = json::array();
    for (const auto& iv : s.primary.activity) activity.push_back({iv.start, iv.end});
    const auto& gt = s.ground_truth;
    json j = {{"seed", s.seed},
              {"name", s.name},
              {"primary_wav", primary_wav},
              {"transcript", s.primary.transcript},
              {"language", audio::to_string(s.primary.language)},
              {"activity", activity},
              {"lead_in", s.lead_in},
              {"interferer_offset", s.interferer_offset},
              {"snr_noise_db", s.snr_noise_db},
              {"snr_interferer_db", s.snr_interferer_db},
              {"duration", s.duration},
              {"ground_truth",
               {{"primary_onset", gt.primary_onset},
                {"primary_end", gt.primary_end},
                {"interferer", interval_json(gt.interferer)},
                {"noise", interval_json(gt.noise)}}}};
    if (s.noise_present) {
        j["noise_wav"] = noise_wav;
        j["noise_name"] = s.noise_name;
    }
    if (!s.interferer.empty()) {
        j["interferer_wav"] = interferer_wav;
        j["interferer_name"] = s.interferer_name;
    }
    return j;
}

std::filesystem::path write_manifest(const std::filesystem::path& dir, const std::vector<Scenario>& scenarios) {
    std::filesystem::create_directories(dir / "wav");
    const auto path = dir / "manifest.jsonl";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& s : scenarios) {
        const std::string primary = "wav/" + s.name + ".primary.wav";
        const std::string noise = "wav/" + s.name + ".noise.wav";
        const std::string interferer = "wav/" + s.name + ".interferer.wav";
        audio::write_wav(dir / primary, audio::concat_samples(s.primary.audio));
        if (s.noise_present) audio::write_wav(dir / noise, s.noise);
        if (!s.interferer.empty()) audio::write_wav(dir / interferer, s.interferer);
        out << scenario_to_json(s, primary, noise, interferer).dump() << '\n';
    }
    return path;
}

std::vector<Scenario> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + manifest.string());
    const auto base = manifest.parent_path();
    std::vector<Scenario> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            Scenario s;
            s.seed = j.at("seed").get<std::uint64_t>();
            s.name = j.at("name").get<std::string>();
            s.primary.audio = audio::frame_stream(audio::read_wav(base / j.at("primary_wav").get<std::string>()),
                                                  audio::kSampleRate);
            s.primary.transcript = j.at("transcript").get<std::string>();
            s.primary.language = audio::language_from_string(j.at("language").get<std::string>());
            for (const auto& iv : j.at("activity")) s.primary.activity.push_back({iv.at(0), iv.at(1)});
            s.lead_in = j.at("lead_in").get<double>();
            s.interferer_offset = j.at("interferer_offset").get<double>();
            s.snr_noise_db = j.at("snr_noise_db").get<double>();
            s.snr_interferer_db = j.at("snr_interferer_db").get<double>();
            s.duration = j.at("duration").get<double>();
            const auto& gt = j.at("ground_truth");
            s.ground_truth.primary_onset = gt.at("primary_onset").get<double>();
            s.ground_truth.primary_end = gt.at("primary_end").get<double>();
            s.ground_truth.interferer = interval_from(gt.at("interferer"));
            s.ground_truth.noise = interval_from(gt.at("noise"));
            if (j.contains("noise_wav")) {
                s.noise_present = true;
                s.noise_name = j.value("noise_name", "");
                s.noise = audio::read_wav(base / j.at("noise_wav").get<std::string>());
            }
            if (j.contains("interferer_wav")) {
                s.interferer_name = j.value("interferer_name", "");
                s.interferer = audio::read_wav(base / j.at("interferer_wav").get<std::string>());
            }
            if (s.interferer_offset < -1.0 || s.interferer_offset > 1.0) {
                throw std::runtime_error("interferer_offset outside [-1, 1]");
            }
            if (s.noise_present != s.ground_truth.noise.has_value()) {
                throw std::runtime_error("noise_wav and ground_truth.noise disagree");
            }
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace duplex::sim
