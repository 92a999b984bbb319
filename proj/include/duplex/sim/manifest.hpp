#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "duplex/sim/scenario.hpp"

namespace duplex::sim {

/// One manifest line. WAV paths are relative to the manifest's directory.
nlohmann::json scenario_to_json(const Scenario& s, const std::string& primary_wav, const std::string& noise_wav,
                                const std::string& interferer_wav);

/// Writes manifest.jsonl plus one WAV per clip under `dir`. Returns the
/// manifest path.
std::filesystem::path write_manifest(const std::filesystem::path& dir, const std::vector<Scenario>& scenarios);

/// Throws std::runtime_error naming the line on malformed input.
std::vector<Scenario> read_manifest(const std::filesystem::path& manifest);

}  // namespace duplex::sim
