#pragma once

// Random event sequences played against TurnController and the reference
// transition table in lockstep.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "duplex/turn/controller.hpp"

namespace duplex::oracle {

struct FuzzTrace {
    std::vector<std::string> lines;
    bool operator==(const FuzzTrace&) const = default;
};

struct FuzzResult {
    FuzzTrace trace;
    std::size_t mismatches = 0;
    std::string first_mismatch;
    /// EmitAudio issued while the user holds the floor.
    std::size_t unsafe_audio = 0;
    /// HaltPlayback issued on any event other than PrimaryOnset.
    std::size_t halt_without_onset = 0;
    /// PrimaryOnset during AgentSpeaking whose transition lacks HaltPlayback.
    std::size_t onset_without_halt = 0;
    /// CancelPipeline never followed by StartPipeline or a dropped turn.
    std::size_t orphaned_cancels = 0;
};

/// Plays `length` random events from `seed`, then drains the session so any
/// open turn reaches the pipeline.
FuzzResult fuzz_controller(std::uint64_t seed, std::size_t length);

}  // namespace duplex::oracle
