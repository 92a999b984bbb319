#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "duplex/pipeline/orchestrator.hpp"
#include "duplex/pvad/frame_vad.hpp"
#include "duplex/pvad/smoother.hpp"
#include "duplex/runtime/scheduler.hpp"
#include "duplex/sim/scenario.hpp"
#include "duplex/turn/session.hpp"

namespace duplex::sim {

inline constexpr int kTraceSchema = 1;

/// What a simulated session is measuring.
///   barge_in: the agent is speaking when the primary speaker starts.
///   primary_silent: the agent is speaking and the primary never speaks.
///   latency: the session starts idle and the primary speaks one turn.
enum class TrialKind { barge_in, primary_silent, latency };

std::string to_string(TrialKind kind);
/// Accepts "barge-in", "primary-silent" and "latency".
TrialKind trial_kind_from_string(const std::string& name);

/// Oracle detector: reports 1 for frames whose label has `mask` set.
class LabelTrackVad final : public pvad::FrameVad {
public:
    explicit LabelTrackVad(std::vector<std::uint8_t> labels, std::uint8_t mask = kPrimaryActive)
        : labels_(std::move(labels)), mask_(mask) {}

    float push(const audio::AudioFrame& frame) override;
    void reset() override {}
    std::string name() const override { return "oracle"; }

private:
    std::vector<std::uint8_t> labels_;
    std::uint8_t mask_;
};

using SessionFactory = std::function<std::unique_ptr<turn::Session>(
    Scheduler& scheduler, turn::SessionObserver observer, const Scenario& scenario, const Rendered& rendered,
    TrialKind kind)>;

struct DriveOptions {
    // Simulated time kept running after the last scenario frame.
    double after = 4.0;
    // Agent speech started at t = 0 for barge-in and primary-silent trials.
    // Empty: a prompt long enough to cover the whole trial.
    std::string agent_prompt;
};

struct Trace {
    std::vector<nlohmann::json> records;
    bool aborted = false;
    std::string error;

    /// One compact JSON object per line.
    std::string jsonl() const;
};

/// Feeds the rendered scenario frame by frame at 10 ms ticks in simulated
/// time and records the session's transitions between a header (ground
/// truth) and a footer. An exception from the session marks the trace
/// aborted.
Trace drive_session(const Scenario& scenario, TrialKind kind, const SessionFactory& factory,
                    const DriveOptions& options = {});

enum class VadKind { oracle, energy, reference, neural };
std::string to_string(VadKind kind);
/// Accepts "oracle", "energy", "reference-pvad" and "neural-pvad".
VadKind vad_kind_from_string(const std::string& name);

/// System under test for simulation: detector, smoothing, mock delays and
/// the EoT backend.
struct SimSystemConfig {
    VadKind vad = VadKind::oracle;
    pvad::SmoothingConfig smoothing{};
    pipeline::PipelineMode mode = pipeline::PipelineMode::cascaded;
    audio::Language language = audio::Language::en;
    double asr_delay = 0.0;
    double llm_first_token = 0.0;
    double llm_token_interval = 0.0;
    double tts_first_frame = 0.0;
    double tts_frame_interval = 0.0;
    std::string eot = "rule";
    double silence_timeout = 0.6;
    double eot_delay = 0.0;
    // Neural pVAD weights; a seeded random model when empty.
    std::string pvad_weights;
    // Personalized detectors are enrolled from a separate utterance of the
    // primary voice before the trial.
    bool preenroll = true;
    std::uint64_t enrollment_seed = 1000003;
    std::size_t primary_voice = 0;

    /// Throws std::invalid_argument naming the bad field.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static SimSystemConfig from_json(const nlohmann::json& j);
};

/// Sessions wired to deterministic mocks. The mock ASR returns the primary
/// transcript for any segment.
SessionFactory make_sim_factory(const SimSystemConfig& config);

}  // namespace duplex::sim
