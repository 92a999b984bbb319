#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "duplex/pipeline/components.hpp"
#include "duplex/pipeline/context.hpp"
#include "duplex/pipeline/tools.hpp"
#include "duplex/runtime/scheduler.hpp"

namespace duplex::pipeline {

enum class PipelineMode { cascaded, semi_cascaded };

std::string to_string(PipelineMode m);
PipelineMode pipeline_mode_from_string(const std::string& s);

struct PipelineComponents {
    std::shared_ptr<AsrComponent> asr;
    std::shared_ptr<TextLlmComponent> llm;
    std::shared_ptr<AudioLlmComponent> audio_llm;
    std::shared_ptr<TtsComponent> tts;
    std::shared_ptr<ToolExecutor> tools;
    ToolRegistry registry;
};

/// A completed user turn (or an agent prompt) ready for response generation.
struct TurnInput {
    std::uint64_t generation = 0;
    std::string text;
    // Original, non-denoised audio of each segment of the turn.
    std::vector<AudioSegment> segments;
    // Agent-initiated prompts produce a response without a user turn.
    bool agent_initiated = false;
};

struct PipelineEvents {
    std::function<void(const std::string& chunk)> on_text;
    std::function<void(const audio::AudioFrame& frame)> on_frame;
    std::function<void()> on_done;
    std::function<void(const std::string& error)> on_error;
    // Diagnostics such as "tool_timeout" or "tool_called".
    std::function<void(const std::string& name, const std::string& detail)> on_event;
};

/// One in-flight response generation. cancel() is synchronous: once it
/// returns no callback of this run fires again, and the dialogue context
/// has recorded the agent turn as interrupted.
class PipelineRun {
public:
    virtual ~PipelineRun() = default;
    virtual void cancel() = 0;
    virtual bool finished() const = 0;
    /// Response text produced so far.
    virtual const std::string& response_text() const = 0;
};

/// ASR final text -> dialogue manager (tools) -> text LLM -> TTS. Text is
/// handed to TTS chunk by chunk as the LLM streams. Returns nullptr (and
/// leaves the context alone) when the turn text is empty.
std::shared_ptr<PipelineRun> run_cascaded(Scheduler& scheduler, TurnInput turn, DialogueContext& context,
                                          const PipelineComponents& components, PipelineEvents events);

/// Dialogue manager (tools) -> AudioLLM over the user's audio -> TTS
/// conditioned on the same audio. The ASR component is not used.
std::shared_ptr<PipelineRun> run_semi_cascaded(Scheduler& scheduler, TurnInput turn, DialogueContext& context,
                                               const PipelineComponents& components, PipelineEvents events);

std::shared_ptr<PipelineRun> run_pipeline(PipelineMode mode, Scheduler& scheduler, TurnInput turn,
                                          DialogueContext& context, const PipelineComponents& components,
                                          PipelineEvents events);

}  // namespace duplex::pipeline
