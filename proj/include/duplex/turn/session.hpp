#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "duplex/audio/frame.hpp"
#include "duplex/eot/backend.hpp"
#include "duplex/pipeline/orchestrator.hpp"
#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/frame_vad.hpp"
#include "duplex/pvad/smoother.hpp"
#include "duplex/runtime/scheduler.hpp"
#include "duplex/turn/controller.hpp"

namespace duplex::turn {

/// Bounded store of the raw (non-denoised) capture.
class CaptureBuffer {
public:
    explicit CaptureBuffer(double seconds = 60.0);

    /// Frames must arrive contiguously. Throws std::invalid_argument on a gap.
    void append(const audio::AudioFrame& frame);
    std::vector<audio::AudioFrame> extract(const pvad::SpeechSegment& segment) const;

    std::size_t size() const { return frames_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::optional<std::int64_t> next_index() const;

private:
    std::deque<audio::AudioFrame> frames_;
    std::size_t capacity_;
};

struct SessionSettings {
    std::string session_id = "session";
    pipeline::PipelineMode mode = pipeline::PipelineMode::cascaded;
    audio::Language language = audio::Language::en;
    pvad::SmoothingConfig smoothing{};
    double silence_timeout = 0.6;
    // Delay applied before a local EoT backend's answer is delivered.
    double eot_delay = 0.0;
    double capture_seconds = 60.0;

    /// Throws std::invalid_argument naming the bad field.
    void validate() const;
};

struct SessionDeps {
    std::unique_ptr<pvad::FrameVad> vad;
    // Used for live enrollment when the VAD is personalized but not enrolled.
    std::shared_ptr<const pvad::SpeakerEncoder> encoder;
    std::shared_ptr<const eot::EotBackend> eot;
    pipeline::PipelineComponents components;
};

/// Outbound notifications. All run on the session's scheduler.
struct SessionObserver {
    std::function<void(const audio::AudioFrame& frame)> on_audio;
    std::function<void()> on_halt;
    std::function<void(TurnState state)> on_state;
    // Current turn transcript after each ASR result.
    std::function<void(const std::string& text)> on_transcript;
    std::function<void(const std::string& chunk)> on_response_text;
    std::function<void(const std::string& name, const std::string& detail)> on_event;
    // One trace record per controller transition or diagnostic event.
    std::function<void(const nlohmann::json& record)> on_trace;
};

struct SessionStats {
    std::size_t frames = 0;
    std::size_t onsets = 0;
    std::size_t halts = 0;
    std::size_t pipelines = 0;
    std::size_t audio_out = 0;
    std::size_t eot_failures = 0;
    std::size_t timeouts = 0;
};

/// One live conversation: VAD, turn controller, ASR/EoT dispatch, silence
/// watchdog, response pipeline and paced playout, all serialized on one
/// scheduler. Every method must be called on that scheduler's thread.
class Session {
public:
    Session(Scheduler& scheduler, SessionSettings settings, SessionDeps deps, SessionObserver observer = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Feeds one captured frame. Call at the frame's end time.
    void push_frame(const audio::AudioFrame& frame);
    /// Starts an agent-initiated response (simulation and demos).
    void agent_prompt(const std::string& text);
    /// Closes an open speech segment at end of input.
    void finish_input();

    TurnState state() const { return controller_.state(); }
    const TurnController& controller() const { return controller_; }
    const pipeline::DialogueContext& context() const { return context_; }
    const SessionStats& stats() const { return stats_; }
    const SessionSettings& settings() const { return settings_; }
    const pvad::FrameVad& vad() const { return *vad_; }

private:
    void dispatch(const ControllerEvent& event);
    void execute(const ControllerCommand& command);
    void trace_transition(const ControllerEvent& event, const Transition& t);
    void note(const std::string& name, const std::string& detail);

    void transcribe(const ControllerCommand& command);
    void request_eot(const ControllerCommand& command);
    void start_pipeline(const ControllerCommand& command);
    void cancel_pipeline();
    void maybe_enroll(const std::vector<pipeline::AudioSegment>& segments);

    void update_watchdog();
    void on_watchdog(std::uint64_t episode);

    void enqueue_playout(std::uint64_t generation, const audio::AudioFrame& frame);
    void schedule_release();
    void release();
    void flush_playout();
    void finish_generation(std::uint64_t generation);
    void maybe_post_done();

    Scheduler& scheduler_;
    SessionSettings settings_;
    std::unique_ptr<pvad::FrameVad> vad_;
    std::shared_ptr<const pvad::SpeakerEncoder> encoder_;
    std::shared_ptr<const eot::EotBackend> eot_;
    pipeline::PipelineComponents components_;
    SessionObserver observer_;

    pvad::SpeechSmoother smoother_;
    TurnController controller_;
    CaptureBuffer capture_;
    pipeline::DialogueContext context_;
    std::shared_ptr<Mailbox> mailbox_;
    CancelToken life_;
    SessionStats stats_;

    // Watchdog episode: bumps whenever waiting ends.
    std::uint64_t episode_ = 0;
    bool armed_ = false;
    bool fired_ = false;
    double reference_ = 0.0;

    // Events raised while a transition is executing wait here.
    std::deque<ControllerEvent> pending_;
    bool dispatching_ = false;

    std::shared_ptr<pipeline::PipelineRun> run_;
    std::uint64_t run_generation_ = 0;
    bool synth_done_ = false;
    bool done_posted_ = false;

    struct Queued {
        std::uint64_t generation;
        audio::AudioFrame frame;
    };
    std::deque<Queued> playout_;
    bool release_pending_ = false;
    double next_release_ = 0.0;
    std::uint64_t playout_epoch_ = 0;
};

}  // namespace duplex::turn
