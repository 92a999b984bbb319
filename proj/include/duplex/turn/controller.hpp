#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duplex/audio/frame.hpp"
#include "duplex/pvad/smoother.hpp"

namespace duplex::turn {

enum class TurnState { idle, user_speaking, awaiting_eot, thinking, agent_speaking, interrupted };

std::string to_string(TurnState s);
TurnState turn_state_from_string(std::string_view s);

enum class EventKind {
    primary_onset,
    primary_offset,
    partial_transcript,
    eot_finished,
    eot_unfinished,
    response_text_chunk,
    tts_audio_chunk,
    tts_done,
    silence_timeout,
    agent_prompt,
};

std::string to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

/// One input to the state machine. `time` is the processing tick; the other
/// fields are used by the kinds noted.
struct ControllerEvent {
    EventKind kind = EventKind::primary_onset;
    double time = 0.0;
    // primary_onset / primary_offset: boundary timestamp in the audio.
    double audio_time = 0.0;
    // partial_transcript: segment id. eot_*: transcript revision.
    // response_text_chunk / tts_*: generation id.
    std::uint64_t ref = 0;
    // partial_transcript, response_text_chunk, agent_prompt.
    std::string text;
    // tts_audio_chunk.
    std::optional<audio::AudioFrame> frame;
};

enum class CommandKind {
    halt_playback,
    start_pipeline,
    cancel_pipeline,
    emit_audio,
    emit_state_change,
    transcribe_segment,
    request_eot,
};

std::string to_string(CommandKind k);

struct ControllerCommand {
    CommandKind kind = CommandKind::emit_state_change;
    // start/cancel_pipeline, emit_audio: generation id. transcribe_segment:
    // segment id. request_eot: transcript revision.
    std::uint64_t ref = 0;
    // start_pipeline, request_eot: accumulated transcript or agent prompt.
    std::string text;
    // transcribe_segment: the segment. start_pipeline: all segments of the turn.
    std::vector<pvad::SpeechSegment> segments;
    // emit_state_change.
    TurnState state = TurnState::idle;
    std::optional<audio::AudioFrame> frame;
    // start_pipeline: true when started by agent_prompt rather than a user turn.
    bool agent_initiated = false;
};

struct TranscriptSegment {
    std::uint64_t id = 0;
    std::string text;
    pvad::SpeechSegment segment;
    bool transcribed = false;
};

/// The user turn being collected.
struct TurnTranscript {
    std::vector<TranscriptSegment> segments;
    bool complete = false;

    /// Transcribed segment texts joined with single spaces.
    std::string text() const;
    bool empty() const { return segments.empty(); }
    bool all_transcribed() const;
};

struct Transition {
    TurnState before = TurnState::idle;
    TurnState after = TurnState::idle;
    // Transient state passed through within the tick (barge-in).
    std::optional<TurnState> via;
    std::vector<ControllerCommand> commands;
    // True when the (state, event) pair had no effect.
    bool ignored = false;
};

/// The full-duplex turn-taking state machine. Pure: no clocks, no I/O. The
/// caller feeds events in nondecreasing time order and executes the returned
/// commands.
class TurnController {
public:
    Transition handle(const ControllerEvent& event);

    TurnState state() const { return state_; }
    const TurnTranscript& transcript() const { return turn_; }
    /// Revision of the transcript; bumps on every change to its text or shape.
    std::uint64_t revision() const { return revision_; }
    /// Generation id of the active or most recent pipeline.
    std::uint64_t generation() const { return generation_; }
    bool pipeline_active() const { return pipeline_active_; }
    /// A user turn is buffered but has not been handed to the pipeline.
    bool turn_pending() const { return !turn_.empty() && !turn_.complete; }
    std::size_t ignored_events() const { return ignored_; }
    double last_time() const { return last_time_; }
    /// Last user voice boundary (end of the most recent segment).
    double last_voice_time() const { return last_voice_; }

private:
    void start_new_turn_if_done();
    void go(Transition& t, TurnState s);
    void request_eot_if_ready(Transition& t);
    void start_pipeline(Transition& t);

    TurnState state_ = TurnState::idle;
    TurnTranscript turn_;
    std::uint64_t revision_ = 0;
    std::uint64_t generation_ = 0;
    bool pipeline_active_ = false;
    std::optional<double> open_segment_start_;
    std::uint64_t next_segment_id_ = 0;
    std::size_t ignored_ = 0;
    double last_time_ = 0.0;
    double last_voice_ = 0.0;
};

/// Frames whose start time lies in [segment.start, segment.end). Throws
/// std::invalid_argument on an empty segment or one outside the recording.
std::vector<audio::AudioFrame> extract_segment(std::span<const audio::AudioFrame> original,
                                               const pvad::SpeechSegment& segment);

/// Returns a silence_timeout event when the session is waiting on a user turn
/// (AwaitingEoT, or Idle with a buffered turn), has not fired in this episode,
/// and now - reference >= timeout. Sets `fired`.
std::optional<ControllerEvent> silence_watchdog(TurnState state, bool turn_pending, double reference_time, double now,
                                                double timeout, bool& fired);

}  // namespace duplex::turn
