#include "duplex/turn/controller.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>

#include "duplex/eot/backend.hpp"

namespace duplex::turn {
namespace {

ControllerCommand command(CommandKind kind, std::uint64_t ref) {
    ControllerCommand c;
    c.kind = kind;
    c.ref = ref;
    return c;
}

constexpr std::array kStateNames{"Idle", "UserSpeaking", "AwaitingEoT", "Thinking", "AgentSpeaking", "Interrupted"};
constexpr std::array kEventNames{"PrimaryOnset",      "PrimaryOffset", "PartialTranscript", "EotFinished",
                                 "EotUnfinished",     "ResponseTextChunk", "TtsAudioChunk",  "TtsDone",
                                 "SilenceTimeout",    "AgentPrompt"};
constexpr std::array kCommandNames{"HaltPlayback",    "StartPipeline",      "CancelPipeline", "EmitAudio",
                                   "EmitStateChange", "TranscribeSegment", "RequestEot"};

std::string fmt_time(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f s", t);
    return buf;
}

}  // namespace

std::string to_string(TurnState s) { return kStateNames[static_cast<std::size_t>(s)]; }
std::string to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }
std::string to_string(CommandKind k) { return kCommandNames[static_cast<std::size_t>(k)]; }

TurnState turn_state_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kStateNames.size(); ++i) {
        if (s == kStateNames[i]) return static_cast<TurnState>(i);
    }
    throw std::invalid_argument("unknown turn state '" + std::string(s) + "'");
}

EventKind event_kind_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kEventNames.size(); ++i) {
        if (s == kEventNames[i]) return static_cast<EventKind>(i);
    }
    throw std::invalid_argument("unknown controller event '" + std::string(s) + "'");
}

std::string TurnTranscript::text() const {
    std::string out;
    for (const auto& s : segments) {
        if (s.transcribed) out = eot::join_transcripts(out, s.text);
    }
    return out;
}

bool TurnTranscript::all_transcribed() const {
    for (const auto& s : segments) {
        if (!s.transcribed) return false;
    }
    return true;
}

void TurnController::start_new_turn_if_done() {
    if (turn_.complete) turn_ = {};
}

void TurnController::go(Transition& t, TurnState s) {
    state_ = s;
    ControllerCommand c;
    c.kind = CommandKind::emit_state_change;
    c.state = s;
    t.commands.push_back(std::move(c));
}

void TurnController::request_eot_if_ready(Transition& t) {
    if (turn_.empty() || !turn_.all_transcribed()) return;
    const auto text = turn_.text();
    if (text.empty()) return;
    ControllerCommand c;
    c.kind = CommandKind::request_eot;
    c.ref = revision_;
    c.text = text;
    t.commands.push_back(std::move(c));
}

void TurnController::start_pipeline(Transition& t) {
    const auto text = turn_.text();
    if (text.empty()) {
        // Nothing intelligible was said; drop the turn.
        turn_ = {};
        ++revision_;
        go(t, TurnState::idle);
        return;
    }
    turn_.complete = true;
    ++generation_;
    pipeline_active_ = true;
    ControllerCommand c;
    c.kind = CommandKind::start_pipeline;
    c.ref = generation_;
    c.text = text;
    for (const auto& s : turn_.segments) c.segments.push_back(s.segment);
    t.commands.push_back(std::move(c));
    go(t, TurnState::thinking);
}

Transition TurnController::handle(const ControllerEvent& ev) {
    if (ev.time < last_time_) {
        throw std::invalid_argument("controller: event at " + fmt_time(ev.time) +
                                    " precedes last processed event at " + fmt_time(last_time_));
    }
    last_time_ = ev.time;

    Transition t;
    t.before = state_;
    const bool waiting = state_ == TurnState::awaiting_eot || (state_ == TurnState::idle && turn_pending());
    const bool current_gen = pipeline_active_ && ev.ref == generation_;

    switch (ev.kind) {
        case EventKind::primary_onset:
            if (state_ == TurnState::idle || state_ == TurnState::awaiting_eot) {
                start_new_turn_if_done();
                open_segment_start_ = ev.audio_time;
                ++revision_;
                go(t, TurnState::user_speaking);
            } else if (state_ == TurnState::agent_speaking || state_ == TurnState::thinking) {
                t.via = TurnState::interrupted;
                if (state_ == TurnState::agent_speaking) {
                    t.commands.push_back(command(CommandKind::halt_playback, generation_));
                }
                t.commands.push_back(command(CommandKind::cancel_pipeline, generation_));
                pipeline_active_ = false;
                turn_ = {};
                open_segment_start_ = ev.audio_time;
                ++revision_;
                go(t, TurnState::user_speaking);
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::primary_offset:
            if (state_ == TurnState::user_speaking && open_segment_start_) {
                TranscriptSegment seg;
                seg.id = next_segment_id_++;
                seg.segment = {*open_segment_start_, ev.audio_time};
                open_segment_start_.reset();
                turn_.segments.push_back(seg);
                last_voice_ = ev.audio_time;
                ++revision_;
                ControllerCommand c;
                c.kind = CommandKind::transcribe_segment;
                c.ref = seg.id;
                c.segments = {seg.segment};
                t.commands.push_back(std::move(c));
                go(t, TurnState::awaiting_eot);
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::partial_transcript: {
            // Results for segments of an abandoned turn find no slot.
            TranscriptSegment* slot = nullptr;
            if (!turn_.complete) {
                for (auto& s : turn_.segments) {
                    if (s.id == ev.ref && !s.transcribed) slot = &s;
                }
            }
            if (slot) {
                slot->text = ev.text;
                slot->transcribed = true;
                ++revision_;
                if (waiting) request_eot_if_ready(t);
            } else {
                t.ignored = true;
            }
            break;
        }

        case EventKind::eot_finished:
            if (waiting && ev.ref == revision_) {
                start_pipeline(t);
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::silence_timeout:
            if (waiting) {
                start_pipeline(t);
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::eot_unfinished:
            if (state_ == TurnState::awaiting_eot && ev.ref == revision_) {
                go(t, TurnState::idle);
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::agent_prompt:
            if (state_ == TurnState::idle && !turn_pending()) {
                turn_ = {};
                ++generation_;
                pipeline_active_ = true;
                ControllerCommand c;
                c.kind = CommandKind::start_pipeline;
                c.ref = generation_;
                c.text = ev.text;
                c.agent_initiated = true;
                t.commands.push_back(std::move(c));
                go(t, TurnState::thinking);
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::response_text_chunk:
            if (current_gen && (state_ == TurnState::thinking || state_ == TurnState::agent_speaking)) {
                // Caption only; no state change.
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::tts_audio_chunk:
            if (current_gen && (state_ == TurnState::thinking || state_ == TurnState::agent_speaking)) {
                if (state_ == TurnState::thinking) go(t, TurnState::agent_speaking);
                ControllerCommand c;
                c.kind = CommandKind::emit_audio;
                c.ref = generation_;
                c.frame = ev.frame;
                t.commands.push_back(std::move(c));
            } else {
                t.ignored = true;
            }
            break;

        case EventKind::tts_done:
            if (current_gen && (state_ == TurnState::thinking || state_ == TurnState::agent_speaking)) {
                pipeline_active_ = false;
                go(t, TurnState::idle);
            } else {
                t.ignored = true;
            }
            break;
    }

    if (t.ignored) ++ignored_;
    t.after = state_;
    return t;
}

std::vector<audio::AudioFrame> extract_segment(std::span<const audio::AudioFrame> original,
                                               const pvad::SpeechSegment& segment) {
    if (!(segment.end > segment.start)) {
        throw std::invalid_argument("extract_segment: empty segment [" + fmt_time(segment.start) + ", " +
                                    fmt_time(segment.end) + ")");
    }
    if (original.empty()) throw std::invalid_argument("extract_segment: no recorded audio");
    const double first = original.front().start_time();
    const double last = original.back().end_time();
    constexpr double eps = 1e-9;
    if (segment.start < first - eps || segment.end > last + eps) {
        throw std::invalid_argument("extract_segment: segment [" + fmt_time(segment.start) + ", " +
                                    fmt_time(segment.end) + ") outside recorded extent [" + fmt_time(first) + ", " +
                                    fmt_time(last) + ")");
    }
    const auto lo = audio::frame_index_at_or_after(segment.start);
    const auto hi = audio::frame_index_at_or_after(segment.end);
    const auto base = original.front().index;
    std::vector<audio::AudioFrame> out;
    for (auto k = lo; k < hi; ++k) out.push_back(original[static_cast<std::size_t>(k - base)]);
    return out;
}

std::optional<ControllerEvent> silence_watchdog(TurnState state, bool turn_pending, double reference_time, double now,
                                                double timeout, bool& fired) {
    if (!(timeout > 0.0)) throw std::invalid_argument("silence_watchdog: timeout must be positive");
    const bool waiting = state == TurnState::awaiting_eot || (state == TurnState::idle && turn_pending);
    if (!waiting || fired) return std::nullopt;
    // Tolerate float noise on grid-aligned times.
    if (now - reference_time + 1e-9 < timeout) return std::nullopt;
    fired = true;
    ControllerEvent ev;
    ev.kind = EventKind::silence_timeout;
    ev.time = now;
    return ev;
}

}  // namespace duplex::turn
