#include "reference_controller.hpp"

namespace duplex::oracle {

using turn::CommandKind;
using turn::EventKind;
using turn::TurnState;

bool ReferenceController::waiting() const {
    return state_ == TurnState::awaiting_eot || (state_ == TurnState::idle && pending());
}

bool ReferenceController::has_text() const {
    for (const auto& s : segs_) {
        if (s.transcribed && !s.empty) return true;
    }
    return false;
}

bool ReferenceController::all_transcribed() const {
    for (const auto& s : segs_) {
        if (!s.transcribed) return false;
    }
    return true;
}

RefStep ReferenceController::step(const RefEvent& ev) {
    RefStep r;
    const bool fresh = ev.freshness == Freshness::current;
    auto to = [&](TurnState s) {
        state_ = s;
        r.commands.push_back(CommandKind::emit_state_change);
    };
    auto start = [&] {
        if (!has_text()) {
            segs_.clear();
            complete_ = false;
            r.dropped = true;
            to(TurnState::idle);
            return;
        }
        complete_ = true;
        active_ = true;
        r.commands.push_back(CommandKind::start_pipeline);
        to(TurnState::thinking);
    };
    const bool speaking_states = state_ == TurnState::thinking || state_ == TurnState::agent_speaking;

    switch (ev.kind) {
        case EventKind::primary_onset:
            if (state_ == TurnState::idle || state_ == TurnState::awaiting_eot) {
                if (complete_) {
                    segs_.clear();
                    complete_ = false;
                }
                speaking_open_ = true;
                to(TurnState::user_speaking);
            } else if (speaking_states) {
                r.via_interrupted = true;
                if (state_ == TurnState::agent_speaking) r.commands.push_back(CommandKind::halt_playback);
                r.commands.push_back(CommandKind::cancel_pipeline);
                active_ = false;
                segs_.clear();
                complete_ = false;
                speaking_open_ = true;
                to(TurnState::user_speaking);
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::primary_offset:
            if (state_ == TurnState::user_speaking && speaking_open_) {
                speaking_open_ = false;
                segs_.push_back({});
                r.commands.push_back(CommandKind::transcribe_segment);
                to(TurnState::awaiting_eot);
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::partial_transcript: {
            // A current transcript fills the oldest open slot of the live turn.
            Seg* slot = nullptr;
            if (fresh && !complete_) {
                for (auto& s : segs_) {
                    if (!s.transcribed) {
                        slot = &s;
                        break;
                    }
                }
            }
            if (!slot) {
                r.ignored = true;
                break;
            }
            const bool was_waiting = waiting();
            slot->transcribed = true;
            slot->empty = ev.empty_text;
            if (was_waiting && all_transcribed() && has_text()) r.commands.push_back(CommandKind::request_eot);
            break;
        }
        case EventKind::eot_finished:
            if (fresh && waiting()) {
                start();
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::silence_timeout:
            if (waiting()) {
                start();
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::eot_unfinished:
            if (fresh && state_ == TurnState::awaiting_eot) {
                to(TurnState::idle);
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::agent_prompt:
            if (state_ == TurnState::idle && !pending()) {
                segs_.clear();
                complete_ = false;
                active_ = true;
                r.commands.push_back(CommandKind::start_pipeline);
                to(TurnState::thinking);
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::response_text_chunk:
            if (!(fresh && active_ && speaking_states)) r.ignored = true;
            break;
        case EventKind::tts_audio_chunk:
            if (fresh && active_ && speaking_states) {
                if (state_ == TurnState::thinking) to(TurnState::agent_speaking);
                r.commands.push_back(CommandKind::emit_audio);
            } else {
                r.ignored = true;
            }
            break;
        case EventKind::tts_done:
            if (fresh && active_ && speaking_states) {
                active_ = false;
                to(TurnState::idle);
            } else {
                r.ignored = true;
            }
            break;
    }
    r.after = state_;
    return r;
}

}  // namespace duplex::oracle
