#pragma once

// Table-driven reference for the turn controller. Events carry abstract
// freshness tags instead of ids, so the reference never tracks revisions or
// generations itself.

#include <cstddef>
#include <string>
#include <vector>

#include "duplex/turn/controller.hpp"

namespace duplex::oracle {

enum class Freshness { current, stale };

struct RefEvent {
    turn::EventKind kind = turn::EventKind::primary_onset;
    Freshness freshness = Freshness::current;
    // partial_transcript: whether the delivered text is empty.
    bool empty_text = false;
};

struct RefStep {
    turn::TurnState after = turn::TurnState::idle;
    bool via_interrupted = false;
    std::vector<turn::CommandKind> commands;
    bool ignored = false;
    // The turn was dropped because its transcript was empty.
    bool dropped = false;
};

class ReferenceController {
public:
    RefStep step(const RefEvent& ev);

    turn::TurnState state() const { return state_; }
    std::size_t segments() const { return segs_.size(); }
    bool pending() const { return !segs_.empty() && !complete_; }

private:
    struct Seg {
        bool transcribed = false;
        bool empty = false;
    };

    bool waiting() const;
    bool has_text() const;
    bool all_transcribed() const;

    turn::TurnState state_ = turn::TurnState::idle;
    std::vector<Seg> segs_;
    bool complete_ = false;
    bool speaking_open_ = false;
    bool active_ = false;
};

}  // namespace duplex::oracle
