#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace duplex::pipeline {

enum class Role { user, agent, tool };

std::string to_string(Role r);

struct DialogueTurn {
    Role role = Role::user;
    std::string text;
    bool interrupted = false;

    friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

inline constexpr std::string_view kInterruptedMark = "(interrupted)";

struct DialogueContext {
    std::vector<DialogueTurn> turns;
    std::size_t max_turns = 20;

    void add(Role role, std::string text, bool interrupted = false);
};

/// Evicts whole exchanges oldest first until |turns| <= max_turns. An
/// exchange is a user turn plus the agent/tool turns that follow it, so the
/// result never starts with an orphaned agent or tool turn (unless the
/// history itself began that way).
DialogueContext trim_context(DialogueContext ctx);

}  // namespace duplex::pipeline
