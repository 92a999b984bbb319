#include "duplex/pipeline/context.hpp"

namespace duplex::pipeline {

std::string to_string(Role r) {
    switch (r) {
        case Role::user: return "user";
        case Role::agent: return "agent";
        case Role::tool: return "tool";
    }
    return "?";
}

void DialogueContext::add(Role role, std::string text, bool interrupted) {
    turns.push_back({role, std::move(text), interrupted});
    *this = trim_context(std::move(*this));
}

DialogueContext trim_context(DialogueContext ctx) {
    if (ctx.turns.size() <= ctx.max_turns) return ctx;
    // Exchange boundaries: every user turn starts one.
    std::size_t drop = 0;
    while (ctx.turns.size() - drop > ctx.max_turns) {
        std::size_t next = drop + 1;
        while (next < ctx.turns.size() && ctx.turns[next].role != Role::user) ++next;
        drop = next;
    }
    ctx.turns.erase(ctx.turns.begin(), ctx.turns.begin() + static_cast<std::ptrdiff_t>(drop));
    return ctx;
}

}  // namespace duplex::pipeline
