#include "controller_fuzz.hpp"

#include <algorithm>
#include <sstream>

#include "duplex/audio/frame.hpp"
#include "duplex/runtime/random.hpp"
#include "reference_controller.hpp"

namespace duplex::oracle {
namespace {

using turn::CommandKind;
using turn::ControllerEvent;
using turn::EventKind;
using turn::TurnController;
using turn::TurnState;

ControllerEvent ev(EventKind kind, double time, std::uint64_t ref = 0, std::string text = {}) {
    ControllerEvent e;
    e.kind = kind;
    e.time = time;
    e.audio_time = time;
    e.ref = ref;
    e.text = std::move(text);
    return e;
}

std::vector<CommandKind> kinds(const turn::Transition& t) {
    std::vector<CommandKind> out;
    for (const auto& c : t.commands) out.push_back(c.kind);
    return out;
}


std::string describe(const turn::Transition& t) {
    std::ostringstream os;
    os << turn::to_string(t.before) << "->" << turn::to_string(t.after) << (t.via ? "!" : "") << ":";
    for (const auto& c : t.commands) os << ' ' << turn::to_string(c.kind) << '#' << c.ref;
    return os.str();
}

// Builds a concrete event for the controller and the abstract one for the
// reference from the same random draw.
struct Draw {
    ControllerEvent concrete;
    RefEvent abstract;
};

Draw draw_event(SeededRng& rng, const TurnController& c, double t) {
    static constexpr EventKind kinds[] = {
        EventKind::primary_onset,      EventKind::primary_offset, EventKind::partial_transcript,
        EventKind::eot_finished,       EventKind::eot_unfinished, EventKind::response_text_chunk,
        EventKind::tts_audio_chunk,    EventKind::tts_done,       EventKind::silence_timeout,
        EventKind::agent_prompt,
    };
    Draw d;
    d.concrete = ev(kinds[rng.index(std::size(kinds))], t);
    d.abstract.kind = d.concrete.kind;
    const bool stale = rng.bernoulli(0.2);
    d.abstract.freshness = stale ? Freshness::stale : Freshness::current;
    switch (d.concrete.kind) {
        case EventKind::partial_transcript: {
            std::optional<std::uint64_t> open;
            for (const auto& s : c.transcript().segments) {
                if (!s.transcribed) {
                    open = s.id;
                    break;
                }
            }
            // Ids never issued stand in for results of abandoned segments.
            if (stale || !open || c.transcript().complete) {
                d.concrete.ref = 1'000'000 + rng.index(1000);
                d.abstract.freshness = Freshness::stale;
            } else {
                d.concrete.ref = *open;
            }
            d.abstract.empty_text = rng.bernoulli(0.15);
            d.concrete.text = d.abstract.empty_text ? "" : "word";
            break;
        }
        case EventKind::eot_finished:
        case EventKind::eot_unfinished:
            d.concrete.ref = stale ? c.revision() + 1 + rng.index(3) : c.revision();
            break;
        case EventKind::response_text_chunk:
        case EventKind::tts_audio_chunk:
        case EventKind::tts_done:
            d.concrete.ref = stale ? c.generation() + 1 : c.generation();
            if (d.concrete.kind == EventKind::tts_audio_chunk) d.concrete.frame = audio::AudioFrame{};
            break;
        case EventKind::agent_prompt:
            d.concrete.text = "prompt";
            break;
        default:
            break;
    }
    return d;
}

}  // namespace

// Plays one random session against both machines, then drains it so that any
// open turn reaches the pipeline.
FuzzResult fuzz_controller(std::uint64_t seed, std::size_t length) {
    SeededRng rng(seed);
    TurnController c;
    ReferenceController ref;
    FuzzResult out;
    double t = 0.0;
    bool cancel_open = false;

    auto apply = [&](const ControllerEvent& ce, const RefEvent& re) {
        const auto got = c.handle(ce);
        const auto want = ref.step(re);
        out.trace.lines.push_back(describe(got));
        const bool same = got.after == want.after && got.via.has_value() == want.via_interrupted &&
                          kinds(got) == want.commands && got.ignored == want.ignored;
        if (!same) {
            if (out.mismatches++ == 0) {
                std::ostringstream os;
                os << "event " << turn::to_string(ce.kind) << " at step " << out.trace.lines.size() << ": got "
                   << describe(got) << " expected " << turn::to_string(want.after);
                for (auto k : want.commands) os << ' ' << turn::to_string(k);
                out.first_mismatch = os.str();
            }
        }
        for (const auto& cmd : got.commands) {
            if (cmd.kind == CommandKind::emit_audio &&
                (got.after == TurnState::user_speaking || got.after == TurnState::interrupted)) {
                ++out.unsafe_audio;
            }
            if (cmd.kind == CommandKind::halt_playback && ce.kind != EventKind::primary_onset) {
                ++out.halt_without_onset;
            }
            if (cmd.kind == CommandKind::cancel_pipeline) cancel_open = true;
            if (cmd.kind == CommandKind::start_pipeline) cancel_open = false;
        }
        if (ce.kind == EventKind::primary_onset && got.before == TurnState::agent_speaking &&
            std::none_of(got.commands.begin(), got.commands.end(),
                         [](const auto& cmd) { return cmd.kind == CommandKind::halt_playback; })) {
            ++out.onset_without_halt;
        }
        if (want.dropped) cancel_open = false;
    };

    for (std::size_t i = 0; i < length; ++i) {
        t += 0.01 * double(rng.index(50));
        const auto d = draw_event(rng, c, t);
        apply(d.concrete, d.abstract);
    }

    // Drain: close speech, transcribe everything, then let the watchdog fire.
    t += 0.01;
    if (c.state() == TurnState::user_speaking) {
        apply(ev(EventKind::primary_offset, t), {EventKind::primary_offset});
    }
    for (const auto& s : std::vector(c.transcript().segments)) {
        if (!s.transcribed && !c.transcript().complete) {
            apply(ev(EventKind::partial_transcript, t, s.id, "word"), {EventKind::partial_transcript});
        }
    }
    t += 1.0;
    apply(ev(EventKind::silence_timeout, t), {EventKind::silence_timeout});
    if (cancel_open) ++out.orphaned_cancels;
    return out;
}

}  // namespace duplex::oracle
