#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "duplex/audio/frame.hpp"
#include "duplex/runtime/random.hpp"
#include "duplex/turn/controller.hpp"
#include "controller_fuzz.hpp"
#include "reference_controller.hpp"

using namespace duplex;
using turn::CommandKind;
using turn::ControllerEvent;
using turn::EventKind;
using turn::TurnController;
using turn::TurnState;

namespace {

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

std::size_t count_kind(const turn::Transition& t, CommandKind k) {
    return static_cast<std::size_t>(
        std::count_if(t.commands.begin(), t.commands.end(), [k](const auto& c) { return c.kind == k; }));
}

// Idle -> AgentSpeaking through an agent prompt and one audio chunk.
void to_agent_speaking(TurnController& c, double t) {
    c.handle(ev(EventKind::agent_prompt, t, 0, "hello there"));
    auto chunk = ev(EventKind::tts_audio_chunk, t, c.generation());
    chunk.frame = audio::AudioFrame{};
    c.handle(chunk);
    ASSERT_EQ(c.state(), TurnState::agent_speaking);
}

}  // namespace

TEST(Controller, BargeInDuringPlayback) {
    TurnController c;
    to_agent_speaking(c, 0.1);
    const auto t = c.handle(ev(EventKind::primary_onset, 0.5));
    EXPECT_EQ(t.before, TurnState::agent_speaking);
    EXPECT_EQ(t.after, TurnState::user_speaking);
    ASSERT_TRUE(t.via.has_value());
    EXPECT_EQ(*t.via, TurnState::interrupted);
    EXPECT_EQ(kinds(t), (std::vector{CommandKind::halt_playback, CommandKind::cancel_pipeline,
                                     CommandKind::emit_state_change}));
}

TEST(Controller, BargeInWhileThinkingOnlyCancels) {
    TurnController c;
    c.handle(ev(EventKind::agent_prompt, 0.1, 0, "hi"));
    ASSERT_EQ(c.state(), TurnState::thinking);
    const auto t = c.handle(ev(EventKind::primary_onset, 0.2));
    EXPECT_EQ(t.after, TurnState::user_speaking);
    EXPECT_EQ(kinds(t), (std::vector{CommandKind::cancel_pipeline, CommandKind::emit_state_change}));
}

TEST(Controller, StaleTtsDoneInIdleIsNoop) {
    TurnController c;
    const auto t = c.handle(ev(EventKind::tts_done, 0.0));
    EXPECT_TRUE(t.ignored);
    EXPECT_EQ(t.after, TurnState::idle);
    EXPECT_TRUE(t.commands.empty());
    EXPECT_EQ(c.ignored_events(), 1u);
}

TEST(Controller, ScriptedTurnWithUnfinishedPause) {
    TurnController c;
    std::size_t starts = 0;
    auto feed = [&](ControllerEvent e) {
        const auto t = c.handle(e);
        starts += count_kind(t, CommandKind::start_pipeline);
        return t;
    };
    feed(ev(EventKind::primary_onset, 0.0));
    auto t = feed(ev(EventKind::primary_offset, 1.0));
    ASSERT_EQ(t.commands.front().kind, CommandKind::transcribe_segment);
    const auto seg0 = t.commands.front().ref;
    t = feed(ev(EventKind::partial_transcript, 1.2, seg0, "book a table"));
    ASSERT_EQ(t.commands.size(), 1u);
    ASSERT_EQ(t.commands[0].kind, CommandKind::request_eot);
    EXPECT_EQ(t.commands[0].text, "book a table");
    feed(ev(EventKind::eot_unfinished, 1.3, c.revision()));
    EXPECT_EQ(c.state(), TurnState::idle);
    EXPECT_TRUE(c.turn_pending());

    feed(ev(EventKind::primary_onset, 1.5));
    t = feed(ev(EventKind::primary_offset, 2.5));
    const auto seg1 = t.commands.front().ref;
    EXPECT_NE(seg0, seg1);
    t = feed(ev(EventKind::partial_transcript, 2.7, seg1, "for two"));
    ASSERT_EQ(t.commands.size(), 1u);
    EXPECT_EQ(t.commands[0].text, "book a table for two");
    t = feed(ev(EventKind::eot_finished, 2.8, c.revision()));

    EXPECT_EQ(starts, 1u);
    EXPECT_EQ(c.state(), TurnState::thinking);
    ASSERT_EQ(c.transcript().segments.size(), 2u);
    EXPECT_TRUE(c.transcript().complete);
    const auto& start = t.commands.front();
    ASSERT_EQ(start.kind, CommandKind::start_pipeline);
    EXPECT_EQ(start.text, "book a table for two");
    ASSERT_EQ(start.segments.size(), 2u);
    EXPECT_DOUBLE_EQ(start.segments[0].start, 0.0);
    EXPECT_DOUBLE_EQ(start.segments[1].end, 2.5);
}

TEST(Controller, CompleteOnlyAfterFinished) {
    TurnController c;
    c.handle(ev(EventKind::primary_onset, 0.0));
    const auto id = c.handle(ev(EventKind::primary_offset, 1.0)).commands.front().ref;
    c.handle(ev(EventKind::partial_transcript, 1.1, id, "what time is it"));
    EXPECT_FALSE(c.transcript().complete);
    c.handle(ev(EventKind::eot_unfinished, 1.2, c.revision()));
    EXPECT_FALSE(c.transcript().complete);
    c.handle(ev(EventKind::eot_finished, 1.3, c.revision()));
    EXPECT_TRUE(c.transcript().complete);
}

TEST(Controller, StaleEotResultIgnored) {
    TurnController c;
    c.handle(ev(EventKind::primary_onset, 0.0));
    const auto id = c.handle(ev(EventKind::primary_offset, 1.0)).commands.front().ref;
    c.handle(ev(EventKind::partial_transcript, 1.1, id, "play some"));
    const auto old_rev = c.revision();
    c.handle(ev(EventKind::primary_onset, 1.2));
    const auto t = c.handle(ev(EventKind::eot_finished, 1.3, old_rev));
    EXPECT_TRUE(t.ignored);
    EXPECT_EQ(c.state(), TurnState::user_speaking);
}

TEST(Controller, EmptyTranscriptDropsTurn) {
    TurnController c;
    c.handle(ev(EventKind::primary_onset, 0.0));
    const auto id = c.handle(ev(EventKind::primary_offset, 1.0)).commands.front().ref;
    auto t = c.handle(ev(EventKind::partial_transcript, 1.1, id, ""));
    EXPECT_TRUE(t.commands.empty());
    t = c.handle(ev(EventKind::silence_timeout, 1.7));
    EXPECT_EQ(c.state(), TurnState::idle);
    EXPECT_FALSE(c.turn_pending());
    EXPECT_EQ(count_kind(t, CommandKind::start_pipeline), 0u);
}

TEST(Controller, SilenceTimeoutActsAsFinished) {
    TurnController c;
    c.handle(ev(EventKind::primary_onset, 0.0));
    const auto id = c.handle(ev(EventKind::primary_offset, 1.0)).commands.front().ref;
    c.handle(ev(EventKind::partial_transcript, 1.1, id, "tell me about"));
    const auto t = c.handle(ev(EventKind::silence_timeout, 1.6));
    EXPECT_EQ(t.after, TurnState::thinking);
    EXPECT_EQ(t.commands.front().kind, CommandKind::start_pipeline);
}

TEST(Controller, OutOfOrderEventNamesBothTimes) {
    TurnController c;
    c.handle(ev(EventKind::primary_onset, 2.0));
    try {
        c.handle(ev(EventKind::primary_offset, 1.5));
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("1.500"), std::string::npos) << msg;
        EXPECT_NE(msg.find("2.000"), std::string::npos) << msg;
    }
}

TEST(Controller, StateNamesRoundTrip) {
    for (auto s : {TurnState::idle, TurnState::user_speaking, TurnState::awaiting_eot, TurnState::thinking,
                   TurnState::agent_speaking, TurnState::interrupted}) {
        EXPECT_EQ(turn::turn_state_from_string(turn::to_string(s)), s);
    }
    EXPECT_EQ(turn::to_string(TurnState::awaiting_eot), "AwaitingEoT");
    EXPECT_THROW(turn::turn_state_from_string("Sleeping"), std::invalid_argument);
}


TEST(Controller, RandomSequencesMatchReferenceTable) {
    std::size_t mismatching_runs = 0;
    std::string first;
    std::size_t unsafe = 0, bad_halt = 0, missing_halt = 0, orphans = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto r = oracle::fuzz_controller(seed, 60);
        if (r.mismatches) {
            if (mismatching_runs++ == 0) first = "seed " + std::to_string(seed) + ": " + r.first_mismatch;
        }
        unsafe += r.unsafe_audio;
        bad_halt += r.halt_without_onset;
        missing_halt += r.onset_without_halt;
        orphans += r.orphaned_cancels;
    }
    EXPECT_EQ(mismatching_runs, 0u) << first;
    EXPECT_EQ(unsafe, 0u) << "EmitAudio in UserSpeaking/Interrupted";
    EXPECT_EQ(bad_halt, 0u) << "HaltPlayback outside a PrimaryOnset tick";
    EXPECT_EQ(missing_halt, 0u) << "PrimaryOnset during AgentSpeaking without HaltPlayback";
    EXPECT_EQ(orphans, 0u) << "CancelPipeline never followed by StartPipeline";
}

TEST(Controller, Deterministic) {
    for (std::uint64_t seed : {1u, 77u, 4242u}) {
        EXPECT_EQ(oracle::fuzz_controller(seed, 200).trace, oracle::fuzz_controller(seed, 200).trace);
    }
}

namespace {

std::vector<audio::AudioFrame> recording(std::int64_t first, std::int64_t count) {
    std::vector<audio::AudioFrame> frames(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        auto& f = frames[static_cast<std::size_t>(i)];
        f.index = first + i;
        for (std::size_t k = 0; k < audio::kFrameSamples; ++k) {
            f.samples[k] = float(double((first + i) * std::int64_t(audio::kFrameSamples) + std::int64_t(k)) * 1e-6);
        }
    }
    return frames;
}

}  // namespace

TEST(ExtractSegment, IndexArithmetic) {
    const auto rec = recording(0, 300);
    const auto out = turn::extract_segment(rec, {0.5, 1.8});
    ASSERT_EQ(out.size(), 130u);
    EXPECT_EQ(out.front().index, 50);
    EXPECT_EQ(out.back().index, 179);
    // Samples 8000 .. 28800 (exclusive).
    EXPECT_FLOAT_EQ(out.front().samples[0], float(8000 * 1e-6));
    EXPECT_FLOAT_EQ(out.back().samples[159], float(28799 * 1e-6));
}

TEST(ExtractSegment, Rejections) {
    const auto rec = recording(100, 100);
    EXPECT_THROW(turn::extract_segment(rec, {1.2, 1.2}), std::invalid_argument);
    EXPECT_THROW(turn::extract_segment(rec, {0.5, 1.5}), std::invalid_argument);
    EXPECT_THROW(turn::extract_segment(rec, {1.5, 2.5}), std::invalid_argument);
    EXPECT_NO_THROW(turn::extract_segment(rec, {1.0, 2.0}));
}

TEST(ExtractSegment, SubExtractionComposes) {
    const auto rec = recording(20, 500);
    SeededRng rng(5);
    for (int i = 0; i < 500; ++i) {
        const double a = 0.2 + rng.uniform(0.0, 4.9);
        const double b = std::min(5.2, a + rng.uniform(0.01, 2.0));
        const double c = rng.uniform(a, b);
        const double d = std::min(b, c + rng.uniform(0.01, 1.0));
        if (!(d > c)) continue;
        const auto outer = turn::extract_segment(rec, {a, b});
        if (outer.empty()) continue;
        const double lo = outer.front().start_time(), hi = outer.back().end_time();
        if (c < lo || d > hi) continue;
        const auto inner = turn::extract_segment(outer, {c, d});
        const auto direct = turn::extract_segment(rec, {c, d});
        ASSERT_EQ(inner.size(), direct.size());
        for (std::size_t k = 0; k < inner.size(); ++k) {
            ASSERT_EQ(inner[k].index, direct[k].index);
            ASSERT_EQ(inner[k].samples, direct[k].samples);
        }
    }
}

TEST(Watchdog, FiresOnceAfterTimeout) {
    bool fired = false;
    EXPECT_FALSE(turn::silence_watchdog(TurnState::awaiting_eot, true, 1.0, 1.5, 0.6, fired));
    const auto e = turn::silence_watchdog(TurnState::awaiting_eot, true, 1.0, 1.7, 0.6, fired);
    ASSERT_TRUE(e.has_value());
    EXPECT_EQ(e->kind, EventKind::silence_timeout);
    EXPECT_DOUBLE_EQ(e->time, 1.7);
    EXPECT_FALSE(turn::silence_watchdog(TurnState::awaiting_eot, true, 1.0, 1.8, 0.6, fired));
}

TEST(Watchdog, ExactThresholdOnGrid) {
    bool fired = false;
    // Frame-grid times differ from the decimal values by rounding noise.
    EXPECT_TRUE(turn::silence_watchdog(TurnState::awaiting_eot, true, audio::frame_time(10), audio::frame_time(70),
                                       0.6, fired));
}

TEST(Watchdog, WrongStateNeverFires) {
    bool fired = false;
    for (auto s : {TurnState::user_speaking, TurnState::thinking, TurnState::agent_speaking}) {
        EXPECT_FALSE(turn::silence_watchdog(s, true, 0.0, 100.0, 0.6, fired));
    }
    EXPECT_FALSE(turn::silence_watchdog(TurnState::idle, false, 0.0, 100.0, 0.6, fired));
    EXPECT_TRUE(turn::silence_watchdog(TurnState::idle, true, 0.0, 100.0, 0.6, fired));
}

TEST(Watchdog, RejectsNonPositiveTimeout) {
    bool fired = false;
    EXPECT_THROW(turn::silence_watchdog(TurnState::awaiting_eot, true, 0.0, 1.0, 0.0, fired), std::invalid_argument);
}
