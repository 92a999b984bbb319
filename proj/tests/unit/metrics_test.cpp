#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "duplex/metrics/metrics.hpp"
#include "duplex/runtime/random.hpp"
#include "metric_oracles.hpp"

using namespace duplex;
using namespace duplex::metrics;
using nlohmann::json;
using oracle::random_trace;
using oracle::trace_footer;
using oracle::trace_header;
using oracle::trace_transition;

namespace {

// A barge-in trial whose first halt is `delay` after an onset of 1.0 (none
// when delay is empty).
oracle::RawTrace barge(std::optional<double> delay) {
    oracle::RawTrace t{trace_header("barge-in", 1.0, 2.0), trace_transition(0.5, {"EmitAudio"})};
    if (delay) t.push_back(trace_transition(1.0 + *delay, {"HaltPlayback", "CancelPipeline", "EmitStateChange"}));
    t.push_back(trace_footer());
    return t;
}

oracle::RawTrace silent(bool halt) {
    oracle::RawTrace t{trace_header("primary-silent", 1.0, 2.0, false)};
    if (halt) t.push_back(trace_transition(1.5, {"HaltPlayback"}));
    t.push_back(trace_footer());
    return t;
}

std::vector<TrialTrace> parse_all(const std::vector<oracle::RawTrace>& raw) {
    std::vector<TrialTrace> out;
    for (const auto& r : raw) out.push_back(parse_trace(r));
    return out;
}

}  // namespace

TEST(BargeIn, CurveFromTheDocumentedExampleGivesT90At150) {
    std::vector<oracle::RawTrace> raw;
    for (int i = 0; i < 62; ++i) raw.push_back(barge(0.0));
    for (int i = 0; i < 19; ++i) raw.push_back(barge(0.05));
    for (int i = 0; i < 7; ++i) raw.push_back(barge(0.10));
    for (int i = 0; i < 3; ++i) raw.push_back(barge(0.15));
    for (int i = 0; i < 9; ++i) raw.push_back(barge(std::nullopt));
    raw.push_back(silent(false));
    const std::vector<int> offsets{0, 50, 100, 150};
    const auto r = barge_in_metrics(parse_all(raw), offsets);
    EXPECT_DOUBLE_EQ(r.accuracy_at_offset.at(0), 0.62);
    EXPECT_DOUBLE_EQ(r.accuracy_at_offset.at(50), 0.81);
    EXPECT_DOUBLE_EQ(r.accuracy_at_offset.at(100), 0.88);
    EXPECT_DOUBLE_EQ(r.accuracy_at_offset.at(150), 0.91);
    ASSERT_TRUE(r.t90_ms);
    EXPECT_EQ(*r.t90_ms, 150);
    EXPECT_EQ(r.missed, 9u);
}

TEST(BargeIn, HaltsAtTheOnsetAreAlwaysOnTime) {
    std::vector<oracle::RawTrace> raw(20, barge(0.0));
    raw.push_back(silent(false));
    const auto r = barge_in_metrics(parse_all(raw), default_offsets_ms());
    for (const auto& [o, a] : r.accuracy_at_offset) EXPECT_EQ(a, 1.0) << o;
    EXPECT_EQ(r.t90_ms, 0);
    EXPECT_EQ(r.false_barge_in_rate, 0.0);
}

TEST(BargeIn, EarlyHaltsAreNotSuccessesAndSilentHaltsAreFalse) {
    std::vector<oracle::RawTrace> raw{barge(-0.2), barge(0.03), silent(true), silent(false), silent(false),
                                      silent(true)};
    const auto r = barge_in_metrics(parse_all(raw), std::vector<int>{30, 500});
    EXPECT_EQ(r.premature, 1u);
    EXPECT_EQ(r.accuracy_at_offset.at(500), 0.5);
    EXPECT_EQ(r.accuracy_at_offset.at(30), 0.5);
    EXPECT_FALSE(r.t90_ms);
    EXPECT_EQ(r.false_barge_in_rate, 0.5);
}

TEST(BargeIn, EmptyPartitionsAreRejectedByName) {
    const auto only_barge = parse_all({barge(0.0)});
    const auto only_silent = parse_all({silent(false)});
    try {
        barge_in_metrics(only_barge, default_offsets_ms());
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("primary-silent"), std::string::npos);
    }
    try {
        barge_in_metrics(only_silent, default_offsets_ms());
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("barge-in"), std::string::npos);
    }
}

TEST(BargeIn, MatchesBruteForceOnRandomTraceSets) {
    SeededRng rng(2024);
    int compared = 0;
    for (int set = 0; set < 100; ++set) {
        std::vector<oracle::RawTrace> raw;
        const auto n = 5 + rng.index(60);
        for (std::size_t i = 0; i < n; ++i) raw.push_back(random_trace(rng));
        std::vector<int> offsets;
        for (int o = 0; o <= 600; o += 10) {
            if (rng.bernoulli(0.7)) offsets.push_back(o);
        }
        if (offsets.empty()) offsets.push_back(0);
        const auto want = oracle::brute_force_barge_in(raw, offsets);
        const auto traces = parse_all(raw);
        if (want.barge_in_trials == 0 || want.silent_trials == 0) {
            EXPECT_THROW(barge_in_metrics(traces, offsets), std::invalid_argument);
            continue;
        }
        const auto got = barge_in_metrics(traces, offsets);
        ++compared;
        EXPECT_EQ(got.barge_in_trials, want.barge_in_trials);
        EXPECT_EQ(got.silent_trials, want.silent_trials);
        EXPECT_EQ(got.false_alarms, want.false_alarms);
        EXPECT_EQ(got.aborted, want.aborted);
        EXPECT_EQ(got.t90_ms, want.t90_ms);
        EXPECT_NEAR(got.false_barge_in_rate, want.false_rate, 1e-9);
        ASSERT_EQ(got.accuracy_at_offset.size(), want.accuracy.size());
        double prev = 0.0;
        for (const auto& [o, a] : got.accuracy_at_offset) {
            EXPECT_NEAR(a, want.accuracy.at(o), 1e-9) << "set " << set << " offset " << o;
            EXPECT_GE(a, prev);
            prev = a;
        }
    }
    EXPECT_GT(compared, 90);
}

TEST(Latency, NearestRankMatchesSortAndIndex) {
    SeededRng rng(7);
    for (std::size_t n = 1; n <= 1000; ++n) {
        std::vector<double> xs(n);
        for (auto& x : xs) x = rng.uniform(0.0, 5.0);
        auto sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        ASSERT_EQ(nearest_rank(sorted, 0.50), oracle::sort_and_index(xs, 50, 100)) << n;
        ASSERT_EQ(nearest_rank(sorted, 0.95), oracle::sort_and_index(xs, 95, 100)) << n;
        ASSERT_EQ(nearest_rank(sorted, 0.90), oracle::sort_and_index(xs, 90, 100)) << n;
    }
}

TEST(Latency, SingleSampleAndOneToHundred) {
    const std::vector<double> one{2.0};
    EXPECT_EQ(nearest_rank(one, 0.5), 2.0);
    EXPECT_EQ(nearest_rank(one, 0.95), 2.0);
    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    EXPECT_EQ(nearest_rank(hundred, 0.5), 50.0);
    EXPECT_EQ(nearest_rank(hundred, 0.95), 95.0);
    EXPECT_THROW(nearest_rank(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST(Latency, FirstAudioAfterInputEndAndTimeouts) {
    oracle::RawTrace ok{trace_header("latency", 1.0, 2.0), trace_transition(1.5, {"EmitAudio"}), trace_transition(3.7, {"EmitAudio"}),
                        trace_transition(3.71, {"EmitAudio"}), trace_footer()};
    oracle::RawTrace none{trace_header("latency", 1.0, 2.0), trace_footer()};
    oracle::RawTrace late{trace_header("latency", 1.0, 2.0), trace_transition(30.0, {"EmitAudio"}), trace_footer()};
    oracle::RawTrace broken{trace_header("latency", 1.0, 2.0), trace_footer(true)};
    const auto r = latency_metrics(parse_all({ok, none, late, broken}), 10.0);
    ASSERT_EQ(r.samples.size(), 1u);
    EXPECT_NEAR(r.samples[0], 1.7, 1e-12);
    EXPECT_EQ(r.timeouts, 2u);
    EXPECT_EQ(r.aborted, 1u);
    EXPECT_EQ(r.p50, r.samples[0]);
    EXPECT_THROW(latency_metrics(parse_all({none}), 10.0), std::invalid_argument);
}

TEST(Latency, MatchesBruteForceOnRandomTraceSets) {
    SeededRng rng(99);
    for (int set = 0; set < 100; ++set) {
        std::vector<oracle::RawTrace> raw;
        const auto n = 5 + rng.index(60);
        for (std::size_t i = 0; i < n; ++i) raw.push_back(random_trace(rng));
        const double cap = rng.uniform(1.0, 5.0);
        const auto [want, timeouts] = oracle::brute_force_latencies(raw, cap);
        const auto traces = parse_all(raw);
        if (want.empty()) {
            EXPECT_THROW(latency_metrics(traces, cap), std::invalid_argument);
            continue;
        }
        const auto got = latency_metrics(traces, cap);
        ASSERT_EQ(got.samples.size(), want.size());
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.samples[i], want[i], 1e-9);
        EXPECT_EQ(got.timeouts, timeouts);
        EXPECT_NEAR(got.p50, oracle::sort_and_index(want, 50, 100), 1e-9);
        EXPECT_NEAR(got.p95, oracle::sort_and_index(want, 95, 100), 1e-9);
        EXPECT_LE(got.p50, got.p95);
    }
}

TEST(Traces, MalformedTracesAreRejected) {
    EXPECT_THROW(parse_trace(std::vector<json>{}), std::runtime_error);
    EXPECT_THROW(parse_trace(std::vector<json>{trace_header("barge-in", 1, 2)}), std::runtime_error);
    auto bad = trace_header("barge-in", 1, 2);
    bad["schema"] = 7;
    EXPECT_THROW(parse_trace(std::vector<json>{bad, trace_footer()}), std::runtime_error);
    std::istringstream in("{\"type\":\"header\"\nnot json\n");
    EXPECT_THROW(parse_trace(in), std::runtime_error);
}

namespace {

std::vector<SystemReport> reference_rows() {
    std::ifstream in("data/reference_tables.json");
    EXPECT_TRUE(in) << "run from the repository root";
    return report_from_json(json::parse(in));
}

}  // namespace

TEST(Report, BargeInOnlyIsATwoColumnTable) {
    SystemReport row;
    row.system = "oracle";
    row.barge_in = BargeInReport{};
    row.barge_in->t90_ms = 30;
    row.barge_in->false_barge_in_rate = 0.0;
    const std::vector<SystemReport> rows{row};
    EXPECT_EQ(emit_report(rows, ReportFormat::text),
              "Barge-in\n"
              "System  T90 (ms)  False barge-in rate (%)\n"
              "oracle        30                      0.0\n");
    EXPECT_THROW(emit_report(std::vector<SystemReport>{SystemReport{"x", {}, {}, {}}}, ReportFormat::text),
                 std::invalid_argument);
}

TEST(Report, ReferenceTablesRenderInTheDocumentedShape) {
    const auto rows = reference_rows();
    ASSERT_EQ(rows.size(), 4u);
    const auto text = emit_report(rows, ReportFormat::text);
    EXPECT_EQ(text,
              "Barge-in\n"
              "System       T90 (ms)  False barge-in rate (%)\n"
              "LiveKit           140                     33.4\n"
              "Ten                90                     78.1\n"
              "FireRedChat       170                     10.2\n"
              "\n"
              "End-of-turn detection\n"
              "System       Language  Finished (%)  Unfinished (%)  Average (%)\n"
              "LiveKit            zh          92.6            45.3         70.8\n"
              "LiveKit            en          76.3            98.4         86.2\n"
              "Ten                zh          98.5            92.7         95.8\n"
              "Ten                en          91.1            98.4         94.4\n"
              "FireRedChat        zh          96.3            95.7         96.0\n"
              "FireRedChat        en          96.2            93.2         94.9\n"
              "\n"
              "Latency\n"
              "System       P50 (s)  P95 (s)\n"
              "LiveKit        3.598    4.649\n"
              "Ten            3.375    3.802\n"
              "DouBao         2.075    2.407\n"
              "FireRedChat    2.341    3.015\n");
    EXPECT_EQ(text, emit_report(rows, ReportFormat::text));
}

TEST(Report, JsonRoundTripsLosslessly) {
    SeededRng rng(5);
    std::vector<oracle::RawTrace> raw{barge(0.0), barge(0.12), silent(true), silent(false)};
    for (int i = 0; i < 40; ++i) raw.push_back(random_trace(rng));
    raw.push_back({trace_header("latency", 1.0, 2.0), trace_transition(3.3, {"EmitAudio"}), trace_footer()});
    const auto traces = parse_all(raw);
    SystemReport row;
    row.system = "sut";
    row.barge_in = barge_in_metrics(traces, default_offsets_ms());
    row.latency = latency_metrics(traces, 3.0);
    eot::EotResult r{eot::EotLabel::finished, eot::EotLabel::unfinished, audio::Language::en};
    row.eot = eot::score_results(std::vector<eot::EotResult>{r, r});
    auto rows = reference_rows();
    rows.push_back(row);
    const auto doc = emit_report(rows, ReportFormat::json);
    const auto back = report_from_json(json::parse(doc));
    EXPECT_EQ(back, rows);
    EXPECT_EQ(emit_report(back, ReportFormat::json), doc);
    auto wrong = json::parse(doc);
    wrong["schema"] = 2;
    EXPECT_THROW(report_from_json(wrong), std::runtime_error);
}
