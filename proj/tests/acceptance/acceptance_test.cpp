// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails. Run from the repository root.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "controller_fuzz.hpp"
#include "duplex/audio/mel.hpp"
#include "duplex/audio/mix.hpp"
#include "duplex/eot/backend.hpp"
#include "duplex/eot/corpus.hpp"
#include "duplex/eot/eval.hpp"
#include "duplex/metrics/metrics.hpp"
#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/model.hpp"
#include "duplex/pvad/streaming.hpp"
#include "duplex/runtime/random.hpp"
#include "duplex/sim/drive.hpp"
#include "duplex/sim/scenario.hpp"
#include "duplex/sim/synth.hpp"
#include "metric_oracles.hpp"
#include "oracles.hpp"

using namespace duplex;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fixed(double x, int digits) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << x;
    return os.str();
}

// Checks for one criterion; failures are collected, not thrown.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    Outcome done(const std::string& summary) const {
        if (failures_.empty()) return {true, summary};
        std::string d = summary;
        for (const auto& f : failures_) d += "; " + f;
        return {false, d};
    }

private:
    std::vector<std::string> failures_;
};

// Runs `fn(i)` for i in [0, n) on every core.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    const auto workers = std::max(1u, std::thread::hardware_concurrency());
    for (unsigned t = 0; t < workers; ++t) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

struct Simulated {
    std::vector<metrics::TrialTrace> traces;
    std::size_t aborted = 0;
};

Simulated simulate(const std::vector<sim::Scenario>& scenarios, const std::vector<sim::TrialKind>& kinds,
                   const sim::SimSystemConfig& config) {
    const auto factory = sim::make_sim_factory(config);
    const std::size_t n = scenarios.size() * kinds.size();
    std::vector<metrics::TrialTrace> traces(n);
    std::atomic<std::size_t> aborted{0};
    parallel_for(n, [&](std::size_t i) {
        const auto t = sim::drive_session(scenarios[i / kinds.size()], kinds[i % kinds.size()], factory);
        if (t.aborted) ++aborted;
        traces[i] = metrics::parse_trace(t.records);
    });
    return {std::move(traces), aborted.load()};
}

const std::vector<sim::Scenario>& corpus200() {
    static const auto scenarios = sim::make_scenarios(200, 20240);
    return scenarios;
}

Outcome snr_mixing() {
    SeededRng rng(1);
    Checks c;
    double worst = 0.0;
    std::size_t clipped = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t len = 1600 + rng.index(16000);
        const double s_amp = rng.uniform(0.01, 0.3);
        const double n_amp = rng.uniform(0.01, 0.3);
        std::vector<float> s(len), n(len);
        for (auto& x : s) x = float(rng.normal() * s_amp / 4.0);
        for (auto& x : n) x = float(rng.uniform(-n_amp, n_amp));
        const double target = rng.uniform(0.0, 30.0);
        const auto mix = audio::mix_at_snr(s, n, target);
        clipped += mix.clipped;
        double ps = 0.0, pn = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double r = double(mix.samples[k]) - double(s[k]);
            ps += double(s[k]) * double(s[k]);
            pn += r * r;
        }
        worst = std::max(worst, std::abs(10.0 * std::log10(ps / pn) - target));
    }
    c.expect(worst <= 0.1, "SNR error above 0.1 dB");
    return c.done("1000 mixes, max |measured - target| = " + fixed(worst, 4) + " dB, " + std::to_string(clipped) +
                  " clipped samples");
}

Outcome pvad_causal_streaming() {
    const auto model = pvad::PvadModel::random({}, 17, 1.5);
    pvad::ReferenceSpeakerEncoder encoder;
    const auto& voices = sim::builtin_voices();
    std::vector<double> worst(100, 0.0);
    std::vector<std::size_t> causal_breaks(100, 0);
    parallel_for(100, [&](std::size_t i) {
        const auto& voice = voices[i % voices.size()];
        const auto u = sim::synthesize(voice, sim::random_transcript(300 + i, 3 + i % 8), 400 + i);
        const auto emb = pvad::enroll(sim::synthesize(voice, sim::random_transcript(500 + i, 10), 600 + i).audio,
                                      encoder);
        const auto feats = audio::log_mel(u.audio);
        const auto stream = pvad::pvad_run(feats, emb, model);
        std::vector<std::vector<double>> rows;
        for (std::size_t r = 0; r < feats.rows(); ++r) rows.emplace_back(feats.row(r).begin(), feats.row(r).end());
        const auto batch = oracle::pvad_batch_oracle(rows, emb, model);
        for (std::size_t t = 0; t < stream.size(); ++t) {
            worst[i] = std::max(worst[i], std::abs(double(stream[t]) - batch[t]));
        }
        // Replace every frame after a random cut; outputs up to the cut must
        // not move.
        SeededRng rng(700 + i);
        const std::size_t cut = rng.index(u.audio.size() - 1);
        auto changed = u.audio;
        for (std::size_t k = cut + 1; k < changed.size(); ++k) {
            for (auto& x : changed[k].samples) x = float(rng.uniform(-0.5, 0.5));
        }
        const auto other = pvad::pvad_run(audio::log_mel(changed), emb, model);
        for (std::size_t t = 0; t <= cut; ++t) causal_breaks[i] += other[t] != stream[t];
    });
    const double max_diff = *std::max_element(worst.begin(), worst.end());
    std::size_t breaks = 0;
    for (auto b : causal_breaks) breaks += b;
    Checks c;
    c.expect(max_diff <= 1e-5, "stream/batch difference above 1e-5");
    c.expect(breaks == 0, "outputs changed before the cut");
    return c.done("100 utterances, max |stream - batch| = " + fixed(max_diff, 9) + ", " + std::to_string(breaks) +
                  " outputs changed by a later suffix");
}

Outcome controller_safety() {
    std::size_t diverged = 0, unsafe = 0, bad_halt = 0, missing_halt = 0;
    std::string first;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        const auto r = oracle::fuzz_controller(seed, 60);
        if (r.mismatches && diverged++ == 0) first = "seed " + std::to_string(seed) + ": " + r.first_mismatch;
        unsafe += r.unsafe_audio;
        bad_halt += r.halt_without_onset;
        missing_halt += r.onset_without_halt;
    }
    Checks c;
    c.expect(diverged == 0, "divergence, first at " + first);
    c.expect(unsafe == 0, "EmitAudio in UserSpeaking or Interrupted");
    c.expect(bad_halt == 0, "HaltPlayback outside a PrimaryOnset tick");
    c.expect(missing_halt == 0, "PrimaryOnset during AgentSpeaking without HaltPlayback");
    return c.done("10000 sequences: " + std::to_string(diverged) + " diverged, " + std::to_string(unsafe) +
                  " unsafe EmitAudio, " + std::to_string(missing_halt) + " onsets without a same-tick halt");
}

Outcome oracle_barge_in() {
    const auto run =
        simulate(corpus200(), {sim::TrialKind::barge_in, sim::TrialKind::primary_silent}, sim::SimSystemConfig{});
    const auto offsets = metrics::default_offsets_ms();
    const auto r = metrics::barge_in_metrics(run.traces, offsets);
    Checks c;
    c.expect(run.aborted == 0, std::to_string(run.aborted) + " aborted trials");
    c.expect(r.t90_ms && *r.t90_ms == 30, "T90 is not 30 ms");
    c.expect(r.false_barge_in_rate == 0.0, "false barge-in rate is not 0");
    return c.done("T90 = " + (r.t90_ms ? std::to_string(*r.t90_ms) + " ms" : std::string("not reached")) +
                  ", false barge-in rate = " + fixed(100.0 * r.false_barge_in_rate, 1) + "% over " +
                  std::to_string(r.barge_in_trials) + "+" + std::to_string(r.silent_trials) + " trials");
}

Outcome robustness_ordering() {
    const std::vector kinds{sim::TrialKind::barge_in, sim::TrialKind::primary_silent};
    sim::SimSystemConfig reference;
    reference.vad = sim::VadKind::reference;
    sim::SimSystemConfig energy;
    energy.vad = sim::VadKind::energy;
    const auto a = simulate(corpus200(), kinds, reference);
    const auto b = simulate(corpus200(), kinds, energy);
    const auto offsets = metrics::default_offsets_ms();
    const auto ra = metrics::barge_in_metrics(a.traces, offsets);
    const auto rb = metrics::barge_in_metrics(b.traces, offsets);
    Checks c;
    c.expect(a.aborted + b.aborted == 0, "aborted trials");
    c.expect(ra.false_barge_in_rate < rb.false_barge_in_rate, "reference backend is not strictly lower");
    auto t90 = [](const metrics::BargeInReport& r) {
        return r.t90_ms ? std::to_string(*r.t90_ms) + " ms" : std::string("not reached");
    };
    return c.done("false barge-in rate reference-pvad " + fixed(100.0 * ra.false_barge_in_rate, 1) +
                  "% vs energy " + fixed(100.0 * rb.false_barge_in_rate, 1) + "% (T90 " + t90(ra) + " vs " +
                  t90(rb) + ")");
}

std::vector<metrics::TrialTrace> parse_all(const std::vector<oracle::RawTrace>& raw) {
    std::vector<metrics::TrialTrace> out;
    for (const auto& t : raw) out.push_back(metrics::parse_trace(t));
    return out;
}

Outcome metric_equivalence() {
    Checks c;
    SeededRng rng(99);
    std::size_t barge_sets = 0, latency_sets = 0, mismatches = 0;
    for (int set = 0; set < 100; ++set) {
        std::vector<oracle::RawTrace> raw;
        const auto n = 5 + rng.index(60);
        for (std::size_t i = 0; i < n; ++i) raw.push_back(oracle::random_trace(rng));
        const auto traces = parse_all(raw);

        std::vector<int> offsets;
        for (int o = 0; o <= 600; o += 10) {
            if (rng.bernoulli(0.7)) offsets.push_back(o);
        }
        if (offsets.empty()) offsets.push_back(0);
        const auto want = oracle::brute_force_barge_in(raw, offsets);
        if (want.barge_in_trials && want.silent_trials) {
            ++barge_sets;
            const auto got = metrics::barge_in_metrics(traces, offsets);
            bool same = got.barge_in_trials == want.barge_in_trials && got.silent_trials == want.silent_trials &&
                        got.false_alarms == want.false_alarms && got.aborted == want.aborted &&
                        got.t90_ms == want.t90_ms &&
                        std::abs(got.false_barge_in_rate - want.false_rate) <= 1e-9 &&
                        got.accuracy_at_offset.size() == want.accuracy.size();
            for (const auto& [o, a] : got.accuracy_at_offset) {
                same = same && want.accuracy.count(o) && std::abs(a - want.accuracy.at(o)) <= 1e-9;
            }
            mismatches += !same;
        }

        const double cap = rng.uniform(1.0, 5.0);
        const auto [samples, timeouts] = oracle::brute_force_latencies(raw, cap);
        if (!samples.empty()) {
            ++latency_sets;
            const auto got = metrics::latency_metrics(traces, cap);
            bool same = got.samples.size() == samples.size() && got.timeouts == timeouts &&
                        std::abs(got.p50 - oracle::sort_and_index(samples, 50, 100)) <= 1e-9 &&
                        std::abs(got.p95 - oracle::sort_and_index(samples, 95, 100)) <= 1e-9;
            for (std::size_t i = 0; same && i < samples.size(); ++i) {
                same = std::abs(got.samples[i] - samples[i]) <= 1e-9;
            }
            mismatches += !same;
        }
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " sets differ from brute force");
    c.expect(barge_sets >= 90 && latency_sets >= 90, "too few comparable sets");

    std::size_t rank_errors = 0;
    for (std::size_t n = 1; n <= 1000; ++n) {
        std::vector<double> xs(n);
        for (auto& x : xs) x = rng.uniform(0.0, 5.0);
        auto sorted = xs;
        std::sort(sorted.begin(), sorted.end());
        for (std::uint64_t pct : {50, 90, 95}) {
            rank_errors += metrics::nearest_rank(sorted, double(pct) / 100.0) != oracle::sort_and_index(xs, pct, 100);
        }
    }
    c.expect(rank_errors == 0, std::to_string(rank_errors) + " nearest-rank mismatches");
    return c.done(std::to_string(barge_sets) + " barge-in and " + std::to_string(latency_sets) +
                  " latency sets match brute force; nearest rank exact for n = 1..1000");
}

Outcome eot_machinery() {
    Checks c;
    std::ifstream results("data/eot_reference_results.jsonl");
    std::ifstream tables("data/reference_tables.json");
    c.expect(bool(results) && bool(tables), "fixtures missing (run from the repository root)");
    if (!results || !tables) return c.done("");
    const auto scored = eot::score_results(eot::read_results_jsonl(results));
    const auto rows = metrics::report_from_json(json::parse(tables));
    const eot::EotAccuracy* table = nullptr;
    for (const auto& row : rows) {
        if (row.system == "FireRedChat" && row.eot && row.eot->count(audio::Language::zh)) {
            table = &row.eot->at(audio::Language::zh);
        }
    }
    c.expect(table != nullptr, "reference zh row missing");
    std::string zh;
    if (table && scored.count(audio::Language::zh)) {
        const auto& got = scored.at(audio::Language::zh);
        c.expect(std::abs(*got.finished_acc - *table->finished_acc) <= 1e-12 &&
                     std::abs(*got.unfinished_acc - *table->unfinished_acc) <= 1e-12 &&
                     std::abs(*got.average_acc - *table->average_acc) <= 1e-12,
                 "zh accuracies differ from the table");
        zh = fixed(100.0 * *got.finished_acc, 1) + "/" + fixed(100.0 * *got.unfinished_acc, 1) + " -> " +
             fixed(100.0 * *got.average_acc, 1);
    }

    const auto smoke = eot::read_eot_jsonl(std::filesystem::path("data/eot_smoke_en.jsonl"));
    eot::RuleEotBackend rule;
    std::size_t correct = 0;
    for (const auto& e : smoke) correct += rule.decide(e.text).label == e.label;
    const double smoke_acc = smoke.empty() ? 0.0 : double(correct) / double(smoke.size());
    c.expect(smoke.size() == 60, "smoke corpus is not 60 items");
    c.expect(smoke_acc >= 0.90, "rule backend below 90% on the smoke corpus");

    auto src = eot::sample_utterances(5000, 11, audio::Language::en);
    const auto zh_src = eot::sample_utterances(5000, 12, audio::Language::zh);
    src.insert(src.end(), zh_src.begin(), zh_src.end());
    const auto a = eot::build_eot_corpus(src, 2, 99);
    const auto b = eot::build_eot_corpus(src, 2, 99);
    c.expect(a.examples == b.examples, "corpus build is not deterministic");
    std::size_t unsound = 0;
    std::string source;
    for (const auto& e : a.examples) {
        if (e.label == eot::EotLabel::finished) {
            source = e.text;
            continue;
        }
        unsound += !(e.text.size() < source.size() && source.compare(0, e.text.size(), e.text) == 0);
    }
    c.expect(unsound == 0, std::to_string(unsound) + " unfinished examples are not proper prefixes");
    return c.done("zh " + zh + "; rule backend " + fixed(100.0 * smoke_acc, 1) + "% on " +
                  std::to_string(smoke.size()) + " smoke items; " + std::to_string(src.size()) +
                  " utterances built deterministically, " + std::to_string(unsound) + " unsound prefixes");
}

std::vector<double> latencies(const sim::SimSystemConfig& config, std::size_t& aborted) {
    const auto scenarios = sim::make_scenarios(40, 777);
    const auto run = simulate(scenarios, {sim::TrialKind::latency}, config);
    aborted = run.aborted;
    return metrics::latency_metrics(run.traces).samples;
}

Outcome end_to_end_latency() {
    sim::SimSystemConfig config;
    config.smoothing.hangover_frames = 0;
    config.eot = "always-unfinished";
    config.silence_timeout = 0.6;
    config.asr_delay = 0.3;
    config.llm_first_token = 0.6;
    config.tts_first_frame = 0.2;
    const double expected = 0.3 + 0.6 + 0.2 + 0.6;
    std::size_t aborted = 0, aborted_zero = 0;
    const auto slow = latencies(config, aborted);

    config.asr_delay = config.llm_first_token = config.tts_first_frame = 0.0;
    const auto fast = latencies(config, aborted_zero);

    auto worst = [](const std::vector<double>& xs, double centre) {
        double w = 0.0;
        for (double x : xs) w = std::max(w, std::abs(x - centre));
        return w;
    };
    double overhead = 0.0;
    for (double x : fast) overhead = std::max(overhead, x - config.silence_timeout);
    const double slow_err = worst(slow, expected);
    Checks c;
    c.expect(aborted + aborted_zero == 0, "aborted trials");
    c.expect(slow.size() == 40 && fast.size() == 40, "trials without agent audio");
    c.expect(slow_err <= 0.05, "latency outside sum +/- 50 ms");
    c.expect(overhead <= 0.05, "zero-delay overhead above 50 ms");
    double mean = 0.0;
    for (double x : slow) mean += x / double(slow.size());
    return c.done("mean " + fixed(mean, 3) + " s vs sum " + fixed(expected, 3) + " s (max error " +
                  fixed(1000.0 * slow_err, 1) + " ms); zero-delay overhead " + fixed(1000.0 * overhead, 1) + " ms");
}

struct Criterion {
    const char* name;
    Outcome (*run)();
    double budget_s;  // 0: no runtime bound
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"snr-mixing", snr_mixing, 10.0},
        {"pvad-causal-streaming", pvad_causal_streaming, 30.0},
        {"controller-safety", controller_safety, 0.0},
        {"oracle-barge-in", oracle_barge_in, 60.0},
        {"robustness-ordering", robustness_ordering, 0.0},
        {"metric-oracle-equivalence", metric_equivalence, 0.0},
        {"eot-machinery", eot_machinery, 0.0},
        {"end-to-end-latency", end_to_end_latency, 0.0},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = cr.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (cr.budget_s > 0.0 && secs >= cr.budget_s) {
            out.pass = false;
            out.detail += "; runtime over " + fixed(cr.budget_s, 0) + " s";
        }
        failed += !out.pass;
        std::printf("%s  %-26s %s [%.2f s]\n", out.pass ? "PASS" : "FAIL", cr.name, out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
    return failed ? 1 : 0;
}
