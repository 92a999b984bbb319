// duplexctl: serve the WebSocket gateway, run simulations and score them.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "duplex/eot/corpus.hpp"
#include "duplex/eot/eval.hpp"
#include "duplex/gateway/server.hpp"
#include "duplex/metrics/metrics.hpp"
#include "duplex/sim/drive.hpp"
#include "duplex/sim/manifest.hpp"
#include "duplex/sim/scenario.hpp"

namespace fs = std::filesystem;
using namespace duplex;
using nlohmann::json;

namespace {

// A bad argument or config file.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

metrics::ReportFormat parse_format(const std::string& s) {
    if (s == "text") return metrics::ReportFormat::text;
    if (s == "json") return metrics::ReportFormat::json;
    throw ConfigError("--format must be text or json");
}

void print_report(const metrics::SystemReport& row, const std::string& format) {
    const std::vector<metrics::SystemReport> rows{row};
    std::cout << metrics::emit_report(rows, parse_format(format));
}

std::vector<sim::TrialKind> parse_trials(const std::string& list) {
    std::vector<sim::TrialKind> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            out.push_back(sim::trial_kind_from_string(item));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--trials: ") + e.what());
        }
    }
    if (out.empty()) throw ConfigError("--trials must name at least one trial kind");
    return out;
}

// "start:stop:step" in milliseconds, inclusive.
std::vector<int> parse_offsets(const std::string& spec) {
    if (spec.empty()) return metrics::default_offsets_ms();
    int start = 0, stop = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(spec);
    if (!(in >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 || start < 0 ||
        stop < start) {
        throw ConfigError("--offsets must be start:stop:step with 0 <= start <= stop and step > 0");
    }
    std::vector<int> out;
    for (int o = start; o <= stop; o += step) out.push_back(o);
    return out;
}

int serve(const std::string& config_path, const std::string& bind) {
    gateway::ServerConfig config;
    try {
        config = gateway::ServerConfig::load(config_path);
        if (!bind.empty()) gateway::apply_bind(config, bind);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    gateway::Server server(config);
    const auto port = server.start();
    std::cerr << "listening on ws://" << config.host << ":" << port << "/\n";
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "stopping\n";
    server.stop();
    return 0;
}

int simulate(const std::string& manifest, const std::string& out_dir, const std::string& config_path,
             const std::string& trials, std::size_t jobs) {
    sim::SimSystemConfig config;
    if (!config_path.empty()) {
        try {
            config = sim::SimSystemConfig::from_json(read_json_file(config_path));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    const auto kinds = parse_trials(trials);
    const auto scenarios = sim::read_manifest(manifest);
    const auto factory = sim::make_sim_factory(config);

    struct Job {
        const sim::Scenario* scenario;
        sim::TrialKind kind;
    };
    std::vector<Job> work;
    for (const auto& s : scenarios) {
        for (auto k : kinds) work.push_back({&s, k});
    }
    for (auto k : kinds) fs::create_directories(fs::path(out_dir) / sim::to_string(k));

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> aborted{0};
    std::mutex error_mu;
    std::string error;
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            const auto& job = work[i];
            const auto trace = sim::drive_session(*job.scenario, job.kind, factory);
            if (trace.aborted) ++aborted;
            const auto path = fs::path(out_dir) / sim::to_string(job.kind) / (job.scenario->name + ".jsonl");
            std::ofstream out(path);
            out << trace.jsonl();
            if (!out) {
                std::lock_guard lock(error_mu);
                error = "cannot write " + path.string();
            }
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < std::max<std::size_t>(jobs, 1); ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (!error.empty()) throw std::runtime_error(error);
    std::cerr << work.size() << " trials written to " << out_dir << " (" << aborted << " aborted)\n";
    return 0;
}

int make_corpus(const std::string& kind, std::uint64_t seed, std::size_t count, const std::string& out,
                const std::string& language, std::size_t spans) {
    if (kind == "scenarios") {
        if (out.empty()) throw ConfigError("make-corpus --kind scenarios needs --out DIR");
        audio::Language lang;
        try {
            lang = audio::language_from_string(language == "both" ? "en" : language);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--language: ") + e.what());
        }
        const auto path = sim::write_manifest(out, sim::make_scenarios(count, seed, lang));
        std::cerr << count << " scenarios written to " << path.string() << "\n";
        return 0;
    }
    if (kind != "eot") throw ConfigError("--kind must be eot or scenarios");
    std::vector<audio::Language> languages;
    if (language == "both") {
        languages = {audio::Language::en, audio::Language::zh};
    } else {
        try {
            languages = {audio::language_from_string(language)};
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--language: ") + e.what());
        }
    }
    std::vector<eot::EotExample> examples;
    for (auto lang : languages) {
        const auto build = eot::build_eot_corpus(eot::sample_utterances(count, seed, lang), spans, seed);
        examples.insert(examples.end(), build.examples.begin(), build.examples.end());
    }
    if (out.empty()) {
        eot::write_eot_jsonl(std::cout, examples);
    } else {
        std::ofstream file(out);
        if (!file) throw std::runtime_error("cannot write " + out);
        eot::write_eot_jsonl(file, examples);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Full-duplex voice agent: gateway, simulation and evaluation"};
    app.require_subcommand(1);

    std::string config_path, bind;
    auto* serve_cmd = app.add_subcommand("serve", "Run the WebSocket gateway");
    serve_cmd->add_option("--config", config_path, "Server config JSON");
    serve_cmd->add_option("--bind", bind, "host:port, overrides the config and DUPLEX_BIND");

    std::string manifest, out_dir, sim_config, trials = "barge-in,primary-silent,latency";
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    auto* sim_cmd = app.add_subcommand("simulate", "Drive scenarios through simulated sessions and write traces");
    sim_cmd->add_option("--manifest", manifest, "Scenario manifest JSONL")->required();
    sim_cmd->add_option("--out", out_dir, "Trace output directory")->required();
    sim_cmd->add_option("--config", sim_config, "System config JSON");
    sim_cmd->add_option("--trials", trials, "Comma-separated trial kinds");
    sim_cmd->add_option("--jobs", jobs, "Worker threads");

    auto* eval_cmd = app.add_subcommand("eval", "Score traces or an EoT backend");
    eval_cmd->require_subcommand(1);
    std::string traces, format = "text", system = "system", offsets, corpus, backend = "rule";
    double cap = 10.0;
    auto* eval_barge = eval_cmd->add_subcommand("barge-in", "Barge-in accuracy curve, T90 and false barge-in rate");
    eval_barge->add_option("--traces", traces, "Trace directory")->required();
    eval_barge->add_option("--offsets", offsets, "start:stop:step in ms (default 0:500:10)");
    auto* eval_latency = eval_cmd->add_subcommand("latency", "First-audio latency percentiles");
    eval_latency->add_option("--traces", traces, "Trace directory")->required();
    eval_latency->add_option("--cap", cap, "Seconds after which a trial counts as a timeout");
    auto* eval_eot = eval_cmd->add_subcommand("eot", "End-of-turn accuracy of a backend on a corpus");
    eval_eot->add_option("--corpus", corpus, "Corpus JSONL {text, label, lang}")->required();
    eval_eot->add_option("--backend", backend, "rule, always-finished, always-unfinished or remote:<url>");
    for (auto* cmd : {eval_barge, eval_latency, eval_eot}) {
        cmd->add_option("--format", format, "text or json");
        cmd->add_option("--system", system, "Row label");
    }

    std::string report_input;
    auto* report_cmd = app.add_subcommand("report", "Render a report JSON as tables");
    report_cmd->add_option("input", report_input, "Report JSON")->required();
    report_cmd->add_option("--format", format, "text or json");

    std::string kind = "eot", corpus_out, language = "both";
    std::uint64_t seed = 1;
    std::size_t count = 100, spans = 1;
    auto* corpus_cmd = app.add_subcommand("make-corpus", "Generate an EoT corpus or a scenario manifest");
    corpus_cmd->add_option("--seed", seed, "Random seed");
    corpus_cmd->add_option("--count", count, "Source utterances per language, or scenarios");
    corpus_cmd->add_option("--kind", kind, "eot or scenarios");
    corpus_cmd->add_option("--out", corpus_out, "Output file (eot, default stdout) or directory (scenarios)");
    corpus_cmd->add_option("--language", language, "en, zh or both (eot only)");
    corpus_cmd->add_option("--spans", spans, "Unfinished prefixes per utterance (eot only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (serve_cmd->parsed()) return serve(config_path, bind);
        if (sim_cmd->parsed()) return simulate(manifest, out_dir, sim_config, trials, jobs);
        if (corpus_cmd->parsed()) return make_corpus(kind, seed, count, corpus_out, language, spans);
        if (report_cmd->parsed()) {
            const auto rows = metrics::report_from_json(read_json_file(report_input));
            std::cout << metrics::emit_report(rows, parse_format(format));
            return 0;
        }
        metrics::SystemReport row;
        row.system = system;
        parse_format(format);
        if (eval_barge->parsed()) {
            const auto list = parse_offsets(offsets);
            row.barge_in = metrics::barge_in_metrics(metrics::load_traces(traces), list);
        } else if (eval_latency->parsed()) {
            if (!(cap > 0.0)) throw ConfigError("--cap must be positive");
            row.latency = metrics::latency_metrics(metrics::load_traces(traces), cap);
        } else {
            std::unique_ptr<eot::EotBackend> b;
            try {
                b = eot::make_eot_backend(backend);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            row.eot = eot::eot_eval(eot::read_eot_jsonl(fs::path(corpus)), *b);
        }
        print_report(row, format);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
