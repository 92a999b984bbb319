#include "duplex/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace duplex::metrics {
namespace {

using nlohmann::json;

bool has_command(const json& rec, const char* name) {
    for (const auto& c : rec.at("commands")) {
        if (c.get<std::string>() == name) return true;
    }
    return false;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string percent(const std::optional<double>& v) { return v ? fixed(*v * 100.0, 1) : "n/a"; }

// Left-aligned first column, right-aligned others, two spaces between.
std::string table(const std::string& title, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::string out = title + "\n";
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            const auto pad = std::string(width[c] - r[c].size(), ' ');
            if (c > 0) line += "  ";
            line += c == 0 ? r[c] + pad : pad + r[c];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
    }
    return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json barge_in_json(const BargeInReport& r) {
    json acc = json::object();
    for (const auto& [o, a] : r.accuracy_at_offset) acc[std::to_string(o)] = a;
    return {{"accuracy_at_offset", acc},
            {"t90_ms", r.t90_ms ? json(*r.t90_ms) : json("not reached")},
            {"false_barge_in_rate", r.false_barge_in_rate},
            {"barge_in_trials", r.barge_in_trials},
            {"premature", r.premature},
            {"missed", r.missed},
            {"silent_trials", r.silent_trials},
            {"false_alarms", r.false_alarms},
            {"aborted", r.aborted}};
}

BargeInReport barge_in_from(const json& j) {
    BargeInReport r;
    for (const auto& [k, v] : j.at("accuracy_at_offset").items()) r.accuracy_at_offset[std::stoi(k)] = v.get<double>();
    const auto& t = j.at("t90_ms");
    if (t.is_number_integer()) {
        r.t90_ms = t.get<int>();
    } else if (t != "not reached") {
        throw std::runtime_error("report: t90_ms must be an integer or \"not reached\"");
    }
    r.false_barge_in_rate = j.at("false_barge_in_rate").get<double>();
    r.barge_in_trials = j.at("barge_in_trials").get<std::size_t>();
    r.premature = j.at("premature").get<std::size_t>();
    r.missed = j.at("missed").get<std::size_t>();
    r.silent_trials = j.at("silent_trials").get<std::size_t>();
    r.false_alarms = j.at("false_alarms").get<std::size_t>();
    r.aborted = j.at("aborted").get<std::size_t>();
    return r;
}

json eot_json(const eot::EotReport& r) {
    json out = json::object();
    for (const auto& [lang, a] : r) {
        out[audio::to_string(lang)] = {{"finished_total", a.finished_total},
                                       {"finished_correct", a.finished_correct},
                                       {"unfinished_total", a.unfinished_total},
                                       {"unfinished_correct", a.unfinished_correct},
                                       {"finished_acc", optional_json(a.finished_acc)},
                                       {"unfinished_acc", optional_json(a.unfinished_acc)},
                                       {"average_acc", optional_json(a.average_acc)},
                                       {"pooled_acc", optional_json(a.pooled_acc)},
                                       {"warnings", a.warnings}};
    }
    return out;
}

eot::EotReport eot_from(const json& j) {
    eot::EotReport r;
    for (const auto& [lang, v] : j.items()) {
        auto& a = r[audio::language_from_string(lang)];
        a.finished_total = v.at("finished_total").get<std::size_t>();
        a.finished_correct = v.at("finished_correct").get<std::size_t>();
        a.unfinished_total = v.at("unfinished_total").get<std::size_t>();
        a.unfinished_correct = v.at("unfinished_correct").get<std::size_t>();
        a.finished_acc = optional_from(v.at("finished_acc"));
        a.unfinished_acc = optional_from(v.at("unfinished_acc"));
        a.average_acc = optional_from(v.at("average_acc"));
        a.pooled_acc = optional_from(v.at("pooled_acc"));
        a.warnings = v.at("warnings").get<std::vector<std::string>>();
    }
    return r;
}

json latency_json(const LatencyReport& r) {
    return {{"samples", r.samples}, {"p50", r.p50},   {"p95", r.p95},
            {"timeouts", r.timeouts}, {"cap", r.cap}, {"aborted", r.aborted}};
}

LatencyReport latency_from(const json& j) {
    LatencyReport r;
    r.samples = j.at("samples").get<std::vector<double>>();
    r.p50 = j.at("p50").get<double>();
    r.p95 = j.at("p95").get<double>();
    r.timeouts = j.at("timeouts").get<std::size_t>();
    r.cap = j.at("cap").get<double>();
    r.aborted = j.at("aborted").get<std::size_t>();
    return r;
}

}  // namespace

TrialTrace parse_trace(std::span<const json> records) {
    if (records.empty() || records.front().value("type", "") != "header") {
        throw std::runtime_error("trace: first record must be the header");
    }
    if (records.back().value("type", "") != "footer") throw std::runtime_error("trace: last record must be the footer");
    TrialTrace t;
    try {
        const auto& h = records.front();
        if (h.at("schema").get<int>() != sim::kTraceSchema) {
            throw std::runtime_error("unsupported schema " + h.at("schema").dump());
        }
        t.session = h.at("session").get<std::string>();
        t.trial = sim::trial_kind_from_string(h.at("trial").get<std::string>());
        t.primary_present = h.at("primary_present").get<bool>();
        t.primary_onset = h.at("ground_truth").at("primary_onset").get<double>();
        t.primary_end = h.at("ground_truth").at("primary_end").get<double>();
        for (std::size_t i = 1; i + 1 < records.size(); ++i) {
            const auto& r = records[i];
            if (r.at("type") != "transition") continue;
            const double time = r.at("time").get<double>();
            if (has_command(r, "HaltPlayback")) t.halts.push_back(time);
            if (has_command(r, "EmitAudio")) t.audio.push_back(time);
        }
        t.aborted = records.back().at("aborted").get<bool>();
        t.error = records.back().value("error", "");
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("trace: ") + e.what());
    }
    return t;
}

TrialTrace parse_trace(std::istream& in) {
    std::vector<json> records;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw std::runtime_error("trace line " + std::to_string(n) + ": " + e.what());
        }
    }
    return parse_trace(records);
}

std::vector<TrialTrace> load_traces(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<TrialTrace> out;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        try {
            out.push_back(parse_trace(in));
        } catch (const std::exception& e) {
            throw std::runtime_error(f.string() + ": " + e.what());
        }
    }
    return out;
}

std::vector<int> default_offsets_ms() {
    std::vector<int> v;
    for (int o = 0; o <= 500; o += 10) v.push_back(o);
    return v;
}

BargeInReport barge_in_metrics(std::span<const TrialTrace> traces, std::span<const int> offsets_ms) {
    if (offsets_ms.empty()) throw std::invalid_argument("barge_in_metrics: no offsets");
    std::vector<int> offsets(offsets_ms.begin(), offsets_ms.end());
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    if (offsets.front() < 0) throw std::invalid_argument("barge_in_metrics: offsets must be >= 0");

    BargeInReport r;
    // Delay of each barge-in trial's first halt after the onset.
    std::vector<double> delays;
    for (const auto& t : traces) {
        if (t.aborted) {
            ++r.aborted;
            continue;
        }
        if (t.trial == sim::TrialKind::barge_in && t.primary_present) {
            ++r.barge_in_trials;
            if (t.halts.empty()) {
                ++r.missed;
            } else if (t.halts.front() < t.primary_onset - kTimeTolerance) {
                ++r.premature;
            } else {
                delays.push_back(t.halts.front() - t.primary_onset);
            }
        } else if (t.trial == sim::TrialKind::primary_silent) {
            ++r.silent_trials;
            r.false_alarms += !t.halts.empty();
        }
    }
    if (r.barge_in_trials == 0) throw std::invalid_argument("barge_in_metrics: no barge-in trials");
    if (r.silent_trials == 0) throw std::invalid_argument("barge_in_metrics: no primary-silent trials");

    for (int o : offsets) {
        const double limit = o / 1000.0 + kTimeTolerance;
        const auto hits = std::count_if(delays.begin(), delays.end(), [&](double d) { return d <= limit; });
        const double acc = double(hits) / double(r.barge_in_trials);
        r.accuracy_at_offset[o] = acc;
        if (!r.t90_ms && acc >= 0.9) r.t90_ms = o;
    }
    r.false_barge_in_rate = double(r.false_alarms) / double(r.silent_trials);
    return r;
}

double nearest_rank(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("nearest_rank: no samples");
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("nearest_rank: q must be in (0, 1]");
    const auto n = sorted.size();
    // The epsilon keeps q * n that is an integer in exact arithmetic from
    // rounding up a rank.
    auto rank = static_cast<std::size_t>(std::ceil(q * double(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

LatencyReport latency_metrics(std::span<const TrialTrace> traces, double cap) {
    if (!(cap > 0.0)) throw std::invalid_argument("latency_metrics: cap must be positive");
    LatencyReport r;
    r.cap = cap;
    for (const auto& t : traces) {
        if (t.trial != sim::TrialKind::latency) continue;
        if (t.aborted) {
            ++r.aborted;
            continue;
        }
        const double end = t.primary_end;
        const auto it = std::find_if(t.audio.begin(), t.audio.end(), [&](double a) { return a >= end - kTimeTolerance; });
        if (it == t.audio.end() || *it - end > cap) {
            ++r.timeouts;
            continue;
        }
        r.samples.push_back(*it - end);
    }
    if (r.samples.empty()) throw std::invalid_argument("latency_metrics: no latency samples");
    std::vector<double> sorted = r.samples;
    std::sort(sorted.begin(), sorted.end());
    r.p50 = nearest_rank(sorted, 0.50);
    r.p95 = nearest_rank(sorted, 0.95);
    return r;
}

json report_to_json(std::span<const SystemReport> rows) {
    json systems = json::array();
    for (const auto& row : rows) {
        json s = {{"system", row.system}};
        if (row.barge_in) s["barge_in"] = barge_in_json(*row.barge_in);
        if (row.eot) s["eot"] = eot_json(*row.eot);
        if (row.latency) s["latency"] = latency_json(*row.latency);
        systems.push_back(std::move(s));
    }
    return {{"schema", kReportSchema}, {"systems", systems}};
}

std::vector<SystemReport> report_from_json(const json& j) {
    try {
        if (j.at("schema").get<int>() != kReportSchema) {
            throw std::runtime_error("unsupported report schema " + j.at("schema").dump());
        }
        std::vector<SystemReport> rows;
        for (const auto& s : j.at("systems")) {
            SystemReport row;
            row.system = s.at("system").get<std::string>();
            if (s.contains("barge_in")) row.barge_in = barge_in_from(s.at("barge_in"));
            if (s.contains("eot")) row.eot = eot_from(s.at("eot"));
            if (s.contains("latency")) row.latency = latency_from(s.at("latency"));
            rows.push_back(std::move(row));
        }
        return rows;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("report: ") + e.what());
    }
}

std::string emit_report(std::span<const SystemReport> rows, ReportFormat format) {
    const bool any = std::any_of(rows.begin(), rows.end(),
                                 [](const SystemReport& r) { return r.barge_in || r.eot || r.latency; });
    if (!any) throw std::invalid_argument("emit_report: no reports");
    if (format == ReportFormat::json) return report_to_json(rows).dump(2) + "\n";

    std::vector<std::string> sections;
    std::vector<std::vector<std::string>> b{{"System", "T90 (ms)", "False barge-in rate (%)"}};
    std::vector<std::vector<std::string>> e{{"System", "Language", "Finished (%)", "Unfinished (%)", "Average (%)"}};
    std::vector<std::vector<std::string>> l{{"System", "P50 (s)", "P95 (s)"}};
    for (const auto& r : rows) {
        if (r.barge_in) {
            b.push_back({r.system, r.barge_in->t90_ms ? std::to_string(*r.barge_in->t90_ms) : "not reached",
                         fixed(r.barge_in->false_barge_in_rate * 100.0, 1)});
        }
        if (r.eot) {
            for (const auto& [lang, a] : *r.eot) {
                e.push_back({r.system, audio::to_string(lang), percent(a.finished_acc), percent(a.unfinished_acc),
                             percent(a.average_acc)});
            }
        }
        if (r.latency) l.push_back({r.system, fixed(r.latency->p50, 3), fixed(r.latency->p95, 3)});
    }
    std::string out;
    auto add = [&](const std::string& title, const std::vector<std::vector<std::string>>& t) {
        if (t.size() < 2) return;
        if (!out.empty()) out += "\n";
        out += table(title, t);
    };
    add("Barge-in", b);
    add("End-of-turn detection", e);
    add("Latency", l);
    return out;
}

}  // namespace duplex::metrics
