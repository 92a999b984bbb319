#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "duplex/eot/eval.hpp"
#include "duplex/sim/drive.hpp"

namespace duplex::metrics {

/// What the metrics need from one trace file.
struct TrialTrace {
    std::string session;
    sim::TrialKind trial = sim::TrialKind::barge_in;
    bool primary_present = true;
    double primary_onset = 0.0;
    double primary_end = 0.0;
    // Times of transitions carrying HaltPlayback / EmitAudio, in order.
    std::vector<double> halts;
    std::vector<double> audio;
    bool aborted = false;
    std::string error;
};

/// Throws std::runtime_error when the header or footer is missing or a record
/// is malformed.
TrialTrace parse_trace(std::span<const nlohmann::json> records);
TrialTrace parse_trace(std::istream& jsonl);
/// Every *.jsonl file under `dir`, in file name order.
std::vector<TrialTrace> load_traces(const std::filesystem::path& dir);

/// Halts within this much of a window edge count as inside it.
inline constexpr double kTimeTolerance = 1e-9;

struct BargeInReport {
    std::map<int, double> accuracy_at_offset;
    // Least listed offset with accuracy >= 0.9.
    std::optional<int> t90_ms;
    double false_barge_in_rate = 0.0;
    std::size_t barge_in_trials = 0;
    // Barge-in trials whose first halt came before the onset.
    std::size_t premature = 0;
    // Barge-in trials with no halt at all.
    std::size_t missed = 0;
    std::size_t silent_trials = 0;
    std::size_t false_alarms = 0;
    std::size_t aborted = 0;

    friend bool operator==(const BargeInReport&, const BargeInReport&) = default;
};

/// 0, 10, ..., 500 ms.
std::vector<int> default_offsets_ms();

/// A barge-in trial succeeds at offset o when its first HaltPlayback lies in
/// [onset, onset + o]. The false barge-in rate is the fraction of
/// primary-silent trials with any HaltPlayback. Aborted traces are counted
/// and skipped. Throws std::invalid_argument naming an empty partition or on
/// an empty or negative offset list.
BargeInReport barge_in_metrics(std::span<const TrialTrace> traces, std::span<const int> offsets_ms);

struct LatencyReport {
    // Input end to first agent audio, seconds, in trace order.
    std::vector<double> samples;
    double p50 = 0.0;
    double p95 = 0.0;
    // Latency trials with no agent audio within `cap` seconds.
    std::size_t timeouts = 0;
    double cap = 10.0;
    std::size_t aborted = 0;

    friend bool operator==(const LatencyReport&, const LatencyReport&) = default;
};

/// Nearest rank on ascending `sorted`: element ceil(q * n), 1-based. Throws
/// std::invalid_argument on an empty input or q outside (0, 1].
double nearest_rank(std::span<const double> sorted, double q);

/// Per latency trial: first EmitAudio at or after the input end, minus the
/// input end. Trials without one inside `cap` are excluded and counted as
/// timeouts. Throws std::invalid_argument when no sample remains.
LatencyReport latency_metrics(std::span<const TrialTrace> traces, double cap = 10.0);

/// One row of the report tables.
struct SystemReport {
    std::string system;
    std::optional<BargeInReport> barge_in;
    std::optional<eot::EotReport> eot;
    std::optional<LatencyReport> latency;

    friend bool operator==(const SystemReport&, const SystemReport&) = default;
};

enum class ReportFormat { text, json };

inline constexpr int kReportSchema = 1;

/// Tables in the order barge-in, end-of-turn, latency; each present when at
/// least one row carries it. Throws std::invalid_argument when no row
/// carries any report.
std::string emit_report(std::span<const SystemReport> rows, ReportFormat format);

nlohmann::json report_to_json(std::span<const SystemReport> rows);
/// Inverse of report_to_json. Throws std::runtime_error on a schema mismatch.
std::vector<SystemReport> report_from_json(const nlohmann::json& j);

}  // namespace duplex::metrics
