#pragma once

#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "duplex/audio/frame.hpp"

namespace duplex::eot {

enum class EotLabel { finished, unfinished };

std::string to_string(EotLabel label);
/// Accepts "finished" / "unfinished"; throws std::invalid_argument otherwise.
EotLabel label_from_string(std::string_view s);

struct EotDecision {
    EotLabel label = EotLabel::finished;
    double confidence = 1.0;  // >= 0.5 for the emitted label
};

/// Raised by remote backends when the service does not answer in time. Not a
/// decision: the caller decides what a missing answer means.
class EotTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Any other backend failure (connection refused, malformed reply).
class EotBackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EotBackend {
public:
    virtual ~EotBackend() = default;
    virtual EotDecision decide(std::string_view transcript) const = 0;
    virtual std::string name() const = 0;
    /// True when decide() does I/O and should not run on a session thread.
    virtual bool blocking() const { return false; }
};

/// Validates the transcript and asks the backend. Throws std::invalid_argument
/// on an empty or whitespace-only transcript.
EotDecision eot_decide(std::string_view accumulated_transcript, const EotBackend& backend);

/// Offline heuristic: terminal punctuation, dangling function words, fillers
/// and interrogative completion, for English and Chinese.
class RuleEotBackend final : public EotBackend {
public:
    EotDecision decide(std::string_view transcript) const override;
    std::string name() const override { return "rule"; }
};

/// Always returns the same label with confidence 1.
class ConstantEotBackend final : public EotBackend {
public:
    explicit ConstantEotBackend(EotLabel label) : label_(label) {}
    EotDecision decide(std::string_view) const override { return {label_, 1.0}; }
    std::string name() const override;

private:
    EotLabel label_;
};

struct RemoteEotConfig {
    std::string url;  // e.g. http://127.0.0.1:8090/eot
    std::chrono::milliseconds timeout{200};
};

/// POSTs {"text": ...} and expects {"label": ..., "confidence": ...}.
class RemoteEotBackend final : public EotBackend {
public:
    explicit RemoteEotBackend(RemoteEotConfig config);
    EotDecision decide(std::string_view transcript) const override;
    std::string name() const override { return "remote"; }
    bool blocking() const override { return true; }

private:
    RemoteEotConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

/// "rule", "always-finished", "always-unfinished" or "remote:<url>".
std::unique_ptr<EotBackend> make_eot_backend(const std::string& spec,
                                             std::chrono::milliseconds remote_timeout = std::chrono::milliseconds(200));

/// Joins successive segment transcripts of one turn with a single space.
std::string join_transcripts(const std::string& accumulated, std::string_view next);

}  // namespace duplex::eot
