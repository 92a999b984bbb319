#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "duplex/pipeline/http_adapters.hpp"
#include "duplex/pipeline/orchestrator.hpp"
#include "duplex/pipeline/tools.hpp"
#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/model.hpp"
#include "duplex/pvad/smoother.hpp"
#include "duplex/sim/drive.hpp"
#include "duplex/turn/session.hpp"

namespace duplex::gateway {

/// One pipeline component: a deterministic mock or an HTTP endpoint.
struct ComponentConfig {
    enum class Kind { mock, http };
    Kind kind = Kind::mock;
    // mock: delay before the first result, and per token / frame after it.
    double delay = 0.0;
    double interval = 0.0;
    // mock ASR transcript or mock LLM reply; the mock default when unset.
    std::optional<std::string> text;
    // http
    pipeline::HttpEndpoint http;
    std::string system_prompt;
};

/// Everything a live session is built from. Unknown keys are rejected and
/// every error names the offending field.
struct SessionConfig {
    pipeline::PipelineMode mode = pipeline::PipelineMode::cascaded;
    audio::Language language = audio::Language::en;
    // energy, reference-pvad or neural-pvad.
    sim::VadKind vad = sim::VadKind::reference;
    std::string pvad_weights;
    // Preloaded enrollment audio; without it the first long enough user turn
    // enrolls the speaker.
    std::string enrollment_wav;
    std::string eot = "rule";
    std::chrono::milliseconds eot_timeout{200};
    pvad::SmoothingConfig smoothing{};
    double silence_timeout = 0.6;
    ComponentConfig asr, llm, audio_llm, tts, tool_executor;
    pipeline::ToolRegistry tools;

    /// Throws std::invalid_argument naming the bad field.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults.
    static SessionConfig from_json(const nlohmann::json& j);
};

/// Immutable state shared by every session built from one config.
class SessionFactory {
public:
    /// Loads weights, enrollment audio and the EoT backend. Throws on a bad
    /// config or unreadable file.
    explicit SessionFactory(SessionConfig config);

    const SessionConfig& config() const { return config_; }

    /// Components deliver through `mailbox`, which the caller closes before
    /// the scheduler goes away.
    std::unique_ptr<turn::Session> make(Scheduler& scheduler, std::shared_ptr<Mailbox> mailbox,
                                        const std::string& session_id, turn::SessionObserver observer) const;

private:
    SessionConfig config_;
    std::shared_ptr<const pvad::ReferenceSpeakerEncoder> encoder_;
    std::shared_ptr<const pvad::PvadModel> model_;
    std::optional<pvad::SpeakerEmbedding> embedding_;
    std::shared_ptr<const eot::EotBackend> eot_;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    // 0 picks a free port.
    unsigned short port = 8080;
    std::size_t max_sessions = 16;
    std::size_t io_threads = 2;
    // Per-session trace JSONL files go here when set.
    std::string trace_dir;
    SessionConfig session;

    void validate() const;
    nlohmann::json to_json() const;
    static ServerConfig from_json(const nlohmann::json& j);
    /// Reads a JSON file; the DUPLEX_BIND variable ("host:port") overrides
    /// the bind address.
    static ServerConfig load(const std::string& path);
};

/// Applies "host:port" to `config`. Throws std::invalid_argument when malformed.
void apply_bind(ServerConfig& config, const std::string& bind);

}  // namespace duplex::gateway
