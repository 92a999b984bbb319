#include "duplex/gateway/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "duplex/audio/wav.hpp"
#include "duplex/pipeline/mocks.hpp"
#include "duplex/pvad/frame_vad.hpp"

namespace duplex::gateway {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw std::invalid_argument("config: " + field + " " + what);
}

void reject_unknown(const json& j, const json& known, const std::string& where) {
    if (!j.is_object()) fail(where.empty() ? "root" : where, "must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) fail((where.empty() ? "" : where + ".") + key, "is not a known key");
    }
}

// Reads j[key] into `out` when present, naming `field` on a type mismatch.
template <class T>
void read(const json& j, const char* key, T& out, const std::string& field) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(field, "has the wrong type");
    }
}

template <class T, class Parse>
void read_enum(const json& j, const char* key, T& out, const std::string& field, Parse parse) {
    std::string s;
    read(j, key, s, field);
    if (!j.contains(key)) return;
    try {
        out = parse(s);
    } catch (const std::exception& e) {
        fail(field, std::string("is invalid: ") + e.what());
    }
}

std::string kind_name(ComponentConfig::Kind k) { return k == ComponentConfig::Kind::mock ? "mock" : "http"; }

json component_to_json(const ComponentConfig& c) {
    json j{{"kind", kind_name(c.kind)}};
    if (c.kind == ComponentConfig::Kind::mock) {
        j["delay"] = c.delay;
        j["interval"] = c.interval;
        if (c.text) j["text"] = *c.text;
    } else {
        j["url"] = c.http.url;
        j["timeout_ms"] = c.http.timeout.count();
        j["auth_header"] = c.http.auth_header;
        j["auth_env"] = c.http.auth_env;
        j["system_prompt"] = c.system_prompt;
    }
    return j;
}

ComponentConfig component_from_json(const json& j, const std::string& field) {
    static const json known{{"kind", 0},        {"delay", 0},       {"interval", 0},    {"text", 0},
                            {"url", 0},         {"timeout_ms", 0},  {"auth_header", 0}, {"auth_env", 0},
                            {"system_prompt", 0}};
    reject_unknown(j, known, field);
    ComponentConfig c;
    read_enum(j, "kind", c.kind, field + ".kind", [](const std::string& s) {
        if (s == "mock") return ComponentConfig::Kind::mock;
        if (s == "http") return ComponentConfig::Kind::http;
        throw std::invalid_argument("expected mock or http");
    });
    read(j, "delay", c.delay, field + ".delay");
    read(j, "interval", c.interval, field + ".interval");
    if (j.contains("text")) {
        std::string t;
        read(j, "text", t, field + ".text");
        c.text = t;
    }
    read(j, "url", c.http.url, field + ".url");
    std::int64_t ms = c.http.timeout.count();
    read(j, "timeout_ms", ms, field + ".timeout_ms");
    c.http.timeout = std::chrono::milliseconds(ms);
    read(j, "auth_header", c.http.auth_header, field + ".auth_header");
    read(j, "auth_env", c.http.auth_env, field + ".auth_env");
    read(j, "system_prompt", c.system_prompt, field + ".system_prompt");
    return c;
}

void validate_component(const ComponentConfig& c, const std::string& field) {
    if (c.kind == ComponentConfig::Kind::mock) {
        if (c.delay < 0.0) fail(field + ".delay", "must be >= 0");
        if (c.interval < 0.0) fail(field + ".interval", "must be >= 0");
        return;
    }
    if (c.http.url.empty()) fail(field + ".url", "is required for an http component");
    try {
        c.http.validate();
    } catch (const std::exception& e) {
        fail(field + ".url", e.what());
    }
}

const char* const kComponents[] = {"asr", "llm", "audio_llm", "tts", "tool_executor"};

}  // namespace

void SessionConfig::validate() const {
    if (vad == sim::VadKind::oracle) fail("vad", "must be energy, reference-pvad or neural-pvad");
    if (vad != sim::VadKind::neural && !pvad_weights.empty()) fail("pvad_weights", "needs vad neural-pvad");
    try {
        smoothing.validate();
    } catch (const std::exception& e) {
        fail("smoothing", e.what());
    }
    if (!(silence_timeout > 0.0)) fail("silence_timeout", "must be positive");
    if (eot_timeout.count() <= 0) fail("eot_timeout_ms", "must be positive");
    try {
        (void)eot::make_eot_backend(eot, eot_timeout);
    } catch (const std::exception& e) {
        fail("eot", e.what());
    }
    const ComponentConfig* parts[] = {&asr, &llm, &audio_llm, &tts, &tool_executor};
    for (std::size_t i = 0; i < 5; ++i) validate_component(*parts[i], std::string("components.") + kComponents[i]);
    for (std::size_t i = 0; i < tools.size(); ++i) {
        const auto field = "tools[" + std::to_string(i) + "]";
        if (tools[i].name.empty()) fail(field + ".name", "must not be empty");
        if (tools[i].deadline.count() <= 0) fail(field + ".deadline_ms", "must be positive");
        try {
            (void)pipeline::decide_tool("", {tools[i]});
        } catch (const std::exception& e) {
            fail(field + ".pattern", e.what());
        }
    }
}

json SessionConfig::to_json() const {
    json components;
    const ComponentConfig* parts[] = {&asr, &llm, &audio_llm, &tts, &tool_executor};
    for (std::size_t i = 0; i < 5; ++i) components[kComponents[i]] = component_to_json(*parts[i]);
    auto tool_list = json::array();
    for (const auto& t : tools) {
        tool_list.push_back(
            {{"name", t.name}, {"pattern", t.pattern}, {"endpoint", t.endpoint}, {"deadline_ms", t.deadline.count()}});
    }
    return {{"pipeline_mode", pipeline::to_string(mode)},
            {"language", audio::to_string(language)},
            {"vad", sim::to_string(vad)},
            {"pvad_weights", pvad_weights},
            {"enrollment_wav", enrollment_wav},
            {"eot", eot},
            {"eot_timeout_ms", eot_timeout.count()},
            {"smoothing",
             {{"onset_threshold", smoothing.onset_threshold},
              {"offset_threshold", smoothing.offset_threshold},
              {"onset_frames", smoothing.onset_frames},
              {"hangover_frames", smoothing.hangover_frames}}},
            {"silence_timeout", silence_timeout},
            {"components", components},
            {"tools", tool_list}};
}

SessionConfig SessionConfig::from_json(const json& j) {
    SessionConfig c;
    reject_unknown(j, c.to_json(), "");
    read_enum(j, "pipeline_mode", c.mode, "pipeline_mode", pipeline::pipeline_mode_from_string);
    read_enum(j, "language", c.language, "language", audio::language_from_string);
    read_enum(j, "vad", c.vad, "vad", sim::vad_kind_from_string);
    read(j, "pvad_weights", c.pvad_weights, "pvad_weights");
    read(j, "enrollment_wav", c.enrollment_wav, "enrollment_wav");
    read(j, "eot", c.eot, "eot");
    std::int64_t eot_ms = c.eot_timeout.count();
    read(j, "eot_timeout_ms", eot_ms, "eot_timeout_ms");
    c.eot_timeout = std::chrono::milliseconds(eot_ms);
    if (j.contains("smoothing")) {
        const auto& s = j.at("smoothing");
        reject_unknown(s, c.to_json().at("smoothing"), "smoothing");
        read(s, "onset_threshold", c.smoothing.onset_threshold, "smoothing.onset_threshold");
        read(s, "offset_threshold", c.smoothing.offset_threshold, "smoothing.offset_threshold");
        read(s, "onset_frames", c.smoothing.onset_frames, "smoothing.onset_frames");
        read(s, "hangover_frames", c.smoothing.hangover_frames, "smoothing.hangover_frames");
    }
    read(j, "silence_timeout", c.silence_timeout, "silence_timeout");
    if (j.contains("components")) {
        const auto& comps = j.at("components");
        reject_unknown(comps, c.to_json().at("components"), "components");
        ComponentConfig* parts[] = {&c.asr, &c.llm, &c.audio_llm, &c.tts, &c.tool_executor};
        for (std::size_t i = 0; i < 5; ++i) {
            if (comps.contains(kComponents[i])) {
                *parts[i] = component_from_json(comps.at(kComponents[i]), std::string("components.") + kComponents[i]);
            }
        }
    }
    if (j.contains("tools")) {
        const auto& list = j.at("tools");
        if (!list.is_array()) fail("tools", "must be an array");
        static const json known{{"name", 0}, {"pattern", 0}, {"endpoint", 0}, {"deadline_ms", 0}};
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto field = "tools[" + std::to_string(i) + "]";
            reject_unknown(list[i], known, field);
            pipeline::ToolSpec t;
            read(list[i], "name", t.name, field + ".name");
            read(list[i], "pattern", t.pattern, field + ".pattern");
            read(list[i], "endpoint", t.endpoint, field + ".endpoint");
            std::int64_t ms = t.deadline.count();
            read(list[i], "deadline_ms", ms, field + ".deadline_ms");
            t.deadline = std::chrono::milliseconds(ms);
            c.tools.push_back(std::move(t));
        }
    }
    c.validate();
    return c;
}

SessionFactory::SessionFactory(SessionConfig config) : config_(std::move(config)) {
    config_.validate();
    encoder_ = std::make_shared<const pvad::ReferenceSpeakerEncoder>();
    if (config_.vad == sim::VadKind::neural) {
        model_ = std::make_shared<const pvad::PvadModel>(config_.pvad_weights.empty()
                                                             ? pvad::PvadModel::random({}, 1)
                                                             : pvad::load_pvad(config_.pvad_weights));
    }
    if (!config_.enrollment_wav.empty()) {
        const auto pcm = audio::read_wav(config_.enrollment_wav);
        embedding_ = pvad::enroll(audio::frame_stream(pcm, audio::kSampleRate), *encoder_);
    }
    eot_ = eot::make_eot_backend(config_.eot, config_.eot_timeout);
}

std::unique_ptr<turn::Session> SessionFactory::make(Scheduler& scheduler, std::shared_ptr<Mailbox> mailbox,
                                                    const std::string& session_id,
                                                    turn::SessionObserver observer) const {
    using Kind = ComponentConfig::Kind;
    const auto& c = config_;
    turn::SessionSettings settings;
    settings.session_id = session_id;
    settings.mode = c.mode;
    settings.language = c.language;
    settings.smoothing = c.smoothing;
    settings.silence_timeout = c.silence_timeout;

    turn::SessionDeps deps;
    switch (c.vad) {
        case sim::VadKind::energy: deps.vad = std::make_unique<pvad::EnergyVad>(); break;
        case sim::VadKind::reference:
            deps.vad = std::make_unique<pvad::ReferencePvad>(encoder_, pvad::ReferencePvadConfig{}, embedding_);
            break;
        case sim::VadKind::neural: deps.vad = std::make_unique<pvad::NeuralPvad>(model_, embedding_); break;
        case sim::VadKind::oracle: throw std::logic_error("oracle vad in a live session");
    }
    deps.encoder = encoder_;
    deps.eot = eot_;

    auto& p = deps.components;
    if (c.asr.kind == Kind::mock) {
        pipeline::MockAsrConfig m;
        m.delay = c.asr.delay;
        if (c.asr.text) m.transcribe = [text = *c.asr.text](const pipeline::AudioSegment&) { return text; };
        p.asr = std::make_shared<pipeline::MockAsr>(scheduler, m);
    } else {
        p.asr = std::make_shared<pipeline::HttpAsr>(mailbox, c.asr.http);
    }
    if (c.llm.kind == Kind::mock) {
        pipeline::MockLlmConfig m;
        m.first_token_delay = c.llm.delay;
        m.token_interval = c.llm.interval;
        if (c.llm.text) m.respond = [text = *c.llm.text](const std::string&) { return text; };
        p.llm = std::make_shared<pipeline::MockTextLlm>(scheduler, m);
    } else {
        p.llm = std::make_shared<pipeline::HttpTextLlm>(mailbox, c.llm.http, c.llm.system_prompt);
    }
    if (c.audio_llm.kind == Kind::mock) {
        pipeline::MockAudioLlmConfig m;
        m.first_token_delay = c.audio_llm.delay;
        if (c.audio_llm.text) m.respond = [text = *c.audio_llm.text](const pipeline::AudioLlmInput&) { return text; };
        p.audio_llm = std::make_shared<pipeline::MockAudioLlm>(scheduler, m);
    } else {
        p.audio_llm = std::make_shared<pipeline::HttpAudioLlm>(mailbox, c.audio_llm.http);
    }
    if (c.tts.kind == Kind::mock) {
        pipeline::MockTtsConfig m;
        m.first_frame_delay = c.tts.delay;
        m.frame_interval = c.tts.interval;
        p.tts = std::make_shared<pipeline::MockTts>(scheduler, m);
    } else {
        p.tts = std::make_shared<pipeline::HttpTts>(mailbox, c.tts.http);
    }
    if (c.tool_executor.kind == Kind::mock) {
        pipeline::MockToolConfig m;
        m.delay = c.tool_executor.delay;
        if (c.tool_executor.text) m.content = [text = *c.tool_executor.text](const pipeline::ToolCall&) { return text; };
        p.tools = std::make_shared<pipeline::MockToolExecutor>(scheduler, m);
    } else {
        p.tools = std::make_shared<pipeline::HttpToolExecutor>(mailbox, c.tool_executor.http.timeout);
    }
    p.registry = c.tools;
    return std::make_unique<turn::Session>(scheduler, settings, std::move(deps), std::move(observer));
}

void ServerConfig::validate() const {
    if (host.empty()) fail("host", "must not be empty");
    if (max_sessions == 0) fail("max_sessions", "must be positive");
    if (io_threads == 0) fail("io_threads", "must be positive");
    session.validate();
}

json ServerConfig::to_json() const {
    return {{"host", host},
            {"port", port},
            {"max_sessions", max_sessions},
            {"io_threads", io_threads},
            {"trace_dir", trace_dir},
            {"session", session.to_json()}};
}

ServerConfig ServerConfig::from_json(const json& j) {
    ServerConfig c;
    reject_unknown(j, c.to_json(), "");
    read(j, "host", c.host, "host");
    read(j, "port", c.port, "port");
    read(j, "max_sessions", c.max_sessions, "max_sessions");
    read(j, "io_threads", c.io_threads, "io_threads");
    read(j, "trace_dir", c.trace_dir, "trace_dir");
    if (j.contains("session")) c.session = SessionConfig::from_json(j.at("session"));
    c.validate();
    return c;
}

ServerConfig ServerConfig::load(const std::string& path) {
    ServerConfig c;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("config: cannot open " + path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: " + path + ": " + e.what());
        }
        c = from_json(j);
    }
    if (const char* bind = std::getenv("DUPLEX_BIND")) apply_bind(c, bind);
    return c;
}

void apply_bind(ServerConfig& config, const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0) fail("bind", "must be host:port, got '" + bind + "'");
    const auto port = bind.substr(colon + 1);
    int value = -1;
    try {
        std::size_t used = 0;
        value = std::stoi(port, &used);
        if (used != port.size()) value = -1;
    } catch (const std::exception&) {
    }
    if (value < 0 || value > 65535) fail("bind", "has an invalid port '" + port + "'");
    config.host = bind.substr(0, colon);
    config.port = static_cast<unsigned short>(value);
}

}  // namespace duplex::gateway
