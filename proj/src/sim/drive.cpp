#include "duplex/sim/drive.hpp"

#include <algorithm>
#include <stdexcept>

#include "duplex/eot/backend.hpp"
#include "duplex/pipeline/mocks.hpp"
#include "duplex/pvad/embedding.hpp"
#include "duplex/pvad/model.hpp"
#include "duplex/sim/synth.hpp"

namespace duplex::sim {
namespace {

using nlohmann::json;

json interval_json(const std::optional<audio::Interval>& iv) {
    if (!iv) return nullptr;
    return json::array({iv->start, iv->end});
}

json header(const Scenario& s, TrialKind kind, const std::string& session) {
    const auto& gt = s.ground_truth;
    return {{"type", "header"},
            {"schema", kTraceSchema},
            {"session", session},
            {"trial", to_string(kind)},
            {"seed", s.seed},
            {"scenario", s.name},
            {"ground_truth",
             {{"primary_onset", gt.primary_onset},
              {"primary_end", gt.primary_end},
              {"interferer", interval_json(gt.interferer)},
              {"noise", interval_json(gt.noise)}}},
            {"primary_present", kind != TrialKind::primary_silent}};
}

std::string covering_prompt(double seconds) {
    // The mock TTS speaks one frame per character.
    const auto chars = static_cast<std::size_t>(seconds / audio::kFrameSeconds) + 100;
    std::string text;
    while (text.size() < chars) text += "la ";
    text.pop_back();
    return text;
}

std::string session_id(const Scenario& s, TrialKind kind) { return s.name + "/" + to_string(kind); }

}  // namespace

std::string to_string(TrialKind kind) {
    switch (kind) {
        case TrialKind::barge_in: return "barge-in";
        case TrialKind::primary_silent: return "primary-silent";
        case TrialKind::latency: return "latency";
    }
    return "unknown";
}

TrialKind trial_kind_from_string(const std::string& name) {
    if (name == "barge-in") return TrialKind::barge_in;
    if (name == "primary-silent") return TrialKind::primary_silent;
    if (name == "latency") return TrialKind::latency;
    throw std::invalid_argument("unknown trial kind '" + name + "'");
}

std::string to_string(VadKind kind) {
    switch (kind) {
        case VadKind::oracle: return "oracle";
        case VadKind::energy: return "energy";
        case VadKind::reference: return "reference-pvad";
        case VadKind::neural: return "neural-pvad";
    }
    return "unknown";
}

VadKind vad_kind_from_string(const std::string& name) {
    if (name == "oracle") return VadKind::oracle;
    if (name == "energy") return VadKind::energy;
    if (name == "reference-pvad") return VadKind::reference;
    if (name == "neural-pvad") return VadKind::neural;
    throw std::invalid_argument("unknown vad '" + name + "' (oracle, energy, reference-pvad, neural-pvad)");
}

float LabelTrackVad::push(const audio::AudioFrame& frame) {
    if (frame.index < 0 || static_cast<std::size_t>(frame.index) >= labels_.size()) return 0.0f;
    return (labels_[static_cast<std::size_t>(frame.index)] & mask_) ? 1.0f : 0.0f;
}

std::string Trace::jsonl() const {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

Trace drive_session(const Scenario& scenario, TrialKind kind, const SessionFactory& factory,
                    const DriveOptions& options) {
    Trace trace;
    const auto id = session_id(scenario, kind);
    trace.records.push_back(header(scenario, kind, id));

    const auto rendered = render_scenario(scenario, kind != TrialKind::primary_silent);
    const auto frames = rendered.frames();
    const double horizon = scenario.duration + options.after;

    SimScheduler scheduler;
    std::unique_ptr<turn::Session> session;
    try {
        turn::SessionObserver observer;
        observer.on_trace = [&trace](const json& rec) { trace.records.push_back(rec); };
        session = factory(scheduler, std::move(observer), scenario, rendered, kind);
        if (!session) throw std::runtime_error("session factory returned no session");
        auto* s = session.get();
        if (kind != TrialKind::latency) {
            const auto prompt = options.agent_prompt.empty() ? covering_prompt(horizon) : options.agent_prompt;
            scheduler.post_at(0.0, [s, prompt] { s->agent_prompt(prompt); });
        }
        for (const auto& f : frames) {
            scheduler.post_at(f.end_time(), [s, &f] { s->push_frame(f); });
        }
        const double input_end = frames.empty() ? 0.0 : frames.back().end_time();
        scheduler.post_at(input_end, [s] { s->finish_input(); });
        scheduler.run_until(horizon);
    } catch (const std::exception& e) {
        trace.aborted = true;
        trace.error = e.what();
    }
    session.reset();
    trace.records.push_back({{"type", "footer"}, {"aborted", trace.aborted}, {"error", trace.error}});
    return trace;
}

void SimSystemConfig::validate() const {
    smoothing.validate();
    for (double d : {asr_delay, llm_first_token, llm_token_interval, tts_first_frame, tts_frame_interval, eot_delay}) {
        if (d < 0.0) throw std::invalid_argument("sim config: mock delays must be >= 0");
    }
    if (!(silence_timeout > 0.0)) throw std::invalid_argument("sim config: silence_timeout must be positive");
    if (primary_voice >= builtin_voices().size()) throw std::invalid_argument("sim config: primary_voice out of range");
    (void)eot::make_eot_backend(eot);
}

nlohmann::json SimSystemConfig::to_json() const {
    return {{"vad", to_string(vad)},
            {"onset_threshold", smoothing.onset_threshold},
            {"offset_threshold", smoothing.offset_threshold},
            {"onset_frames", smoothing.onset_frames},
            {"hangover_frames", smoothing.hangover_frames},
            {"mode", pipeline::to_string(mode)},
            {"language", audio::to_string(language)},
            {"asr_delay", asr_delay},
            {"llm_first_token", llm_first_token},
            {"llm_token_interval", llm_token_interval},
            {"tts_first_frame", tts_first_frame},
            {"tts_frame_interval", tts_frame_interval},
            {"eot", eot},
            {"silence_timeout", silence_timeout},
            {"eot_delay", eot_delay},
            {"pvad_weights", pvad_weights},
            {"preenroll", preenroll},
            {"enrollment_seed", enrollment_seed},
            {"primary_voice", primary_voice}};
}

SimSystemConfig SimSystemConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("sim config: expected a JSON object");
    SimSystemConfig c;
    const auto known = c.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw std::invalid_argument("sim config: unknown key '" + key + "'");
        (void)value;
    }
    try {
        if (j.contains("vad")) c.vad = vad_kind_from_string(j.at("vad").get<std::string>());
        c.smoothing.onset_threshold = j.value("onset_threshold", c.smoothing.onset_threshold);
        c.smoothing.offset_threshold = j.value("offset_threshold", c.smoothing.offset_threshold);
        c.smoothing.onset_frames = j.value("onset_frames", c.smoothing.onset_frames);
        c.smoothing.hangover_frames = j.value("hangover_frames", c.smoothing.hangover_frames);
        if (j.contains("mode")) c.mode = pipeline::pipeline_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("language")) c.language = audio::language_from_string(j.at("language").get<std::string>());
        c.asr_delay = j.value("asr_delay", c.asr_delay);
        c.llm_first_token = j.value("llm_first_token", c.llm_first_token);
        c.llm_token_interval = j.value("llm_token_interval", c.llm_token_interval);
        c.tts_first_frame = j.value("tts_first_frame", c.tts_first_frame);
        c.tts_frame_interval = j.value("tts_frame_interval", c.tts_frame_interval);
        c.eot = j.value("eot", c.eot);
        c.silence_timeout = j.value("silence_timeout", c.silence_timeout);
        c.eot_delay = j.value("eot_delay", c.eot_delay);
        c.pvad_weights = j.value("pvad_weights", c.pvad_weights);
        c.preenroll = j.value("preenroll", c.preenroll);
        c.enrollment_seed = j.value("enrollment_seed", c.enrollment_seed);
        c.primary_voice = j.value("primary_voice", c.primary_voice);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("sim config: ") + e.what());
    }
    c.validate();
    return c;
}

SessionFactory make_sim_factory(const SimSystemConfig& config) {
    config.validate();
    auto encoder = std::make_shared<const pvad::ReferenceSpeakerEncoder>();
    std::optional<pvad::SpeakerEmbedding> embedding;
    if (config.preenroll && (config.vad == VadKind::reference || config.vad == VadKind::neural)) {
        const auto u = enrollment_utterance(config.enrollment_seed, config.primary_voice);
        embedding = pvad::enroll(u.audio, *encoder);
    }
    std::shared_ptr<const pvad::PvadModel> model;
    if (config.vad == VadKind::neural) {
        model = std::make_shared<const pvad::PvadModel>(config.pvad_weights.empty()
                                                            ? pvad::PvadModel::random({}, 1)
                                                            : pvad::load_pvad(config.pvad_weights));
    }
    std::shared_ptr<const eot::EotBackend> eot = eot::make_eot_backend(config.eot);

    return [config, encoder, embedding, model, eot](Scheduler& scheduler, turn::SessionObserver observer,
                                                    const Scenario& scenario, const Rendered& rendered,
                                                    TrialKind kind) {
        turn::SessionSettings settings;
        settings.session_id = session_id(scenario, kind);
        settings.mode = config.mode;
        settings.language = config.language;
        settings.smoothing = config.smoothing;
        settings.silence_timeout = config.silence_timeout;
        settings.eot_delay = config.eot_delay;

        turn::SessionDeps deps;
        switch (config.vad) {
            case VadKind::oracle: deps.vad = std::make_unique<LabelTrackVad>(rendered.labels); break;
            case VadKind::energy: deps.vad = std::make_unique<pvad::EnergyVad>(); break;
            case VadKind::reference:
                deps.vad = std::make_unique<pvad::ReferencePvad>(encoder, pvad::ReferencePvadConfig{}, embedding);
                break;
            case VadKind::neural: deps.vad = std::make_unique<pvad::NeuralPvad>(model, embedding); break;
        }
        deps.encoder = encoder;
        deps.eot = eot;

        // Segments that overlap primary speech are recognised as the primary
        // transcript; anything else (interferer, noise) as silence.
        pipeline::MockAsrConfig asr;
        asr.delay = config.asr_delay;
        asr.transcribe = [labels = rendered.labels, text = scenario.primary.transcript](
                             const pipeline::AudioSegment& seg) -> std::string {
            for (const auto& f : seg) {
                const auto k = static_cast<std::size_t>(std::max<std::int64_t>(f.index, 0));
                if (k < labels.size() && (labels[k] & kPrimaryActive)) return text;
            }
            return "";
        };
        pipeline::MockLlmConfig llm;
        llm.first_token_delay = config.llm_first_token;
        llm.token_interval = config.llm_token_interval;
        pipeline::MockAudioLlmConfig audio_llm;
        audio_llm.first_token_delay = config.llm_first_token;
        pipeline::MockTtsConfig tts;
        tts.first_frame_delay = config.tts_first_frame;
        tts.frame_interval = config.tts_frame_interval;

        deps.components.asr = std::make_shared<pipeline::MockAsr>(scheduler, asr);
        deps.components.llm = std::make_shared<pipeline::MockTextLlm>(scheduler, llm);
        deps.components.audio_llm = std::make_shared<pipeline::MockAudioLlm>(scheduler, audio_llm);
        deps.components.tts = std::make_shared<pipeline::MockTts>(scheduler, tts);
        return std::make_unique<turn::Session>(scheduler, settings, std::move(deps), std::move(observer));
    };
}

}  // namespace duplex::sim
