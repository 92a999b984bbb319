#include "duplex/turn/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace duplex::turn {
namespace {

// Trace times are rounded to the microsecond so that grid arithmetic noise
// does not leak into the files.
double trace_time(double t) { return std::round(t * 1e6) / 1e6; }

}  // namespace

CaptureBuffer::CaptureBuffer(double seconds)
    : capacity_(static_cast<std::size_t>(std::ceil(seconds / audio::kFrameSeconds - 1e-9))) {
    if (capacity_ == 0) throw std::invalid_argument("capture buffer must hold at least one frame");
}

void CaptureBuffer::append(const audio::AudioFrame& frame) {
    if (!frames_.empty() && frame.index != frames_.back().index + 1) {
        throw std::invalid_argument("capture: frame " + std::to_string(frame.index) + " does not follow frame " +
                                    std::to_string(frames_.back().index));
    }
    frames_.push_back(frame);
    if (frames_.size() > capacity_) frames_.pop_front();
}

std::vector<audio::AudioFrame> CaptureBuffer::extract(const pvad::SpeechSegment& segment) const {
    if (frames_.empty()) return extract_segment({}, segment);
    // Copy only the neighbourhood of the segment; one frame of margin keeps
    // the extent checks identical to a full copy.
    const auto base = frames_.front().index;
    const auto n = static_cast<std::int64_t>(frames_.size());
    const auto lo = std::clamp<std::int64_t>(audio::frame_index_at_or_after(segment.start) - 1 - base, 0, n);
    const auto hi = std::clamp<std::int64_t>(audio::frame_index_at_or_after(segment.end) + 1 - base, lo, n);
    if (hi - lo < 1) return extract_segment(std::vector(frames_.begin(), frames_.end()), segment);
    const std::vector<audio::AudioFrame> part(frames_.begin() + lo, frames_.begin() + hi);
    return extract_segment(part, segment);
}

std::optional<std::int64_t> CaptureBuffer::next_index() const {
    if (frames_.empty()) return std::nullopt;
    return frames_.back().index + 1;
}

void SessionSettings::validate() const {
    smoothing.validate();
    if (!(silence_timeout > 0.0)) throw std::invalid_argument("session: silence_timeout must be positive");
    if (eot_delay < 0.0) throw std::invalid_argument("session: eot_delay must be >= 0");
    if (!(capture_seconds >= 1.0)) throw std::invalid_argument("session: capture_seconds must be >= 1");
    if (session_id.empty()) throw std::invalid_argument("session: session_id must not be empty");
}

Session::Session(Scheduler& scheduler, SessionSettings settings, SessionDeps deps, SessionObserver observer)
    : scheduler_(scheduler),
      settings_((settings.validate(), std::move(settings))),
      vad_(std::move(deps.vad)),
      encoder_(std::move(deps.encoder)),
      eot_(std::move(deps.eot)),
      components_(std::move(deps.components)),
      observer_(std::move(observer)),
      smoother_(settings_.smoothing),
      capture_(settings_.capture_seconds),
      mailbox_(std::make_shared<Mailbox>(scheduler)) {
    if (!vad_) throw std::invalid_argument("session: no VAD");
    if (!components_.tts) throw std::invalid_argument("session: no TTS component");
    if (settings_.mode == pipeline::PipelineMode::cascaded && !components_.llm) {
        throw std::invalid_argument("session: cascaded mode needs a text LLM");
    }
    if (settings_.mode == pipeline::PipelineMode::semi_cascaded && !components_.audio_llm) {
        throw std::invalid_argument("session: semi_cascaded mode needs an AudioLLM");
    }
}

Session::~Session() {
    life_.cancel();
    mailbox_->close();
    if (run_) run_->cancel();
}

void Session::push_frame(const audio::AudioFrame& frame) {
    if (!capture_.next_index()) smoother_.reset(frame.index);
    capture_.append(frame);
    ++stats_.frames;
    const float p = vad_->push(frame);
    if (const auto v = smoother_.push(p)) {
        ControllerEvent e;
        e.kind = v->kind == pvad::VadEventKind::speech_onset ? EventKind::primary_onset : EventKind::primary_offset;
        e.time = scheduler_.now();
        e.audio_time = v->time;
        if (e.kind == EventKind::primary_onset) ++stats_.onsets;
        dispatch(e);
    }
}

void Session::agent_prompt(const std::string& text) {
    ControllerEvent e;
    e.kind = EventKind::agent_prompt;
    e.time = scheduler_.now();
    e.text = text;
    dispatch(e);
}

void Session::finish_input() {
    if (const auto v = smoother_.finish()) {
        ControllerEvent e;
        e.kind = EventKind::primary_offset;
        e.time = scheduler_.now();
        e.audio_time = v->time;
        dispatch(e);
    }
}

void Session::dispatch(const ControllerEvent& event) {
    pending_.push_back(event);
    if (dispatching_) return;
    dispatching_ = true;
    while (!pending_.empty()) {
        auto ev = std::move(pending_.front());
        pending_.pop_front();
        const auto t = controller_.handle(ev);
        trace_transition(ev, t);
        for (const auto& c : t.commands) execute(c);
        update_watchdog();
    }
    dispatching_ = false;
}

void Session::execute(const ControllerCommand& c) {
    switch (c.kind) {
        case CommandKind::halt_playback:
            ++stats_.halts;
            flush_playout();
            if (observer_.on_halt) observer_.on_halt();
            break;
        case CommandKind::cancel_pipeline:
            cancel_pipeline();
            break;
        case CommandKind::start_pipeline:
            start_pipeline(c);
            break;
        case CommandKind::emit_audio:
            ++stats_.audio_out;
            if (observer_.on_audio && c.frame) observer_.on_audio(*c.frame);
            break;
        case CommandKind::emit_state_change:
            if (observer_.on_state) observer_.on_state(c.state);
            break;
        case CommandKind::transcribe_segment:
            transcribe(c);
            break;
        case CommandKind::request_eot:
            request_eot(c);
            break;
    }
}

void Session::trace_transition(const ControllerEvent& ev, const Transition& t) {
    if (!observer_.on_trace) return;
    nlohmann::json rec;
    rec["type"] = "transition";
    rec["time"] = trace_time(ev.time);
    rec["session"] = settings_.session_id;
    rec["state_before"] = to_string(t.before);
    rec["event"] = to_string(ev.kind);
    rec["state_after"] = to_string(t.after);
    if (t.via) rec["via"] = to_string(*t.via);
    auto cmds = nlohmann::json::array();
    for (const auto& c : t.commands) cmds.push_back(to_string(c.kind));
    rec["commands"] = std::move(cmds);
    if (ev.kind == EventKind::primary_onset || ev.kind == EventKind::primary_offset) {
        rec["audio_time"] = trace_time(ev.audio_time);
    }
    if (t.ignored) rec["ignored"] = true;
    observer_.on_trace(rec);
}

void Session::note(const std::string& name, const std::string& detail) {
    if (observer_.on_event) observer_.on_event(name, detail);
    if (observer_.on_trace) {
        observer_.on_trace({{"type", "event"},
                            {"time", trace_time(scheduler_.now())},
                            {"session", settings_.session_id},
                            {"name", name},
                            {"detail", detail}});
    }
}

void Session::transcribe(const ControllerCommand& c) {
    const auto id = c.ref;
    auto deliver = [this, id](const std::string& text) {
        ControllerEvent e;
        e.kind = EventKind::partial_transcript;
        e.time = scheduler_.now();
        e.ref = id;
        e.text = text;
        dispatch(e);
        if (observer_.on_transcript && controller_.transcript().segments.size() &&
            !controller_.transcript().complete) {
            observer_.on_transcript(controller_.transcript().text());
        }
    };
    std::vector<audio::AudioFrame> frames;
    std::string failure;
    if (!components_.asr) {
        failure = "no ASR component";
    } else {
        try {
            frames = capture_.extract(c.segments.at(0));
        } catch (const std::exception& e) {
            failure = e.what();
        }
    }
    if (!failure.empty()) {
        // An empty transcript keeps the turn moving; the controller drops it
        // if nothing else was said.
        note("asr_error", failure);
        scheduler_.post([this, life = life_, deliver] {
            if (!life.cancelled()) deliver("");
        });
        return;
    }
    components_.asr->transcribe(
        std::move(frames), settings_.language,
        [this, life = life_, deliver](pipeline::AsrResult r) {
            if (life.cancelled()) return;
            if (!r.ok) note("asr_error", r.error);
            deliver(r.ok ? r.text : "");
        },
        life_);
}

void Session::request_eot(const ControllerCommand& c) {
    if (!eot_) return;
    const auto revision = c.ref;
    auto deliver = [this, revision](eot::EotDecision d) {
        note("eot", eot::to_string(d.label));
        ControllerEvent e;
        e.kind = d.label == eot::EotLabel::finished ? EventKind::eot_finished : EventKind::eot_unfinished;
        e.time = scheduler_.now();
        e.ref = revision;
        dispatch(e);
    };
    if (eot_->blocking()) {
        std::thread([this, backend = eot_, mailbox = mailbox_, life = life_, text = c.text, deliver] {
            std::string error;
            std::optional<eot::EotDecision> d;
            try {
                d = eot::eot_decide(text, *backend);
            } catch (const std::exception& e) {
                error = e.what();
            }
            mailbox->post([this, life, d, error, deliver] {
                if (life.cancelled()) return;
                if (d) {
                    deliver(*d);
                } else {
                    ++stats_.eot_failures;
                    note("eot_error", error);
                }
            });
        }).detach();
        return;
    }
    try {
        const auto d = eot::eot_decide(c.text, *eot_);
        scheduler_.post_after(settings_.eot_delay, [life = life_, d, deliver] {
            if (!life.cancelled()) deliver(d);
        });
    } catch (const std::exception& e) {
        // The silence watchdog decides the turn instead.
        ++stats_.eot_failures;
        note("eot_error", e.what());
    }
}

void Session::maybe_enroll(const std::vector<pipeline::AudioSegment>& segments) {
    if (!vad_->personalized() || vad_->enrolled() || !encoder_) return;
    std::vector<audio::AudioFrame> all;
    for (const auto& s : segments) all.insert(all.end(), s.begin(), s.end());
    if (all.size() < 100) {
        note("enrollment_deferred", std::to_string(all.size()) + " frames of speech, need 100");
        return;
    }
    vad_->set_embedding(pvad::enroll(all, *encoder_));
    note("enrolled", std::to_string(all.size()) + " frames");
}

void Session::start_pipeline(const ControllerCommand& c) {
    if (run_) cancel_pipeline();
    pipeline::TurnInput in;
    in.generation = c.ref;
    in.text = c.text;
    in.agent_initiated = c.agent_initiated;
    for (const auto& seg : c.segments) {
        try {
            in.segments.push_back(capture_.extract(seg));
        } catch (const std::exception& e) {
            note("segment_unavailable", e.what());
        }
    }
    if (!in.agent_initiated) maybe_enroll(in.segments);

    const auto gen = c.ref;
    run_generation_ = gen;
    synth_done_ = false;
    done_posted_ = false;
    ++stats_.pipelines;

    pipeline::PipelineEvents ev;
    ev.on_text = [this, gen](const std::string& chunk) {
        if (gen != run_generation_) return;
        ControllerEvent e;
        e.kind = EventKind::response_text_chunk;
        e.time = scheduler_.now();
        e.ref = gen;
        e.text = chunk;
        dispatch(e);
        if (observer_.on_response_text) observer_.on_response_text(chunk);
    };
    ev.on_frame = [this, gen](const audio::AudioFrame& f) { enqueue_playout(gen, f); };
    ev.on_done = [this, gen] { finish_generation(gen); };
    ev.on_error = [this, gen](const std::string& e) {
        if (gen != run_generation_) return;
        note("pipeline_error", e);
        finish_generation(gen);
    };
    ev.on_event = [this](const std::string& name, const std::string& detail) { note(name, detail); };

    try {
        run_ = pipeline::run_pipeline(settings_.mode, scheduler_, std::move(in), context_, components_, std::move(ev));
    } catch (const std::exception& e) {
        note("pipeline_error", e.what());
    }
    if (!run_) finish_generation(gen);
}

void Session::cancel_pipeline() {
    if (run_) {
        run_->cancel();
        run_.reset();
    }
    run_generation_ = 0;
    synth_done_ = false;
    flush_playout();
}

void Session::finish_generation(std::uint64_t gen) {
    if (gen != run_generation_) return;
    synth_done_ = true;
    maybe_post_done();
}

void Session::maybe_post_done() {
    if (!synth_done_ || done_posted_ || release_pending_ || !playout_.empty()) return;
    done_posted_ = true;
    const auto gen = run_generation_;
    // The last frame finishes playing one frame after its release.
    scheduler_.post_at(std::max(scheduler_.now(), next_release_), [this, life = life_, gen] {
        if (life.cancelled() || gen != run_generation_) return;
        ControllerEvent e;
        e.kind = EventKind::tts_done;
        e.time = scheduler_.now();
        e.ref = gen;
        dispatch(e);
        run_.reset();
        run_generation_ = 0;
    });
}

void Session::enqueue_playout(std::uint64_t gen, const audio::AudioFrame& frame) {
    if (gen != run_generation_) return;
    playout_.push_back({gen, frame});
    schedule_release();
}

void Session::schedule_release() {
    if (release_pending_ || playout_.empty()) return;
    release_pending_ = true;
    const auto epoch = playout_epoch_;
    scheduler_.post_at(std::max(scheduler_.now(), next_release_), [this, life = life_, epoch] {
        if (life.cancelled() || epoch != playout_epoch_) return;
        release_pending_ = false;
        release();
    });
}

void Session::release() {
    if (playout_.empty()) return;
    auto q = std::move(playout_.front());
    playout_.pop_front();
    next_release_ = scheduler_.now() + audio::kFrameSeconds;
    ControllerEvent e;
    e.kind = EventKind::tts_audio_chunk;
    e.time = scheduler_.now();
    e.ref = q.generation;
    e.frame = q.frame;
    dispatch(e);
    schedule_release();
    maybe_post_done();
}

void Session::flush_playout() {
    playout_.clear();
    release_pending_ = false;
    ++playout_epoch_;
}

void Session::update_watchdog() {
    const auto s = controller_.state();
    const bool waiting = s == TurnState::awaiting_eot || (s == TurnState::idle && controller_.turn_pending());
    if (!waiting) {
        if (armed_) {
            armed_ = false;
            ++episode_;
        }
        return;
    }
    if (armed_ || !controller_.transcript().all_transcribed()) return;
    // Silence is measured from the later of the last voice boundary and the
    // moment the transcript became available.
    armed_ = true;
    fired_ = false;
    reference_ = std::max(controller_.last_voice_time(), scheduler_.now());
    const auto episode = episode_;
    scheduler_.post_at(reference_ + settings_.silence_timeout, [this, life = life_, episode] {
        if (!life.cancelled()) on_watchdog(episode);
    });
}

void Session::on_watchdog(std::uint64_t episode) {
    if (episode != episode_ || !armed_) return;
    const auto ev = silence_watchdog(controller_.state(), controller_.turn_pending(), reference_, scheduler_.now(),
                                     settings_.silence_timeout, fired_);
    if (!ev) return;
    ++stats_.timeouts;
    dispatch(*ev);
}

}  // namespace duplex::turn
