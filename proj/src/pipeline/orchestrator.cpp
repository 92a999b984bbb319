#include "duplex/pipeline/orchestrator.hpp"

#include <stdexcept>

namespace duplex::pipeline {
namespace {

class Run final : public PipelineRun, public std::enable_shared_from_this<Run> {
public:
    Run(PipelineMode mode, Scheduler& s, TurnInput turn, DialogueContext& ctx, const PipelineComponents& c,
        PipelineEvents ev)
        : mode_(mode), s_(s), turn_(std::move(turn)), ctx_(ctx), c_(c), ev_(std::move(ev)) {}

    void start() {
        if (!turn_.agent_initiated) ctx_.add(Role::user, turn_.text);
        std::optional<ToolCall> call;
        if (c_.tools && !turn_.agent_initiated) call = decide_tool(turn_.text, c_.registry);
        if (!call) {
            generate("");
            return;
        }
        event("tool_called", call->name);
        auto self = shared_from_this();
        auto settled = std::make_shared<bool>(false);
        const double deadline = std::chrono::duration<double>(call->deadline).count();
        s_.post_after(deadline, [self, settled, name = call->name] {
            if (*settled || self->done_) return;
            *settled = true;
            self->event("tool_timeout", name);
            self->generate("");
        });
        c_.tools->call(
            *call,
            [self, settled](std::optional<ToolResult> result, std::string error) {
                if (*settled || self->done_) return;
                *settled = true;
                std::string block;
                if (result && !result->content.empty()) {
                    block = inject_tool_result(*result);
                    self->ctx_.add(Role::tool, block);
                } else {
                    self->event("tool_error", error);
                }
                self->generate(block);
            },
            token_);
    }

    void cancel() override {
        if (done_) return;
        token_.cancel();
        done_ = true;
        std::string text = response_;
        if (!text.empty() && text.back() != ' ') text += ' ';
        text += kInterruptedMark;
        ctx_.add(Role::agent, std::move(text), true);
    }

    bool finished() const override { return done_; }
    const std::string& response_text() const override { return response_; }

private:
    void event(const std::string& name, const std::string& detail) {
        if (ev_.on_event) ev_.on_event(name, detail);
    }

    void fail(const std::string& error) {
        if (done_) return;
        token_.cancel();
        done_ = true;
        if (ev_.on_error) ev_.on_error(error);
    }

    void generate(const std::string& tool_block) {
        if (done_) return;
        auto self = shared_from_this();
        TtsRequest req;
        if (mode_ == PipelineMode::semi_cascaded) req.conditioning = turn_.segments;
        // The TTS stream is owned by this run, so its callbacks hold a weak
        // reference to avoid a cycle.
        std::weak_ptr<Run> weak = self;
        TtsHandler th;
        th.on_frame = [weak](const audio::AudioFrame& f) {
            auto r = weak.lock();
            if (r && !r->done_ && r->ev_.on_frame) r->ev_.on_frame(f);
        };
        th.on_done = [weak] {
            auto r = weak.lock();
            if (!r || r->done_) return;
            r->done_ = true;
            r->ctx_.add(Role::agent, r->response_);
            if (r->ev_.on_done) r->ev_.on_done();
        };
        th.on_error = [weak](const std::string& e) {
            if (auto r = weak.lock()) r->fail("tts: " + e);
        };
        tts_ = c_.tts->open(std::move(req), std::move(th), token_);

        TextStreamHandler out;
        out.on_text = [self](const std::string& chunk) {
            if (self->done_) return;
            self->response_ += chunk;
            if (self->ev_.on_text) self->ev_.on_text(chunk);
            self->tts_->push_text(chunk);
        };
        out.on_done = [self] {
            if (!self->done_) self->tts_->finish();
        };
        out.on_error = [self](const std::string& e) { self->fail("llm: " + e); };

        if (mode_ == PipelineMode::cascaded) {
            std::string user = turn_.text;
            if (!tool_block.empty()) user = tool_block + "\n\n" + user;
            c_.llm->generate(ctx_, user, std::move(out), token_);
        } else {
            AudioLlmInput in;
            in.prompt = tool_block.empty() ? std::string(kUserAudioMarker) : tool_block + "\n\n" + kUserAudioMarker;
            if (turn_.agent_initiated) in.prompt = turn_.text;
            in.audio = turn_.segments;
            c_.audio_llm->generate(ctx_, in, std::move(out), token_);
        }
    }

    PipelineMode mode_;
    Scheduler& s_;
    TurnInput turn_;
    DialogueContext& ctx_;
    const PipelineComponents& c_;
    PipelineEvents ev_;
    CancelToken token_;
    std::unique_ptr<TtsStream> tts_;
    std::string response_;
    bool done_ = false;
};

}  // namespace

std::string to_string(PipelineMode m) { return m == PipelineMode::cascaded ? "cascaded" : "semi_cascaded"; }

PipelineMode pipeline_mode_from_string(const std::string& s) {
    if (s == "cascaded") return PipelineMode::cascaded;
    if (s == "semi_cascaded" || s == "semi-cascaded") return PipelineMode::semi_cascaded;
    throw std::invalid_argument("unknown pipeline mode '" + s + "' (expected cascaded or semi_cascaded)");
}

std::shared_ptr<PipelineRun> run_pipeline(PipelineMode mode, Scheduler& scheduler, TurnInput turn,
                                          DialogueContext& context, const PipelineComponents& components,
                                          PipelineEvents events) {
    if (turn.text.empty() && !turn.agent_initiated) return nullptr;
    if (!components.tts) throw std::invalid_argument("pipeline: no TTS component");
    if (mode == PipelineMode::cascaded && !components.llm) throw std::invalid_argument("pipeline: no text LLM");
    if (mode == PipelineMode::semi_cascaded && !components.audio_llm) {
        throw std::invalid_argument("pipeline: no AudioLLM");
    }
    auto run = std::make_shared<Run>(mode, scheduler, std::move(turn), context, components, std::move(events));
    run->start();
    return run;
}

std::shared_ptr<PipelineRun> run_cascaded(Scheduler& scheduler, TurnInput turn, DialogueContext& context,
                                          const PipelineComponents& components, PipelineEvents events) {
    return run_pipeline(PipelineMode::cascaded, scheduler, std::move(turn), context, components, std::move(events));
}

std::shared_ptr<PipelineRun> run_semi_cascaded(Scheduler& scheduler, TurnInput turn, DialogueContext& context,
                                               const PipelineComponents& components, PipelineEvents events) {
    return run_pipeline(PipelineMode::semi_cascaded, scheduler, std::move(turn), context, components,
                        std::move(events));
}

}  // namespace duplex::pipeline
