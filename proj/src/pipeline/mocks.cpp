#include "duplex/pipeline/mocks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "duplex/util/text.hpp"

namespace duplex::pipeline {
namespace {

std::vector<std::string> word_chunks(const std::string& text) {
    // Each chunk keeps its trailing space so the concatenation is the text.
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        cur += c;
        if (c == ' ') {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Streams `chunks` starting at `first` with `interval` spacing.
void stream_chunks(Scheduler& s, std::vector<std::string> chunks, double first, double interval, int fail_after,
                   TextStreamHandler out, CancelToken cancel, std::size_t* suppressed) {
    const double t0 = s.now() + first;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (fail_after >= 0 && static_cast<int>(i) == fail_after) {
            s.post_at(t0 + interval * double(i), [out, cancel, suppressed] {
                if (cancel.cancelled()) {
                    ++*suppressed;
                    return;
                }
                if (out.on_error) out.on_error("mock llm: injected failure");
            });
            return;
        }
        s.post_at(t0 + interval * double(i), [out, cancel, suppressed, c = chunks[i]] {
            if (cancel.cancelled()) {
                ++*suppressed;
                return;
            }
            if (out.on_text) out.on_text(c);
        });
    }
    const double t_end = t0 + interval * double(chunks.empty() ? 0 : chunks.size() - 1);
    s.post_at(t_end, [out, cancel, suppressed] {
        if (cancel.cancelled()) {
            ++*suppressed;
            return;
        }
        if (out.on_done) out.on_done();
    });
}

}  // namespace

MockAsr::MockAsr(Scheduler& scheduler, MockAsrConfig config) : scheduler_(scheduler), config_(std::move(config)) {}

void MockAsr::transcribe(AudioSegment segment, audio::Language, std::function<void(AsrResult)> done,
                         CancelToken cancel) {
    ++calls_;
    AsrResult r;
    if (config_.fail) {
        r.ok = false;
        r.error = "mock asr: injected failure";
    } else {
        r.text = config_.transcribe ? config_.transcribe(segment) : "hello";
    }
    scheduler_.post_after(config_.delay, [this, r = std::move(r), done = std::move(done), cancel] {
        if (cancel.cancelled()) {
            ++suppressed_;
            return;
        }
        done(r);
    });
}

MockTextLlm::MockTextLlm(Scheduler& scheduler, MockLlmConfig config)
    : scheduler_(scheduler), config_(std::move(config)) {}

void MockTextLlm::generate(const DialogueContext&, const std::string& user_text, TextStreamHandler out,
                           CancelToken cancel) {
    ++calls_;
    last_user_text_ = user_text;
    std::string reply;
    if (config_.respond) {
        reply = config_.respond(user_text);
    } else {
        reply = user_text == "hello" ? "hi there" : "you said: " + user_text;
    }
    stream_chunks(scheduler_, word_chunks(reply), config_.first_token_delay, config_.token_interval,
                  config_.fail_after_chunks, std::move(out), std::move(cancel), &suppressed_);
}

MockAudioLlm::MockAudioLlm(Scheduler& scheduler, MockAudioLlmConfig config)
    : scheduler_(scheduler), config_(std::move(config)) {}

void MockAudioLlm::generate(const DialogueContext&, const AudioLlmInput& input, TextStreamHandler out,
                            CancelToken cancel) {
    ++calls_;
    last_input_ = input;
    std::string reply;
    if (config_.respond) {
        reply = config_.respond(input);
    } else {
        std::size_t frames = 0;
        for (const auto& seg : input.audio) frames += seg.size();
        reply = double(frames) * audio::kFrameSeconds >= 2.0 - 1e-9 ? "long" : "short";
    }
    stream_chunks(scheduler_, word_chunks(reply), config_.first_token_delay, 0.0, -1, std::move(out),
                  std::move(cancel), &suppressed_);
}

namespace {

class MockTtsStream final : public TtsStream {
public:
    MockTtsStream(Scheduler& s, MockTtsConfig c, TtsHandler out, CancelToken cancel,
                  std::shared_ptr<std::size_t> emitted, std::shared_ptr<std::size_t> suppressed)
        : s_(s),
          c_(c),
          out_(std::move(out)),
          cancel_(std::move(cancel)),
          emitted_(std::move(emitted)),
          suppressed_(std::move(suppressed)) {}

    void push_text(const std::string& text) override {
        const auto n = text::utf8_codepoints(text).size() * c_.frames_per_char;
        for (std::size_t i = 0; i < n; ++i) {
            double t;
            if (!started_) {
                t = s_.now() + c_.first_frame_delay;
                started_ = true;
            } else {
                t = std::max(s_.now(), next_free_);
            }
            next_free_ = t + c_.frame_interval;
            audio::AudioFrame f;
            f.index = frame_++;
            for (std::size_t k = 0; k < audio::kFrameSamples; ++k) {
                const double n_abs = double(f.index) * audio::kFrameSamples + double(k);
                f.samples[k] = float(c_.amplitude * std::sin(2.0 * std::numbers::pi * c_.tone_hz * n_abs /
                                                             audio::kSampleRate));
            }
            last_ = t;
            s_.post_at(t, [out = out_, cancel = cancel_, emitted = emitted_, suppressed = suppressed_, f] {
                if (cancel.cancelled()) {
                    ++*suppressed;
                    return;
                }
                ++*emitted;
                out.on_frame(f);
            });
        }
    }

    void finish() override {
        const double t = std::max(s_.now(), last_);
        s_.post_at(t, [out = out_, cancel = cancel_, suppressed = suppressed_] {
            if (cancel.cancelled()) {
                ++*suppressed;
                return;
            }
            if (out.on_done) out.on_done();
        });
    }

private:
    Scheduler& s_;
    MockTtsConfig c_;
    TtsHandler out_;
    CancelToken cancel_;
    std::shared_ptr<std::size_t> emitted_;
    std::shared_ptr<std::size_t> suppressed_;
    bool started_ = false;
    double next_free_ = 0.0;
    double last_ = 0.0;
    std::int64_t frame_ = 0;
};

}  // namespace

MockTts::MockTts(Scheduler& scheduler, MockTtsConfig config) : scheduler_(scheduler), config_(config) {}

std::unique_ptr<TtsStream> MockTts::open(TtsRequest request, TtsHandler out, CancelToken cancel) {
    ++streams_;
    last_request_ = std::move(request);
    return std::make_unique<MockTtsStream>(scheduler_, config_, std::move(out), std::move(cancel), frames_emitted_,
                                           suppressed_);
}

MockToolExecutor::MockToolExecutor(Scheduler& scheduler, MockToolConfig config)
    : scheduler_(scheduler), config_(std::move(config)) {}

void MockToolExecutor::call(const ToolCall& call, std::function<void(std::optional<ToolResult>, std::string)> done,
                            CancelToken cancel) {
    ++calls_;
    ToolResult r{call.name, config_.content ? config_.content(call) : call.name + " result for: " + call.query};
    scheduler_.post_after(config_.delay, [r = std::move(r), done = std::move(done), cancel] {
        if (!cancel.cancelled()) done(r, "");
    });
}

}  // namespace duplex::pipeline
