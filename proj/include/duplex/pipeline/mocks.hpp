#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "duplex/pipeline/components.hpp"
#include "duplex/pipeline/tools.hpp"
#include "duplex/runtime/scheduler.hpp"

namespace duplex::pipeline {

// Deterministic stand-ins with fixed simulated delays. Every mock checks its
// cancel token before each delivery and counts what it suppressed.

struct MockAsrConfig {
    double delay = 0.0;
    // Default: the fixed text "hello".
    std::function<std::string(const AudioSegment&)> transcribe;
    bool fail = false;
};

class MockAsr final : public AsrComponent {
public:
    MockAsr(Scheduler& scheduler, MockAsrConfig config = {});
    void transcribe(AudioSegment segment, audio::Language language, std::function<void(AsrResult)> done,
                    CancelToken cancel) override;

    std::size_t calls() const { return calls_; }
    std::size_t suppressed() const { return suppressed_; }

private:
    Scheduler& scheduler_;
    MockAsrConfig config_;
    std::size_t calls_ = 0;
    std::size_t suppressed_ = 0;
};

struct MockLlmConfig {
    double first_token_delay = 0.0;
    double token_interval = 0.0;
    // Default: "hello" -> "hi there", anything else -> "you said: <text>".
    std::function<std::string(const std::string&)> respond;
    // Fail with an error after this many chunks (negative: never).
    int fail_after_chunks = -1;
};

/// Streams the response word by word.
class MockTextLlm final : public TextLlmComponent {
public:
    MockTextLlm(Scheduler& scheduler, MockLlmConfig config = {});
    void generate(const DialogueContext& context, const std::string& user_text, TextStreamHandler out,
                  CancelToken cancel) override;

    std::size_t calls() const { return calls_; }
    std::size_t suppressed() const { return suppressed_; }
    const std::string& last_user_text() const { return last_user_text_; }

private:
    Scheduler& scheduler_;
    MockLlmConfig config_;
    std::size_t calls_ = 0;
    std::size_t suppressed_ = 0;
    std::string last_user_text_;
};

struct MockAudioLlmConfig {
    double first_token_delay = 0.0;
    // Default: total audio >= 2 s -> "long", else "short".
    std::function<std::string(const AudioLlmInput&)> respond;
};

class MockAudioLlm final : public AudioLlmComponent {
public:
    MockAudioLlm(Scheduler& scheduler, MockAudioLlmConfig config = {});
    void generate(const DialogueContext& context, const AudioLlmInput& input, TextStreamHandler out,
                  CancelToken cancel) override;

    std::size_t calls() const { return calls_; }
    std::size_t suppressed() const { return suppressed_; }
    const AudioLlmInput& last_input() const { return last_input_; }

private:
    Scheduler& scheduler_;
    MockAudioLlmConfig config_;
    std::size_t calls_ = 0;
    std::size_t suppressed_ = 0;
    AudioLlmInput last_input_;
};

struct MockTtsConfig {
    double first_frame_delay = 0.0;
    // Synthesis time per frame after the first.
    double frame_interval = 0.0;
    std::size_t frames_per_char = 1;
    double tone_hz = 220.0;
    double amplitude = 0.1;
};

class MockTts final : public TtsComponent {
public:
    MockTts(Scheduler& scheduler, MockTtsConfig config = {});
    std::unique_ptr<TtsStream> open(TtsRequest request, TtsHandler out, CancelToken cancel) override;

    std::size_t streams() const { return streams_; }
    std::size_t frames_emitted() const { return *frames_emitted_; }
    std::size_t suppressed() const { return *suppressed_; }
    const TtsRequest& last_request() const { return last_request_; }

private:
    Scheduler& scheduler_;
    MockTtsConfig config_;
    std::size_t streams_ = 0;
    std::shared_ptr<std::size_t> frames_emitted_ = std::make_shared<std::size_t>(0);
    std::shared_ptr<std::size_t> suppressed_ = std::make_shared<std::size_t>(0);
    TtsRequest last_request_;
};

struct MockToolConfig {
    double delay = 0.0;
    // Default content: "<tool> result for: <query>".
    std::function<std::string(const ToolCall&)> content;
};

class MockToolExecutor final : public ToolExecutor {
public:
    MockToolExecutor(Scheduler& scheduler, MockToolConfig config = {});
    void call(const ToolCall& call, std::function<void(std::optional<ToolResult>, std::string)> done,
              CancelToken cancel) override;

    std::size_t calls() const { return calls_; }

private:
    Scheduler& scheduler_;
    MockToolConfig config_;
    std::size_t calls_ = 0;
};

}  // namespace duplex::pipeline
