#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "duplex/pipeline/components.hpp"
#include "duplex/pipeline/tools.hpp"
#include "duplex/runtime/scheduler.hpp"

namespace duplex::pipeline {

// Adapters for remote components over HTTP. Requests run on background
// threads; results come back through the session's mailbox, so nothing is
// delivered after the mailbox closes.
//
// Wire contracts:
//   ASR        POST <url>?lang=<en|zh>, body audio/wav  -> {"text": "..."}
//   Text LLM   POST <url> {"messages": [{"role", "content"}...]}
//              -> {"choices": [{"message": {"content": "..."}}]} or {"text": "..."}
//   AudioLLM   POST <url> multipart: prompt, context (JSON), audio0..N (wav) -> {"text": "..."}
//   TTS        POST <url> multipart: text, conditioning0..N (wav)
//              -> raw PCM16 little-endian, 16 kHz mono
//   Tool       POST <endpoint> {"tool": "...", "query": "..."} -> {"content": "..."}

struct HttpEndpoint {
    std::string url;
    std::chrono::milliseconds timeout{5000};
    // Optional header carrying a credential read from `auth_env`.
    std::string auth_header;
    std::string auth_env;

    /// Throws std::invalid_argument on a URL without scheme and host.
    void validate() const;
};

class HttpAsr final : public AsrComponent {
public:
    HttpAsr(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint);
    void transcribe(AudioSegment segment, audio::Language language, std::function<void(AsrResult)> done,
                    CancelToken cancel) override;

private:
    std::shared_ptr<Mailbox> mailbox_;
    HttpEndpoint endpoint_;
};

/// Requests the whole reply, then streams it word by word.
class HttpTextLlm final : public TextLlmComponent {
public:
    HttpTextLlm(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint, std::string system_prompt = {});
    void generate(const DialogueContext& context, const std::string& user_text, TextStreamHandler out,
                  CancelToken cancel) override;

private:
    std::shared_ptr<Mailbox> mailbox_;
    HttpEndpoint endpoint_;
    std::string system_prompt_;
};

class HttpAudioLlm final : public AudioLlmComponent {
public:
    HttpAudioLlm(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint);
    void generate(const DialogueContext& context, const AudioLlmInput& input, TextStreamHandler out,
                  CancelToken cancel) override;

private:
    std::shared_ptr<Mailbox> mailbox_;
    HttpEndpoint endpoint_;
};

/// Synthesizes sentence by sentence, in order, as text arrives.
class HttpTts final : public TtsComponent {
public:
    HttpTts(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint);
    std::unique_ptr<TtsStream> open(TtsRequest request, TtsHandler out, CancelToken cancel) override;

private:
    std::shared_ptr<Mailbox> mailbox_;
    HttpEndpoint endpoint_;
};

class HttpToolExecutor final : public ToolExecutor {
public:
    HttpToolExecutor(std::shared_ptr<Mailbox> mailbox, std::chrono::milliseconds timeout = std::chrono::seconds(5));
    void call(const ToolCall& call, std::function<void(std::optional<ToolResult>, std::string)> done,
              CancelToken cancel) override;

private:
    std::shared_ptr<Mailbox> mailbox_;
    std::chrono::milliseconds timeout_;
};

}  // namespace duplex::pipeline
