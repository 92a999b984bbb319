#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "duplex/audio/frame.hpp"
#include "duplex/pipeline/context.hpp"
#include "duplex/runtime/scheduler.hpp"

namespace duplex::pipeline {

using AudioSegment = std::vector<audio::AudioFrame>;

/// Streaming text callbacks shared by the LLM contracts. Exactly one of
/// on_done / on_error ends a stream. None fire after the token is cancelled.
struct TextStreamHandler {
    std::function<void(const std::string& chunk)> on_text;
    std::function<void()> on_done;
    std::function<void(const std::string& error)> on_error;
};

struct AsrResult {
    std::string text;
    bool ok = true;
    std::string error;
};

/// Segment audio in, transcript out. Callbacks run on the caller's scheduler.
class AsrComponent {
public:
    virtual ~AsrComponent() = default;
    virtual void transcribe(AudioSegment segment, audio::Language language,
                            std::function<void(AsrResult)> done, CancelToken cancel) = 0;
};

class TextLlmComponent {
public:
    virtual ~TextLlmComponent() = default;
    virtual void generate(const DialogueContext& context, const std::string& user_text, TextStreamHandler out,
                          CancelToken cancel) = 0;
};

/// Input to a speech-in, text-out model: an optional textual preamble (tool
/// blocks) and the user's original audio.
struct AudioLlmInput {
    // Text blocks followed by kUserAudioMarker standing for the audio.
    std::string prompt;
    std::vector<AudioSegment> audio;
};

inline constexpr const char* kUserAudioMarker = "<user_audio>";

class AudioLlmComponent {
public:
    virtual ~AudioLlmComponent() = default;
    virtual void generate(const DialogueContext& context, const AudioLlmInput& input, TextStreamHandler out,
                          CancelToken cancel) = 0;
};

struct TtsRequest {
    // Semi-cascaded mode conditions synthesis on the user's audio.
    std::vector<AudioSegment> conditioning;
};

struct TtsHandler {
    std::function<void(const audio::AudioFrame& frame)> on_frame;
    std::function<void()> on_done;
    std::function<void(const std::string& error)> on_error;
};

/// Incremental text input to one synthesis. finish() marks the end of text.
class TtsStream {
public:
    virtual ~TtsStream() = default;
    virtual void push_text(const std::string& text) = 0;
    virtual void finish() = 0;
};

class TtsComponent {
public:
    virtual ~TtsComponent() = default;
    virtual std::unique_ptr<TtsStream> open(TtsRequest request, TtsHandler out, CancelToken cancel) = 0;
};

}  // namespace duplex::pipeline
