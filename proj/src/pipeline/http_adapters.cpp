#include "duplex/pipeline/http_adapters.hpp"

#include <httplib.h>

#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <json.hpp>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "duplex/audio/wav.hpp"
#include "duplex/pipeline/context.hpp"
#include "duplex/util/text.hpp"

namespace duplex::pipeline {
namespace {

using nlohmann::json;

struct Target {
    std::string base;  // scheme://host:port
    std::string path;
};

Target split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || scheme + 3 >= url.size()) {
        throw std::invalid_argument("http endpoint: url needs a scheme and host: '" + url + "'");
    }
    const auto slash = url.find('/', scheme + 3);
    return {url.substr(0, slash), slash == std::string::npos ? "/" : url.substr(slash)};
}

// Blocking POST. Returns the body or throws std::runtime_error.
template <class Send>
std::string post(const HttpEndpoint& ep, const std::string& what, Send send) {
    const auto target = split_url(ep.url);
    httplib::Client client(target.base);
    const auto ms = ep.timeout.count();
    client.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
    client.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
    httplib::Headers headers;
    if (!ep.auth_header.empty()) {
        const char* value = ep.auth_env.empty() ? nullptr : std::getenv(ep.auth_env.c_str());
        if (value) headers.emplace(ep.auth_header, value);
    }
    httplib::Result res = send(client, target.path, headers);
    if (!res) throw std::runtime_error(what + ": " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error(what + ": HTTP " + std::to_string(res->status));
    return res->body;
}

std::string wav_bytes(const AudioSegment& seg) {
    const auto bytes = audio::serialize_wav(audio::concat_samples(seg));
    return std::string(bytes.begin(), bytes.end());
}

json context_json(const DialogueContext& ctx) {
    auto out = json::array();
    for (const auto& t : ctx.turns) {
        out.push_back({{"role", t.role == Role::agent ? "assistant" : to_string(t.role)}, {"content", t.text}});
    }
    return out;
}

std::string reply_text(const std::string& body, const std::string& what) {
    try {
        const auto j = json::parse(body);
        if (j.contains("text")) return j.at("text").get<std::string>();
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw std::runtime_error(what + ": malformed reply: " + e.what());
    }
}

// Streams a completed reply word by word on the scheduler.
void deliver_text(const std::shared_ptr<Mailbox>& mailbox, std::string reply, std::string error,
                  TextStreamHandler out, CancelToken cancel) {
    mailbox->post([reply = std::move(reply), error = std::move(error), out = std::move(out), cancel] {
        if (cancel.cancelled()) return;
        if (!error.empty()) {
            if (out.on_error) out.on_error(error);
            return;
        }
        std::string word;
        for (char c : reply) {
            word += c;
            if (c == ' ') {
                if (out.on_text) out.on_text(word);
                if (cancel.cancelled()) return;
                word.clear();
            }
        }
        if (!word.empty() && out.on_text) out.on_text(word);
        if (!cancel.cancelled() && out.on_done) out.on_done();
    });
}

// Index just past the first sentence end in `s`, or npos.
std::size_t sentence_end(const std::string& s) {
    std::size_t best = std::string::npos;
    for (const char* mark : {".", "!", "?", "\n", "\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"}) {
        const auto p = s.find(mark);
        if (p != std::string::npos) best = std::min(best, p + std::char_traits<char>::length(mark));
    }
    return best;
}

class HttpTtsStream final : public TtsStream {
public:
    HttpTtsStream(std::shared_ptr<Mailbox> mailbox, HttpEndpoint ep, TtsRequest req, TtsHandler out,
                  CancelToken cancel)
        : shared_(std::make_shared<Shared>()) {
        std::thread([s = shared_, mailbox = std::move(mailbox), ep = std::move(ep), req = std::move(req),
                     out = std::move(out), cancel] { work(*s, *mailbox, ep, req, out, cancel); })
            .detach();
    }

    ~HttpTtsStream() override {
        std::lock_guard lock(shared_->mu);
        shared_->stopped = true;
        shared_->cv.notify_all();
    }

    void push_text(const std::string& t) override {
        pending_ += t;
        for (auto end = sentence_end(pending_); end != std::string::npos; end = sentence_end(pending_)) {
            enqueue(pending_.substr(0, end));
            pending_.erase(0, end);
        }
    }

    void finish() override {
        enqueue(pending_);
        pending_.clear();
        std::lock_guard lock(shared_->mu);
        shared_->finished = true;
        shared_->cv.notify_all();
    }

private:
    struct Shared {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::string> sentences;
        bool finished = false;
        bool stopped = false;
    };

    void enqueue(const std::string& sentence) {
        const auto s = std::string(text::trim(sentence));
        if (s.empty()) return;
        std::lock_guard lock(shared_->mu);
        shared_->sentences.push_back(s);
        shared_->cv.notify_all();
    }

    static void work(Shared& s, Mailbox& mailbox, const HttpEndpoint& ep, const TtsRequest& req,
                     const TtsHandler& out, const CancelToken& cancel) {
        std::int64_t index = 0;
        while (true) {
            std::string sentence;
            {
                std::unique_lock lock(s.mu);
                s.cv.wait(lock, [&] { return s.stopped || !s.sentences.empty() || s.finished; });
                if (s.stopped || cancel.cancelled()) return;
                if (s.sentences.empty()) {
                    mailbox.post([out, cancel] {
                        if (!cancel.cancelled() && out.on_done) out.on_done();
                    });
                    return;
                }
                sentence = std::move(s.sentences.front());
                s.sentences.pop_front();
            }
            std::vector<audio::AudioFrame> frames;
            try {
                const auto body = post(ep, "tts", [&](httplib::Client& c, const std::string& path,
                                                      const httplib::Headers& h) {
                    httplib::MultipartFormDataItems items{{"text", sentence, "", "text/plain"}};
                    for (std::size_t i = 0; i < req.conditioning.size(); ++i) {
                        items.push_back({"conditioning" + std::to_string(i), wav_bytes(req.conditioning[i]),
                                         "conditioning" + std::to_string(i) + ".wav", "audio/wav"});
                    }
                    return c.Post(path, h, items);
                });
                const auto pcm = audio::decode_pcm16(
                    std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size() & ~std::size_t(1)));
                frames = audio::frame_stream(pcm, audio::kSampleRate, index);
                index += static_cast<std::int64_t>(frames.size());
            } catch (const std::exception& e) {
                mailbox.post([out, cancel, error = std::string(e.what())] {
                    if (!cancel.cancelled() && out.on_error) out.on_error(error);
                });
                return;
            }
            mailbox.post([out, cancel, frames = std::move(frames)] {
                for (const auto& f : frames) {
                    if (cancel.cancelled()) return;
                    if (out.on_frame) out.on_frame(f);
                }
            });
        }
    }

    std::shared_ptr<Shared> shared_;
    std::string pending_;
};

}  // namespace

void HttpEndpoint::validate() const {
    (void)split_url(url);
    if (timeout.count() <= 0) throw std::invalid_argument("http endpoint: timeout must be positive");
}

HttpAsr::HttpAsr(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint)
    : mailbox_(std::move(mailbox)), endpoint_(std::move(endpoint)) {
    endpoint_.validate();
}

void HttpAsr::transcribe(AudioSegment segment, audio::Language language, std::function<void(AsrResult)> done,
                         CancelToken cancel) {
    std::thread([mailbox = mailbox_, ep = endpoint_, segment = std::move(segment), language, done = std::move(done),
                 cancel] {
        AsrResult r;
        try {
            const auto body = post(ep, "asr", [&](httplib::Client& c, const std::string& path,
                                                  const httplib::Headers& h) {
                return c.Post(path + "?lang=" + audio::to_string(language), h, wav_bytes(segment), "audio/wav");
            });
            r.text = json::parse(body).at("text").get<std::string>();
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
        mailbox->post([r = std::move(r), done, cancel] {
            if (!cancel.cancelled()) done(r);
        });
    }).detach();
}

HttpTextLlm::HttpTextLlm(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint, std::string system_prompt)
    : mailbox_(std::move(mailbox)), endpoint_(std::move(endpoint)), system_prompt_(std::move(system_prompt)) {
    endpoint_.validate();
}

void HttpTextLlm::generate(const DialogueContext& context, const std::string& user_text, TextStreamHandler out,
                           CancelToken cancel) {
    auto messages = json::array();
    if (!system_prompt_.empty()) messages.push_back({{"role", "system"}, {"content", system_prompt_}});
    for (auto& m : context_json(context)) messages.push_back(std::move(m));
    messages.push_back({{"role", "user"}, {"content", user_text}});
    const json request{{"messages", messages}};
    std::thread([mailbox = mailbox_, ep = endpoint_, body = request.dump(), out = std::move(out), cancel] {
        std::string reply, error;
        try {
            reply = reply_text(post(ep, "llm",
                                    [&](httplib::Client& c, const std::string& path, const httplib::Headers& h) {
                                        return c.Post(path, h, body, "application/json");
                                    }),
                               "llm");
        } catch (const std::exception& e) {
            error = e.what();
        }
        deliver_text(mailbox, std::move(reply), std::move(error), out, cancel);
    }).detach();
}

HttpAudioLlm::HttpAudioLlm(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint)
    : mailbox_(std::move(mailbox)), endpoint_(std::move(endpoint)) {
    endpoint_.validate();
}

void HttpAudioLlm::generate(const DialogueContext& context, const AudioLlmInput& input, TextStreamHandler out,
                            CancelToken cancel) {
    httplib::MultipartFormDataItems items{{"prompt", input.prompt, "", "text/plain"},
                                          {"context", context_json(context).dump(), "", "application/json"}};
    for (std::size_t i = 0; i < input.audio.size(); ++i) {
        items.push_back({"audio" + std::to_string(i), wav_bytes(input.audio[i]), "audio" + std::to_string(i) + ".wav",
                         "audio/wav"});
    }
    std::thread([mailbox = mailbox_, ep = endpoint_, items = std::move(items), out = std::move(out), cancel] {
        std::string reply, error;
        try {
            reply = reply_text(post(ep, "audio llm",
                                    [&](httplib::Client& c, const std::string& path, const httplib::Headers& h) {
                                        return c.Post(path, h, items);
                                    }),
                               "audio llm");
        } catch (const std::exception& e) {
            error = e.what();
        }
        deliver_text(mailbox, std::move(reply), std::move(error), out, cancel);
    }).detach();
}

HttpTts::HttpTts(std::shared_ptr<Mailbox> mailbox, HttpEndpoint endpoint)
    : mailbox_(std::move(mailbox)), endpoint_(std::move(endpoint)) {
    endpoint_.validate();
}

std::unique_ptr<TtsStream> HttpTts::open(TtsRequest request, TtsHandler out, CancelToken cancel) {
    return std::make_unique<HttpTtsStream>(mailbox_, endpoint_, std::move(request), std::move(out), std::move(cancel));
}

HttpToolExecutor::HttpToolExecutor(std::shared_ptr<Mailbox> mailbox, std::chrono::milliseconds timeout)
    : mailbox_(std::move(mailbox)), timeout_(timeout) {}

void HttpToolExecutor::call(const ToolCall& call, std::function<void(std::optional<ToolResult>, std::string)> done,
                            CancelToken cancel) {
    HttpEndpoint ep{call.endpoint, std::min(timeout_, call.deadline), {}, {}};
    const json request{{"tool", call.name}, {"query", call.query}};
    std::thread([mailbox = mailbox_, ep, name = call.name, body = request.dump(), done = std::move(done), cancel] {
        std::optional<ToolResult> result;
        std::string error;
        try {
            const auto reply = post(ep, "tool " + name,
                                    [&](httplib::Client& c, const std::string& path, const httplib::Headers& h) {
                                        return c.Post(path, h, body, "application/json");
                                    });
            result = ToolResult{name, json::parse(reply).at("content").get<std::string>()};
        } catch (const std::exception& e) {
            error = e.what();
        }
        mailbox->post([result = std::move(result), error = std::move(error), done, cancel] {
            if (!cancel.cancelled()) done(result, error);
        });
    }).detach();
}

}  // namespace duplex::pipeline
