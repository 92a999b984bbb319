#include "duplex/gateway/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "duplex/audio/wav.hpp"

namespace duplex::gateway {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

struct Outgoing {
    enum class Kind { text, binary, purge, close };
    Kind kind = Kind::text;
    std::string data;
    CloseCode code = CloseCode::expected_config;
};

std::string pair_bytes(const audio::AudioFrame& a, const audio::AudioFrame* b) {
    std::vector<float> pcm(a.samples.begin(), a.samples.end());
    if (b) {
        pcm.insert(pcm.end(), b->samples.begin(), b->samples.end());
    } else {
        pcm.resize(2 * audio::kFrameSamples, 0.0f);
    }
    const auto bytes = audio::encode_pcm16(pcm);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace

class Connection;

struct Server::Impl {
    ServerConfig config;
    std::shared_ptr<const SessionFactory> factory;
    net::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
    std::vector<std::thread> threads;

    mutable std::mutex mu;
    std::vector<std::weak_ptr<Connection>> connections;
    std::size_t active = 0;
    std::uint64_t sessions_opened = 0;
    bool started = false;
    bool stopped = false;
    bool finished = false;
    std::condition_variable stopped_cv;

    explicit Impl(ServerConfig c) : config(std::move(c)) {
        config.validate();
        factory = std::make_shared<const SessionFactory>(config.session);
        if (!config.trace_dir.empty()) std::filesystem::create_directories(config.trace_dir);
    }

    // Reserves a session slot and names the session, or returns nullopt when full.
    std::optional<std::string> acquire() {
        std::lock_guard lock(mu);
        if (active >= config.max_sessions) return std::nullopt;
        ++active;
        return "s" + std::to_string(++sessions_opened);
    }
    void release() {
        std::lock_guard lock(mu);
        --active;
    }

    void accept();
};

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}
    ~Connection() { teardown(); }

    void run() {
        net::dispatch(ws_.get_executor(), [self = shared_from_this()] {
            self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            self->ws_.read_message_max(64 * 1024);
            self->ws_.async_accept([self](beast::error_code ec) {
                if (ec) return self->teardown();
                self->read();
            });
        });
    }

    // Stops the session runtime. Runs on the strand, or after the I/O threads
    // have been joined.
    void teardown() {
        if (torn_down_) return;
        torn_down_ = true;
        if (rt_) {
            rt_->mailbox->close();
            rt_->scheduler->stop();
            rt_->session.reset();
            rt_->scheduler.reset();
            rt_.reset();
            server_.release();
        }
    }

    void force_close() {
        teardown();
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    struct Runtime {
        std::string id;
        std::shared_ptr<const SessionFactory> factory;
        std::unique_ptr<RealtimeScheduler> scheduler;
        std::shared_ptr<Mailbox> mailbox;
        std::unique_ptr<turn::Session> session;
        std::ofstream trace;

        // Filled by the reader, drained on the scheduler.
        std::mutex mu;
        std::deque<std::array<float, audio::kFrameSamples>> inbound;
        std::size_t dropped = 0;
        bool drain_posted = false;

        // Scheduler thread only.
        std::int64_t next_index = 0;
        std::optional<audio::AudioFrame> half;
    };

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->teardown();
            const bool binary = self->ws_.got_binary();
            std::string data = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            if (!self->closing_) {
                if (!self->rt_) {
                    self->handshake(binary, data);
                } else if (binary) {
                    self->on_audio(data);
                } else {
                    self->on_control(data);
                }
            }
            self->read();
        });
    }

    void handshake(bool binary, const std::string& data) {
        json msg;
        if (!binary) msg = json::parse(data, nullptr, false);
        if (binary || !msg.is_object() || msg.value("type", "") != "config") {
            return close(CloseCode::expected_config, "first message must be a config message");
        }
        msg.erase("type");
        std::shared_ptr<const SessionFactory> factory = server_.factory;
        try {
            if (!msg.empty()) {
                auto merged = server_.config.session.to_json();
                merged.merge_patch(msg);
                factory = std::make_shared<const SessionFactory>(SessionConfig::from_json(merged));
            }
        } catch (const std::exception& e) {
            send_now(json{{"type", "error"}, {"message", e.what()}});
            return close(CloseCode::invalid_config, e.what());
        }
        const auto id = server_.acquire();
        if (!id) return close(CloseCode::server_full, "server is at its session limit");

        rt_ = std::make_unique<Runtime>();
        rt_->id = *id;
        rt_->factory = factory;
        rt_->scheduler = std::make_unique<RealtimeScheduler>();
        rt_->mailbox = std::make_shared<Mailbox>(*rt_->scheduler);
        if (!server_.config.trace_dir.empty()) {
            rt_->trace.open(std::filesystem::path(server_.config.trace_dir) / (*id + ".jsonl"));
        }
        try {
            rt_->session = factory->make(*rt_->scheduler, rt_->mailbox, *id, observer());
        } catch (const std::exception& e) {
            teardown();
            send_now(json{{"type", "error"}, {"message", e.what()}});
            return close(CloseCode::invalid_config, e.what());
        }
        send_now(json{{"type", "config"}, {"session", *id}, {"config", factory->config().to_json()}});
        send_now(json{{"type", "state"}, {"state", to_string(turn::TurnState::idle)}});
    }

    turn::SessionObserver observer() {
        std::weak_ptr<Connection> weak = weak_from_this();
        auto exec = ws_.get_executor();
        // Everything below runs on the session's scheduler thread.
        auto send = [weak, exec](Outgoing out) {
            net::post(exec, [weak, out = std::move(out)]() mutable {
                if (auto self = weak.lock()) self->enqueue(std::move(out));
            });
        };
        auto text = [send](const json& j) { send({Outgoing::Kind::text, j.dump()}); };
        Runtime* rt = rt_.get();

        turn::SessionObserver o;
        o.on_audio = [rt, send](const audio::AudioFrame& f) {
            if (rt->half && f.index == rt->half->index + 1) {
                send({Outgoing::Kind::binary, pair_bytes(*rt->half, &f)});
                rt->half.reset();
                return;
            }
            if (rt->half) send({Outgoing::Kind::binary, pair_bytes(*rt->half, nullptr)});
            rt->half = f;
        };
        o.on_halt = [rt, send, text] {
            rt->half.reset();
            send({Outgoing::Kind::purge, {}});
            text({{"type", "event"}, {"name", "halt"}, {"detail", ""}});
        };
        o.on_state = [rt, send, text](turn::TurnState s) {
            if (s != turn::TurnState::agent_speaking && rt->half) {
                send({Outgoing::Kind::binary, pair_bytes(*rt->half, nullptr)});
                rt->half.reset();
            }
            text({{"type", "state"}, {"state", to_string(s)}});
        };
        o.on_transcript = [text](const std::string& t) { text({{"type", "transcript"}, {"text", t}}); };
        o.on_response_text = [text](const std::string& chunk) {
            text({{"type", "event"}, {"name", "response_text"}, {"detail", chunk}});
        };
        o.on_event = [text](const std::string& name, const std::string& detail) {
            text({{"type", "event"}, {"name", name}, {"detail", detail}});
        };
        if (rt->trace.is_open()) {
            o.on_trace = [rt](const json& rec) { rt->trace << rec.dump() << '\n'; };
        }
        return o;
    }

    void on_audio(const std::string& data) {
        if (data.size() != kWireFrameBytes) {
            send_now(json{{"type", "error"}, {"message", "binary messages must be 640 bytes"}});
            return close(CloseCode::bad_audio, "binary messages must be 640 bytes");
        }
        const auto pcm =
            audio::decode_pcm16(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
        std::size_t dropped = 0;
        bool post = false;
        {
            std::lock_guard lock(rt_->mu);
            for (std::size_t h = 0; h < 2; ++h) {
                std::array<float, audio::kFrameSamples> frame{};
                std::copy_n(pcm.begin() + static_cast<std::ptrdiff_t>(h * audio::kFrameSamples),
                            audio::kFrameSamples, frame.begin());
                rt_->inbound.push_back(frame);
            }
            const auto before = rt_->dropped;
            while (rt_->inbound.size() > kInboundCapacityFrames) {
                rt_->inbound.pop_front();
                ++rt_->dropped;
            }
            if (rt_->dropped != before) dropped = rt_->dropped;
            post = !std::exchange(rt_->drain_posted, true);
        }
        if (dropped) {
            send_now(json{{"type", "event"}, {"name", "audio_dropped"}, {"detail", std::to_string(dropped)}});
        }
        if (post) on_scheduler([](Connection& self) { self.drain(); });
    }

    // Scheduler thread.
    void drain() {
        std::deque<std::array<float, audio::kFrameSamples>> batch;
        {
            std::lock_guard lock(rt_->mu);
            batch.swap(rt_->inbound);
            rt_->drain_posted = false;
        }
        for (const auto& samples : batch) {
            audio::AudioFrame f;
            f.samples = samples;
            f.index = rt_->next_index++;
            rt_->session->push_frame(f);
        }
    }

    void on_control(const std::string& data) {
        const auto msg = json::parse(data, nullptr, false);
        const std::string type = msg.is_object() ? msg.value("type", "") : "";
        if (type == "end") {
            on_scheduler([](Connection& self) { self.rt_->session->finish_input(); });
        } else if (type == "prompt" && msg.contains("text") && msg.at("text").is_string()) {
            on_scheduler([text = msg.at("text").get<std::string>()](Connection& self) {
                self.rt_->session->agent_prompt(text);
            });
        } else if (type == "ping") {
            on_scheduler([](Connection& self) {
                self.send_from_scheduler(json{{"type", "event"}, {"name", "pong"}, {"detail", ""}});
            });
        } else {
            send_now(json{{"type", "error"}, {"message", "unsupported message type '" + type + "'"}});
        }
    }

    // Runs `fn` on the session's scheduler. A session error closes the connection.
    template <class Fn>
    void on_scheduler(Fn fn) {
        rt_->scheduler->post([weak = weak_from_this(), fn = std::move(fn)] {
            auto self = weak.lock();
            if (!self) return;
            try {
                fn(*self);
            } catch (const std::exception& e) {
                self->send_from_scheduler(json{{"type", "error"}, {"message", e.what()}});
                net::post(self->ws_.get_executor(), [self] {
                    self->enqueue({Outgoing::Kind::close, "session error", CloseCode::bad_audio});
                });
            }
        });
    }

    void send_from_scheduler(const json& j) {
        net::post(ws_.get_executor(), [self = shared_from_this(), text = j.dump()] {
            self->enqueue({Outgoing::Kind::text, text});
        });
    }

    // Strand only.
    void send_now(const json& j) { enqueue({Outgoing::Kind::text, j.dump()}); }

    void close(CloseCode code, std::string reason) {
        // Close reasons are limited to 123 bytes.
        if (reason.size() > 120) reason.resize(120);
        enqueue({Outgoing::Kind::close, std::move(reason), code});
    }

    void enqueue(Outgoing out) {
        if (closing_) return;
        if (out.kind == Outgoing::Kind::purge) {
            // Keep the message being written; drop queued audio.
            const auto keep = writing_ ? 1 : 0;
            std::deque<Outgoing> rest;
            for (std::size_t i = 0; i < queue_.size(); ++i) {
                if (static_cast<int>(i) < keep || queue_[i].kind != Outgoing::Kind::binary) {
                    rest.push_back(std::move(queue_[i]));
                }
            }
            queue_.swap(rest);
            return;
        }
        queue_.push_back(std::move(out));
        if (!writing_) write_next();
    }

    void write_next() {
        if (queue_.empty()) return;
        writing_ = true;
        auto& front = queue_.front();
        if (front.kind == Outgoing::Kind::close) {
            closing_ = true;
            websocket::close_reason reason(static_cast<websocket::close_code>(front.code), front.data);
            ws_.async_close(reason, [self = shared_from_this()](beast::error_code) { self->teardown(); });
            return;
        }
        ws_.binary(front.kind == Outgoing::Kind::binary);
        ws_.async_write(net::buffer(front.data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (ec) return self->teardown();
            self->queue_.pop_front();
            self->write_next();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Server::Impl& server_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> queue_;
    bool writing_ = false;
    bool closing_ = false;
    bool torn_down_ = false;
    std::unique_ptr<Runtime> rt_;
};

void Server::Impl::accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        auto conn = std::make_shared<Connection>(std::move(socket), *this);
        {
            std::lock_guard lock(mu);
            std::erase_if(connections, [](const auto& w) { return w.expired(); });
            connections.push_back(conn);
        }
        conn->run();
        accept();
    });
}

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() { stop(); }

unsigned short Server::start() {
    auto& s = *impl_;
    {
        std::lock_guard lock(s.mu);
        if (s.started) throw std::logic_error("server already started");
        s.started = true;
    }
    const tcp::endpoint endpoint(net::ip::make_address(s.config.host), s.config.port);
    s.acceptor.open(endpoint.protocol());
    s.acceptor.set_option(net::socket_base::reuse_address(true));
    s.acceptor.bind(endpoint);
    s.acceptor.listen(net::socket_base::max_listen_connections);
    s.work.emplace(s.ioc.get_executor());
    s.accept();
    for (std::size_t i = 0; i < s.config.io_threads; ++i) s.threads.emplace_back([&s] { s.ioc.run(); });
    return s.acceptor.local_endpoint().port();
}

void Server::stop() {
    auto& s = *impl_;
    {
        std::lock_guard lock(s.mu);
        if (s.stopped) return;
        s.stopped = true;
    }
    s.work.reset();
    s.ioc.stop();
    for (auto& t : s.threads) t.join();
    s.threads.clear();
    beast::error_code ec;
    s.acceptor.close(ec);
    std::vector<std::shared_ptr<Connection>> live;
    {
        std::lock_guard lock(s.mu);
        for (auto& w : s.connections) {
            if (auto c = w.lock()) live.push_back(std::move(c));
        }
        s.connections.clear();
    }
    for (auto& c : live) c->force_close();
    std::lock_guard lock(s.mu);
    s.finished = true;
    s.stopped_cv.notify_all();
}

void Server::wait() {
    std::unique_lock lock(impl_->mu);
    impl_->stopped_cv.wait(lock, [this] { return impl_->finished; });
}

std::size_t Server::active_sessions() const {
    std::lock_guard lock(impl_->mu);
    return impl_->active;
}

}  // namespace duplex::gateway
