#pragma once

#include <cstddef>
#include <memory>

#include "duplex/gateway/config.hpp"

namespace duplex::gateway {

// WebSocket protocol.
//
// Client to server:
//   1. One text message {"type": "config", ...}. Any other keys are a JSON
//      merge patch over the server's session config.
//   2. Binary messages of exactly 640 bytes: 20 ms of PCM16 little-endian,
//      16 kHz mono, split into two 10 ms frames.
//   3. Text messages {"type": "end"} (close the open speech segment),
//      {"type": "prompt", "text": ...} (agent-initiated reply) and
//      {"type": "ping"} (answered with event "pong" behind queued output).
//
// Server to client:
//   {"type": "config", "session": id, "config": {...}} after a valid config,
//   {"type": "state", "state": "Idle" | ...} on every state change, starting
//   with Idle, {"type": "transcript", "text": ...} after each ASR result,
//   {"type": "event", "name": ..., "detail": ...} for halts ("halt"),
//   response text ("response_text"), inbound overflow ("audio_dropped") and
//   session diagnostics, {"type": "error", "message": ...} for rejected
//   messages, and binary 640-byte messages of agent audio.
//
// Inbound audio waits in a 2 s buffer; on overflow the oldest frames are
// dropped. Frame indices are assigned when the session consumes a frame.

/// Close codes for protocol violations.
enum class CloseCode : unsigned short {
    expected_config = 4000,
    invalid_config = 4001,
    bad_audio = 4002,
    server_full = 4003,
};

inline constexpr std::size_t kWireFrameBytes = 640;
inline constexpr std::size_t kInboundCapacityFrames = 200;

class Server {
public:
    explicit Server(ServerConfig config);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts accepting. Returns the bound port. Throws on a bind
    /// failure.
    unsigned short start();
    /// Closes every session and joins the I/O threads. Idempotent.
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

    std::size_t active_sessions() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace duplex::gateway
