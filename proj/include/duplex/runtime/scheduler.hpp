#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

namespace duplex {

/// Serial executor with a notion of time. Every callback posted to one
/// scheduler runs on the same logical thread, in (time, post order) order.
class Scheduler {
public:
    virtual ~Scheduler() = default;

    /// Seconds since the scheduler's epoch.
    virtual double now() const = 0;
    /// Runs `fn` at time `t` (or as soon as possible if t is in the past).
    /// Safe to call from any thread.
    virtual void post_at(double t, std::function<void()> fn) = 0;

    void post(std::function<void()> fn) { post_at(now(), std::move(fn)); }
    void post_after(double delay, std::function<void()> fn) { post_at(now() + delay, std::move(fn)); }
};

/// Discrete-event scheduler over simulated time. Deterministic: ties are
/// broken by post order. Not thread-safe; drive it from one thread.
class SimScheduler final : public Scheduler {
public:
    double now() const override { return now_; }
    void post_at(double t, std::function<void()> fn) override;

    /// Runs everything due at or before `t`, then advances the clock to `t`.
    void run_until(double t);
    /// Runs until the queue is empty. Returns the number of callbacks run.
    std::size_t run_all(std::size_t limit = SIZE_MAX);
    bool idle() const { return queue_.empty(); }

private:
    struct Item {
        double time;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, Later> queue_;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
};

/// Wall-clock scheduler backed by one worker thread.
class RealtimeScheduler final : public Scheduler {
public:
    RealtimeScheduler();
    ~RealtimeScheduler() override;
    RealtimeScheduler(const RealtimeScheduler&) = delete;
    RealtimeScheduler& operator=(const RealtimeScheduler&) = delete;

    double now() const override;
    void post_at(double t, std::function<void()> fn) override;
    /// Drops pending work and joins the worker. Idempotent.
    void stop();

private:
    struct Item {
        double time;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };
    void loop();

    std::chrono::steady_clock::time_point epoch_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::priority_queue<Item, std::vector<Item>, Later> queue_;
    std::uint64_t seq_ = 0;
    bool stopping_ = false;
    std::thread worker_;
};

/// Posts onto a scheduler from other threads. After close() posts are
/// dropped, so late completions of background work cannot touch a finished
/// session.
class Mailbox {
public:
    explicit Mailbox(Scheduler& scheduler) : scheduler_(&scheduler) {}
    /// False when the mailbox is closed.
    bool post(std::function<void()> fn);
    void close();

private:
    std::mutex mu_;
    Scheduler* scheduler_;
};

/// Shared cancellation flag. Copies observe the same flag.
class CancelToken {
public:
    CancelToken() : flag_(std::make_shared<std::atomic<bool>>(false)) {}
    void cancel() const { flag_->store(true); }
    bool cancelled() const { return flag_->load(); }

private:
    std::shared_ptr<std::atomic<bool>> flag_;
};

}  // namespace duplex
