#include "duplex/runtime/scheduler.hpp"

namespace duplex {

void SimScheduler::post_at(double t, std::function<void()> fn) {
    queue_.push({t < now_ ? now_ : t, seq_++, std::move(fn)});
}

void SimScheduler::run_until(double t) {
    while (!queue_.empty() && queue_.top().time <= t) {
        // Copy out before pop: the callback may post more work.
        auto item = queue_.top();
        queue_.pop();
        now_ = item.time;
        item.fn();
    }
    if (t > now_) now_ = t;
}

std::size_t SimScheduler::run_all(std::size_t limit) {
    std::size_t n = 0;
    while (!queue_.empty() && n < limit) {
        auto item = queue_.top();
        queue_.pop();
        now_ = item.time;
        item.fn();
        ++n;
    }
    return n;
}

RealtimeScheduler::RealtimeScheduler() : epoch_(std::chrono::steady_clock::now()) {
    worker_ = std::thread([this] { loop(); });
}

RealtimeScheduler::~RealtimeScheduler() { stop(); }

double RealtimeScheduler::now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void RealtimeScheduler::post_at(double t, std::function<void()> fn) {
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        queue_.push({t, seq_++, std::move(fn)});
    }
    cv_.notify_one();
}

void RealtimeScheduler::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void RealtimeScheduler::loop() {
    std::unique_lock lock(mu_);
    while (!stopping_) {
        if (queue_.empty()) {
            cv_.wait(lock);
            continue;
        }
        const double due = queue_.top().time;
        const auto deadline = epoch_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                           std::chrono::duration<double>(due));
        if (std::chrono::steady_clock::now() < deadline) {
            cv_.wait_until(lock, deadline);
            continue;
        }
        auto item = queue_.top();
        queue_.pop();
        lock.unlock();
        item.fn();
        lock.lock();
    }
}

bool Mailbox::post(std::function<void()> fn) {
    std::lock_guard lock(mu_);
    if (!scheduler_) return false;
    scheduler_->post(std::move(fn));
    return true;
}

void Mailbox::close() {
    std::lock_guard lock(mu_);
    scheduler_ = nullptr;
}

}  // namespace duplex
