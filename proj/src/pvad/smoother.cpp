#include "duplex/pvad/smoother.hpp"

#include <algorithm>
#include <stdexcept>

#include "duplex/audio/frame.hpp"

namespace duplex::pvad {

using audio::frame_time;

void SmoothingConfig::validate() const {
    if (onset_threshold < offset_threshold) {
        throw std::invalid_argument("smoothing: onset_threshold must be >= offset_threshold");
    }
    if (onset_frames == 0) throw std::invalid_argument("smoothing: onset_frames must be >= 1");
}

SpeechSmoother::SpeechSmoother(SmoothingConfig config, std::int64_t first_index)
    : config_(config), next_(first_index) {
    config_.validate();
}

void SpeechSmoother::reset(std::int64_t first_index) {
    next_ = first_index;
    in_speech_ = false;
    run_ = quiet_ = 0;
}

std::optional<VadEvent> SpeechSmoother::push(float p) {
    const std::int64_t k = next_++;
    if (!in_speech_) {
        if (p >= config_.onset_threshold) {
            if (run_++ == 0) run_start_ = k;
            if (run_ >= config_.onset_frames) {
                in_speech_ = true;
                run_ = 0;
                quiet_ = 0;
                return VadEvent{VadEventKind::speech_onset, frame_time(run_start_), frame_time(k + 1)};
            }
        } else {
            run_ = 0;
        }
        return std::nullopt;
    }
    if (p < config_.offset_threshold) {
        if (quiet_++ == 0) quiet_start_ = k;
        if (quiet_ >= std::max<std::size_t>(config_.hangover_frames, 1)) {
            in_speech_ = false;
            quiet_ = 0;
            const auto t = frame_time(quiet_start_ + static_cast<std::int64_t>(config_.hangover_frames));
            return VadEvent{VadEventKind::speech_offset, t, frame_time(k + 1)};
        }
    } else {
        quiet_ = 0;
    }
    return std::nullopt;
}

std::optional<VadEvent> SpeechSmoother::finish() {
    if (!in_speech_) return std::nullopt;
    in_speech_ = false;
    std::int64_t end = next_;
    if (quiet_ > 0) end = std::min(end, quiet_start_ + static_cast<std::int64_t>(config_.hangover_frames));
    quiet_ = 0;
    return VadEvent{VadEventKind::speech_offset, frame_time(end), frame_time(next_)};
}

std::vector<SpeechSegment> segments_from_events(std::span<const VadEvent> events) {
    std::vector<SpeechSegment> out;
    std::optional<double> open;
    for (const auto& e : events) {
        if (e.kind == VadEventKind::speech_onset) {
            if (open) throw std::invalid_argument("segments: two onsets without an offset");
            open = e.time;
        } else {
            if (!open) throw std::invalid_argument("segments: offset without onset");
            out.push_back({*open, e.time, SpeechSegment::Kind::primary_speech});
            open.reset();
        }
    }
    return out;
}

Segmentation smooth_and_segment(std::span<const float> probabilities, const SmoothingConfig& config) {
    SpeechSmoother sm(config);
    Segmentation r;
    for (float p : probabilities) {
        if (auto e = sm.push(p)) r.events.push_back(*e);
    }
    if (auto e = sm.finish()) r.events.push_back(*e);
    r.segments = segments_from_events(r.events);
    return r;
}

}  // namespace duplex::pvad
