#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace duplex::pvad {

struct SmoothingConfig {
    double onset_threshold = 0.6;
    double offset_threshold = 0.4;
    std::size_t onset_frames = 3;
    std::size_t hangover_frames = 30;

    /// Throws std::invalid_argument when onset < offset threshold or
    /// onset_frames == 0.
    void validate() const;
};

enum class VadEventKind { speech_onset, speech_offset };

struct VadEvent {
    VadEventKind kind = VadEventKind::speech_onset;
    // Timestamp of the boundary itself: the first frame of the qualifying run
    // for onsets, first quiet frame + hangover for offsets.
    double time = 0.0;
    // End of the frame whose probability completed the decision.
    double decided_at = 0.0;

    friend bool operator==(const VadEvent&, const VadEvent&) = default;
};

struct SpeechSegment {
    enum class Kind { primary_speech };
    double start = 0.0;
    double end = 0.0;
    Kind kind = Kind::primary_speech;

    double duration() const { return end - start; }
    friend bool operator==(const SpeechSegment&, const SpeechSegment&) = default;
};

/// Hysteresis + debounce automaton over per-frame probabilities. Onset after
/// onset_frames consecutive p >= onset_threshold; offset after hangover_frames
/// consecutive p < offset_threshold (at least one quiet frame is always needed
/// to observe the drop).
class SpeechSmoother {
public:
    explicit SpeechSmoother(SmoothingConfig config = {}, std::int64_t first_index = 0);

    std::optional<VadEvent> push(float probability);
    /// Closes an open segment at the end of the stream.
    std::optional<VadEvent> finish();
    void reset(std::int64_t first_index = 0);

    bool in_speech() const { return in_speech_; }
    std::int64_t next_index() const { return next_; }
    const SmoothingConfig& config() const { return config_; }

private:
    SmoothingConfig config_;
    std::int64_t next_ = 0;
    bool in_speech_ = false;
    std::size_t run_ = 0;
    std::int64_t run_start_ = 0;
    std::size_t quiet_ = 0;
    std::int64_t quiet_start_ = 0;
};

struct Segmentation {
    std::vector<VadEvent> events;
    std::vector<SpeechSegment> segments;
};

/// Batch driver over a finished probability stream; an open segment is closed
/// at the end of the stream.
Segmentation smooth_and_segment(std::span<const float> probabilities, const SmoothingConfig& config);

/// Pairs onset/offset events into segments. Throws std::invalid_argument on a
/// malformed stream (two onsets in a row, offset without onset).
std::vector<SpeechSegment> segments_from_events(std::span<const VadEvent> events);

}  // namespace duplex::pvad
