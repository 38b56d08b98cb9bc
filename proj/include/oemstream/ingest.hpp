#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oemstream/time.hpp"

namespace oem {

struct Frame {
    std::size_t index = 0;
    double timestamp = 0.0;   // seconds from stream start
    std::string payload_ref;  // file path or synthetic token; never decoded here
};

struct Clip {
    std::size_t index = 0;  // 1-based
    Micros start{0};
    Micros end{0};
    std::vector<Frame> frames;
    bool partial = false;  // shorter than the nominal clip duration (final clip only)

    Micros duration() const { return end - start; }
    double start_seconds() const { return to_seconds(start); }
    double end_seconds() const { return to_seconds(end); }
};

/// Splits a frame sequence into consecutive, gap-free clips of `clip_seconds`
/// and subsamples each clip to `fps` by picking, for every point of a uniform
/// grid anchored at the clip start, the nearest frame inside the clip (ties go
/// to the earlier frame; a frame picked by two grid points appears once).
///
/// The stream timeline starts at 0 and ends one mean frame interval after the
/// last frame, so K = ceil(end / clip_seconds). Only the last clip may be
/// shorter; it is flagged `partial`.
///
/// Throws InputError on non-positive parameters, empty payload references or
/// timestamps that are not strictly increasing.
std::vector<Clip> segment_stream(std::span<const Frame> source, double clip_seconds, double fps);

/// Reads `[{"timestamp": t, "path": p}, ...]` or `{"frames": [...]}`.
std::vector<Frame> load_frame_manifest(const std::filesystem::path& path);

struct SyntheticSource {
    double duration_seconds = 60.0;
    double native_fps = 30.0;
    std::uint64_t seed = 0;
    // Maximum timestamp perturbation as a fraction of the frame interval (< 0.5).
    double jitter = 0.0;
};

std::vector<Frame> synthetic_frames(const SyntheticSource& source);

nlohmann::json clips_to_json(std::span<const Clip> clips);

enum class ClockMode { realtime, accelerated, as_fast_as_possible, simulated };

const char* to_string(ClockMode mode);
ClockMode clock_mode_from_string(const std::string& name);

/// Maps wall time onto stream time.
///
/// realtime and accelerated follow the wall clock (scaled by `factor`).
/// as_fast_as_possible makes every clip available at once. simulated is a
/// discrete-event timeline: clips become available at their end time and
/// workers advance their own virtual time by the latencies they measure, so
/// runs are exact and independent of host speed.
class ReplayClock {
public:
    using WallClock = std::chrono::steady_clock;

    static ReplayClock realtime();
    static ReplayClock accelerated(double factor);
    static ReplayClock as_fast_as_possible();
    static ReplayClock simulated();

    ClockMode mode() const noexcept { return mode_; }
    double factor() const noexcept { return factor_; }

    // Wall-driven modes read the wall clock; the others run on virtual time.
    bool is_virtual() const noexcept {
        return mode_ == ClockMode::as_fast_as_possible || mode_ == ClockMode::simulated;
    }

    void start(WallClock::time_point origin = WallClock::now()) { origin_ = origin; }
    WallClock::time_point origin() const noexcept { return origin_; }

    // Stream time corresponding to a wall instant. Virtual modes report the
    // maximum representable time (every clip is already available).
    Micros stream_time_at(WallClock::time_point wall) const;
    Micros stream_now() const { return stream_time_at(WallClock::now()); }

    // Wall instant at which stream time `t` is reached (wall modes only).
    WallClock::time_point wall_time_of(Micros t) const;

    // Earliest stream time at which a clip is handed to the descriptor.
    Micros availability(const Clip& clip) const;

    // Wall seconds a backend should spend per simulated second (0 = never sleep).
    double sleep_scale() const noexcept;

private:
    ReplayClock(ClockMode mode, double factor) : mode_(mode), factor_(factor) {}

    ClockMode mode_;
    double factor_;
    WallClock::time_point origin_{WallClock::now()};
};

/// Hands out clips in order, each exactly once, once they are available.
class ClipReplayer {
public:
    explicit ClipReplayer(std::vector<Clip> clips) : clips_(std::move(clips)) {}

    // Returns the next clip whose availability time is <= stream_now.
    std::optional<Clip> next_available(const ReplayClock& clock, Micros stream_now);
    std::optional<Clip> next_available(const ReplayClock& clock) {
        return next_available(clock, clock.stream_now());
    }

    const Clip* peek() const { return exhausted() ? nullptr : &clips_[cursor_]; }
    bool exhausted() const noexcept { return cursor_ >= clips_.size(); }
    std::size_t delivered() const noexcept { return cursor_; }
    std::size_t size() const noexcept { return clips_.size(); }

private:
    std::vector<Clip> clips_;
    std::size_t cursor_ = 0;
};

}  // namespace oem
