#include "oemstream/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

namespace {

std::size_t nearest_frame(std::span<const Micros> times, std::size_t lo, std::size_t hi, Micros t) {
    auto first = times.begin() + static_cast<std::ptrdiff_t>(lo);
    auto last = times.begin() + static_cast<std::ptrdiff_t>(hi);
    auto it = std::lower_bound(first, last, t);
    if (it == first) return lo;
    if (it == last) return hi - 1;
    const auto after = static_cast<std::size_t>(it - times.begin());
    const auto before = after - 1;
    // Ties go to the earlier frame.
    return (t - times[before]) <= (times[after] - t) ? before : after;
}

}  // namespace

std::vector<Clip> segment_stream(std::span<const Frame> source, double clip_seconds, double fps) {
    if (!(clip_seconds > 0.0) || !std::isfinite(clip_seconds))
        throw InputError("clip duration must be positive");
    if (!(fps > 0.0) || !std::isfinite(fps)) throw InputError("fps must be positive");
    if (source.empty()) return {};

    std::vector<Micros> times;
    times.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Frame& f = source[i];
        if (f.payload_ref.empty()) throw InputError(fmt::format("frame {} has an empty payload reference", i));
        if (!std::isfinite(f.timestamp) || f.timestamp < 0.0)
            throw InputError(fmt::format("frame {} has an invalid timestamp", i));
        const Micros t = from_seconds(f.timestamp);
        if (!times.empty() && t <= times.back())
            throw InputError(fmt::format("frame timestamps are not strictly increasing at frame {}", i));
        times.push_back(t);
    }

    Micros interval{1};
    if (times.size() > 1) {
        const auto span = (times.back() - times.front()).count();
        const auto gaps = static_cast<std::int64_t>(times.size() - 1);
        interval = Micros((span + gaps / 2) / gaps);
    }
    const Micros stream_end = times.back() + interval;
    const Micros clip_len = from_seconds(clip_seconds);
    if (clip_len.count() <= 0) throw InputError("clip duration below timer resolution");
    const auto clip_count = static_cast<std::size_t>((stream_end.count() + clip_len.count() - 1) / clip_len.count());
    const double step_us = 1e6 / fps;

    std::vector<Clip> clips;
    clips.reserve(clip_count);
    std::size_t cursor = 0;
    for (std::size_t k = 1; k <= clip_count; ++k) {
        Clip clip;
        clip.index = k;
        clip.start = clip_len * static_cast<std::int64_t>(k - 1);
        clip.end = std::min(clip_len * static_cast<std::int64_t>(k), stream_end);
        clip.partial = clip.duration() < clip_len;

        const std::size_t lo = cursor;
        while (cursor < times.size() && times[cursor] < clip.end) ++cursor;
        const std::size_t hi = cursor;

        if (hi > lo) {
            std::size_t last_pick = std::numeric_limits<std::size_t>::max();
            for (std::int64_t j = 0;; ++j) {
                const Micros grid = clip.start + Micros(std::llround(static_cast<double>(j) * step_us));
                if (grid >= clip.end) break;
                const std::size_t pick = nearest_frame(times, lo, hi, grid);
                if (pick != last_pick) {
                    clip.frames.push_back(source[pick]);
                    last_pick = pick;
                }
            }
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

std::vector<Frame> load_frame_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open frame manifest " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed frame manifest " + path.string() + ": " + e.what());
    }
    const nlohmann::json& records = doc.is_object() ? doc.at("frames") : doc;
    if (!records.is_array()) throw InputError("frame manifest must hold an array of records");

    std::vector<Frame> frames;
    frames.reserve(records.size());
    for (const auto& rec : records) {
        if (!rec.contains("timestamp") || !rec["timestamp"].is_number() || !rec.contains("path") ||
            !rec["path"].is_string())
            throw InputError(fmt::format("frame record {} needs numeric timestamp and string path", frames.size()));
        frames.push_back(Frame{frames.size(), rec["timestamp"].get<double>(), rec["path"].get<std::string>()});
    }
    return frames;
}

std::vector<Frame> synthetic_frames(const SyntheticSource& source) {
    if (!(source.native_fps > 0.0)) throw InputError("synthetic source needs a positive frame rate");
    if (source.duration_seconds < 0.0) throw InputError("synthetic source needs a non-negative duration");
    if (source.jitter < 0.0 || source.jitter >= 0.5) throw InputError("synthetic jitter must be in [0, 0.5)");

    const auto count = static_cast<std::size_t>(std::floor(source.duration_seconds * source.native_fps + 1e-9));
    const double interval = 1.0 / source.native_fps;
    std::mt19937_64 rng(source.seed);
    std::uniform_real_distribution<double> offset(-source.jitter, source.jitter);

    std::vector<Frame> frames;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double t = static_cast<double>(i) * interval;
        if (source.jitter > 0.0 && i > 0) t += offset(rng) * interval;
        frames.push_back(Frame{i, t, fmt::format("synthetic:{}:{}", source.seed, i)});
    }
    return frames;
}

nlohmann::json clips_to_json(std::span<const Clip> clips) {
    nlohmann::json out = nlohmann::json::array();
    for (const Clip& c : clips) {
        nlohmann::json frames = nlohmann::json::array();
        for (const Frame& f : c.frames)
            frames.push_back({{"index", f.index}, {"timestamp", f.timestamp}, {"path", f.payload_ref}});
        out.push_back({{"k", c.index},
                       {"start", c.start_seconds()},
                       {"end", c.end_seconds()},
                       {"partial", c.partial},
                       {"frames", std::move(frames)}});
    }
    return out;
}

const char* to_string(ClockMode mode) {
    switch (mode) {
        case ClockMode::realtime: return "realtime";
        case ClockMode::accelerated: return "accelerated";
        case ClockMode::as_fast_as_possible: return "as-fast-as-possible";
        case ClockMode::simulated: return "simulated";
    }
    return "unknown";
}

ClockMode clock_mode_from_string(const std::string& name) {
    if (name == "realtime") return ClockMode::realtime;
    if (name == "accelerated") return ClockMode::accelerated;
    if (name == "as-fast-as-possible" || name == "afap") return ClockMode::as_fast_as_possible;
    if (name == "simulated") return ClockMode::simulated;
    throw ConfigError("unknown clock mode '" + name + "'");
}

ReplayClock ReplayClock::realtime() { return ReplayClock(ClockMode::realtime, 1.0); }

ReplayClock ReplayClock::accelerated(double factor) {
    if (!(factor > 0.0)) throw ConfigError("acceleration factor must be positive");
    return ReplayClock(ClockMode::accelerated, factor);
}

ReplayClock ReplayClock::as_fast_as_possible() { return ReplayClock(ClockMode::as_fast_as_possible, 1.0); }

ReplayClock ReplayClock::simulated() { return ReplayClock(ClockMode::simulated, 1.0); }

Micros ReplayClock::stream_time_at(WallClock::time_point wall) const {
    if (is_virtual()) return Micros::max();
    const auto elapsed = std::chrono::duration<double, std::micro>(wall - origin_).count();
    return Micros(static_cast<std::int64_t>(std::floor(elapsed * factor_)));
}

ReplayClock::WallClock::time_point ReplayClock::wall_time_of(Micros t) const {
    const auto wall = std::chrono::duration<double, std::micro>(static_cast<double>(t.count()) / factor_);
    return origin_ + std::chrono::duration_cast<WallClock::duration>(wall);
}

Micros ReplayClock::availability(const Clip& clip) const {
    return mode_ == ClockMode::as_fast_as_possible ? Micros{0} : clip.end;
}

double ReplayClock::sleep_scale() const noexcept {
    switch (mode_) {
        case ClockMode::realtime: return 1.0;
        case ClockMode::accelerated: return 1.0 / factor_;
        default: return 0.0;
    }
}

std::optional<Clip> ClipReplayer::next_available(const ReplayClock& clock, Micros stream_now) {
    if (exhausted()) return std::nullopt;
    if (clock.availability(clips_[cursor_]) > stream_now) return std::nullopt;
    return clips_[cursor_++];
}

}  // namespace oem
