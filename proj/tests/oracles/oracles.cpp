#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <tuple>

namespace oracle {

namespace {

struct Ev {
    std::int64_t time;
    std::size_t clip;
    int kind;  // 0 arrival, 1 completion

    bool operator>(const Ev& o) const { return std::tie(time, clip, kind) > std::tie(o.time, o.clip, o.kind); }
};

struct Run {
    std::vector<TracePoint> trace;
    std::vector<long> at_completion;
};

Run simulate(const std::vector<std::int64_t>& arrival_us, const std::vector<std::int64_t>& latency_us) {
    std::priority_queue<Ev, std::vector<Ev>, std::greater<>> calendar;
    for (std::size_t k = 0; k < arrival_us.size(); ++k) calendar.push({arrival_us[k], k + 1, 0});

    Run run;
    run.at_completion.resize(arrival_us.size());
    std::queue<std::size_t> waiting;
    bool busy = false;
    long depth = 0;
    const auto start_next = [&](std::int64_t now) {
        if (busy || waiting.empty()) return;
        const std::size_t k = waiting.front();
        waiting.pop();
        busy = true;
        calendar.push({now + latency_us[k - 1], k, 1});
    };
    while (!calendar.empty()) {
        const Ev ev = calendar.top();
        calendar.pop();
        if (ev.kind == 0) {
            ++depth;
            waiting.push(ev.clip);
            run.trace.push_back({ev.time, depth});
            start_next(ev.time);
        } else {
            --depth;
            busy = false;
            run.trace.push_back({ev.time, depth});
            run.at_completion[ev.clip - 1] = depth;
            start_next(ev.time);
        }
    }
    return run;
}

}  // namespace

std::vector<TracePoint> backlog_simulation(const std::vector<std::int64_t>& arrival_us,
                                           const std::vector<std::int64_t>& latency_us) {
    return simulate(arrival_us, latency_us).trace;
}

std::vector<long> depth_at_completion(const std::vector<std::int64_t>& arrival_us,
                                      const std::vector<std::int64_t>& latency_us) {
    return simulate(arrival_us, latency_us).at_completion;
}

std::vector<std::vector<std::size_t>> grid_subsample(const std::vector<double>& timestamps, double clip_seconds,
                                                     double fps) {
    std::vector<std::vector<std::size_t>> out;
    if (timestamps.empty()) return out;
    std::vector<std::int64_t> us;
    for (double t : timestamps) us.push_back(std::llround(t * 1e6));
    const auto n = static_cast<std::int64_t>(us.size());
    // Mean frame interval, rounded to the nearest microsecond.
    const std::int64_t interval = n > 1 ? ((us.back() - us.front()) * 2 + (n - 1)) / (2 * (n - 1)) : 1;
    const std::int64_t end = us.back() + interval;
    const std::int64_t len = std::llround(clip_seconds * 1e6);
    for (std::int64_t a = 0; a < end; a += len) {
        const std::int64_t b = std::min(end, a + len);
        std::vector<std::size_t> picked;
        for (std::int64_t j = 0;; ++j) {
            const std::int64_t g = a + std::llround(double(j) * 1e6 / fps);
            if (g >= b) break;
            std::size_t best = us.size();
            std::int64_t best_d = 0;
            for (std::size_t i = 0; i < us.size(); ++i) {
                if (us[i] < a || us[i] >= b) continue;
                const std::int64_t d = std::llabs(us[i] - g);
                if (best == us.size() || d < best_d) {
                    best = i;
                    best_d = d;
                }
            }
            if (best == us.size()) continue;
            if (picked.empty() || picked.back() != best) picked.push_back(best);
        }
        out.push_back(std::move(picked));
    }
    return out;
}

MeanStd two_pass(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / double(xs.size());
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.stddev = std::sqrt(ss / double(xs.size() - 1));
    return r;
}

double clamped_gaussian_mean(double mean, double stddev, std::size_t n, std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    std::normal_distribution<double> normal(mean, stddev);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::max(0.0, normal(rng));
    return sum / double(n);
}

}  // namespace oracle
