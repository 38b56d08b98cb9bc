#include "oemstream/stats.hpp"

#include <cmath>

namespace oem {

void RunningStats::add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

Summary RunningStats::summary() const {
    Summary s;
    s.count = n_;
    s.mean = mean_;
    s.stddev = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0;
    return s;
}

Summary summarize(std::span<const double> values) {
    RunningStats acc;
    for (double v : values) acc.add(v);
    return acc.summary();
}

}  // namespace oem
