#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "lshift/bspline.hpp"
#include "lshift/error.hpp"

namespace lshift {

enum class IntervalKind { percentile, pivotal, normal_z };

inline const char* to_string(IntervalKind k)
{
    switch (k) {
    case IntervalKind::percentile: return "percentile";
    case IntervalKind::pivotal: return "pivotal";
    case IntervalKind::normal_z: return "normal_z";
    }
    return "?";
}

inline IntervalKind interval_kind_from_string(const std::string& s)
{
    if (s == "percentile") return IntervalKind::percentile;
    if (s == "pivotal") return IntervalKind::pivotal;
    if (s == "normal_z" || s == "normal") return IntervalKind::normal_z;
    throw ValidationError("unknown interval kind: " + s);
}

struct Interval {
    double lower = 0;
    double upper = 0;

    bool contains(double v) const { return lower <= v && v <= upper; }
    double width() const { return upper - lower; }
};

/// Bootstrap interval from a point estimate and its replicates. Quantiles
/// use linear interpolation between order statistics (type 7).
inline Interval interval_from_replicates(double point, std::span<const double> reps, double level, IntervalKind kind)
{
    detail::require(!reps.empty(), "no replicates");
    detail::require(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    detail::require(std::isfinite(point), "non-finite point estimate");
    for (double v : reps) detail::require(std::isfinite(v), "non-finite replicate");
    const double alpha = 1.0 - level;
    if (kind == IntervalKind::normal_z) {
        double mean = 0;
        for (double v : reps) mean += v;
        mean /= static_cast<double>(reps.size());
        double ss = 0;
        for (double v : reps) ss += (v - mean) * (v - mean);
        const double sd = reps.size() > 1 ? std::sqrt(ss / static_cast<double>(reps.size() - 1)) : 0.0;
        const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
        return {point - z * sd, point + z * sd};
    }
    std::vector<double> sorted(reps.begin(), reps.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = quantile_sorted(sorted, alpha / 2.0);
    const double hi = quantile_sorted(sorted, 1.0 - alpha / 2.0);
    if (kind == IntervalKind::percentile) return {lo, hi};
    return {2.0 * point - hi, 2.0 * point - lo};
}

} // namespace lshift
