#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "lshift/error.hpp"

// Weighted random-intercept model with one or two classes:
//   x_i ~ N(beta[c_k][y] + b_k, sigma2[y] / w_iy),  b_k ~ N(0, omega2),
// where every record contributes once per active class. Everything is
// computed from per (group, class) sufficient statistics.

namespace lshift::detail {

/// Weighted moments of one (group, class) cell, accumulated stably.
struct CellStats {
    double w = 0;    // sum of weights
    double mean = 0; // weighted mean of x
    double ss = 0;   // sum of w (x - mean)^2
    double logw = 0; // sum of log w
    std::size_t n = 0;

    void add(double x, double weight)
    {
        w += weight;
        const double delta = x - mean;
        mean += weight / w * delta;
        ss += weight * delta * (x - mean);
        logw += std::log(weight);
        ++n;
    }
};

struct RiStats {
    std::size_t conditions = 0;
    std::vector<std::size_t> group_condition;
    std::vector<std::array<CellStats, 2>> cell; // [group][class]

    std::size_t groups() const { return group_condition.size(); }
    double class_weight(int y) const
    {
        double s = 0;
        for (const auto& c : cell) s += c[static_cast<std::size_t>(y)].w;
        return s;
    }
};

/// weights[y] empty means class y does not take part. Records whose weight
/// falls below `min_weight` are dropped from that class.
inline RiStats ri_stats(std::span<const double> x, std::span<const std::size_t> group,
                        std::span<const std::size_t> group_condition, std::size_t conditions,
                        std::array<std::span<const double>, 2> weights, double min_weight)
{
    RiStats s;
    s.conditions = conditions;
    s.group_condition.assign(group_condition.begin(), group_condition.end());
    s.cell.assign(group_condition.size(), {});
    for (int y = 0; y < 2; ++y) {
        const auto w = weights[static_cast<std::size_t>(y)];
        if (w.empty()) continue;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (w[i] >= min_weight) s.cell[group[i]][static_cast<std::size_t>(y)].add(x[i], w[i]);
    }
    return s;
}

struct RiSolution {
    std::vector<std::array<double, 2>> beta; // [condition][class]; NaN where the class has no weight
    std::vector<double> b;                   // [group]
    double loglik = 0;
};

/// Profile out beta for fixed variances and return the conditional modes of
/// b. Only classes with mask[y] set are used; they share one intercept per
/// group.
inline RiSolution ri_solve(const RiStats& s, std::array<double, 2> sigma2, double omega2, std::array<bool, 2> mask)
{
    const std::size_t nc = s.conditions, ng = s.groups();
    std::array<double, 2> p{};
    auto precisions = [&](std::size_t k) {
        for (std::size_t y = 0; y < 2; ++y) p[y] = mask[y] ? s.cell[k][y].w / sigma2[y] : 0.0;
    };

    // Per condition normal equations A beta = u (2x2).
    std::vector<std::array<double, 4>> a(nc, {0, 0, 0, 0});
    std::vector<std::array<double, 2>> u(nc, {0, 0});
    for (std::size_t k = 0; k < ng; ++k) {
        precisions(k);
        const double total = p[0] + p[1];
        if (total <= 0) continue;
        const double den = 1.0 + omega2 * total;
        const auto c = s.group_condition[k];
        const double m0 = s.cell[k][0].mean, m1 = s.cell[k][1].mean;
        a[c][0] += p[0] * (1.0 + omega2 * p[1]) / den;
        a[c][3] += p[1] * (1.0 + omega2 * p[0]) / den;
        const double off = -omega2 * p[0] * p[1] / den;
        a[c][1] += off;
        a[c][2] += off;
        u[c][0] += p[0] * (m0 + omega2 * p[1] * (m0 - m1)) / den;
        u[c][1] += p[1] * (m1 + omega2 * p[0] * (m1 - m0)) / den;
    }

    RiSolution out;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.beta.assign(nc, {nan, nan});
    for (std::size_t c = 0; c < nc; ++c) {
        const bool has0 = a[c][0] > 0, has1 = a[c][3] > 0;
        if (has0 && has1) {
            const double det = a[c][0] * a[c][3] - a[c][1] * a[c][2];
            if (!(det > 1e-14 * a[c][0] * a[c][3])) throw NumericalError("singular fixed-effect system");
            out.beta[c][0] = (a[c][3] * u[c][0] - a[c][1] * u[c][1]) / det;
            out.beta[c][1] = (a[c][0] * u[c][1] - a[c][2] * u[c][0]) / det;
        } else if (has0) {
            out.beta[c][0] = u[c][0] / a[c][0];
        } else if (has1) {
            out.beta[c][1] = u[c][1] / a[c][3];
        }
    }

    out.b.assign(ng, 0.0);
    double ll = 0;
    for (std::size_t k = 0; k < ng; ++k) {
        precisions(k);
        const double total = p[0] + p[1];
        if (total <= 0) continue;
        const double den = 1.0 + omega2 * total;
        const auto c = s.group_condition[k];
        std::array<double, 2> d{0, 0};
        double term = std::log(den);
        for (std::size_t y = 0; y < 2; ++y) {
            if (p[y] <= 0) continue;
            const CellStats& cs = s.cell[k][y];
            d[y] = cs.mean - out.beta[c][y];
            term += static_cast<double>(cs.n) * std::log(2.0 * std::numbers::pi * sigma2[y]) - cs.logw + cs.ss / sigma2[y];
        }
        term += (p[0] * d[0] * d[0] + p[1] * d[1] * d[1] + omega2 * p[0] * p[1] * (d[0] - d[1]) * (d[0] - d[1])) / den;
        ll -= 0.5 * term;
        out.b[k] = omega2 * (p[0] * d[0] + p[1] * d[1]) / den;
    }
    out.loglik = ll;
    return out;
}

} // namespace lshift::detail
