#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lshift/error.hpp"

namespace lshift {

enum class KnotRule { quantile, uniform };

/// Type-7 quantile of already sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p)
{
    if (sorted.empty()) throw ValidationError("quantile of empty sequence");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Clamped B-spline basis of one variable on [lo, hi].
class BSplineBasis {
  public:
    BSplineBasis() = default;

    /// `breakpoints` holds lo, the interior knots and hi, strictly increasing.
    BSplineBasis(std::vector<double> breakpoints, int degree) : breaks_(std::move(breakpoints)), degree_(degree)
    {
        detail::require(degree_ >= 1, "spline degree must be at least 1");
        detail::require(breaks_.size() >= 2, "spline needs two boundary knots");
        for (std::size_t i = 1; i < breaks_.size(); ++i)
            detail::require(breaks_[i] > breaks_[i - 1], "spline knots must be strictly increasing");
        knots_.assign(static_cast<std::size_t>(degree_), breaks_.front());
        knots_.insert(knots_.end(), breaks_.begin(), breaks_.end());
        knots_.insert(knots_.end(), static_cast<std::size_t>(degree_), breaks_.back());
    }

    /// Place knots for a sample of one variable.
    static BSplineBasis for_sample(std::vector<double> values, int interior_knots, int degree, KnotRule rule)
    {
        detail::require(!values.empty(), "cannot place knots on an empty sample");
        std::sort(values.begin(), values.end());
        const double lo = values.front(), hi = values.back();
        detail::require(hi > lo, "constant feature: cannot build a spline basis");
        std::vector<double> br{lo};
        for (int j = 1; j <= interior_knots; ++j) {
            const double p = static_cast<double>(j) / static_cast<double>(interior_knots + 1);
            const double v = rule == KnotRule::quantile ? quantile_sorted(values, p) : lo + p * (hi - lo);
            if (v > br.back() && v < hi) br.push_back(v);
        }
        br.push_back(hi);
        return BSplineBasis(std::move(br), degree);
    }

    int degree() const { return degree_; }
    std::size_t size() const { return knots_.size() - static_cast<std::size_t>(degree_) - 1; }
    double lower() const { return breaks_.front(); }
    double upper() const { return breaks_.back(); }
    const std::vector<double>& breakpoints() const { return breaks_; }

    /// Values (or `deriv`-th derivatives) of every basis function at x.
    /// x is clamped to [lower, upper].
    void evaluate(double x, std::span<double> out, int deriv = 0) const
    {
        x = std::clamp(x, lower(), upper());
        const std::size_t nk = knots_.size();
        // table[q][i] = N_{i,q}(x)
        std::vector<std::vector<double>> table(static_cast<std::size_t>(degree_) + 1);
        table[0].assign(nk - 1, 0.0);
        std::size_t span = static_cast<std::size_t>(degree_);
        while (span + 1 < nk - 1 - static_cast<std::size_t>(degree_) && x >= knots_[span + 1]) ++span;
        table[0][span] = 1.0;
        for (int q = 1; q <= degree_; ++q) {
            auto& cur = table[static_cast<std::size_t>(q)];
            const auto& prev = table[static_cast<std::size_t>(q) - 1];
            cur.assign(nk - 1 - static_cast<std::size_t>(q), 0.0);
            for (std::size_t i = 0; i < cur.size(); ++i) {
                double v = 0.0;
                const double d1 = knots_[i + static_cast<std::size_t>(q)] - knots_[i];
                const double d2 = knots_[i + static_cast<std::size_t>(q) + 1] - knots_[i + 1];
                if (d1 > 0) v += (x - knots_[i]) / d1 * prev[i];
                if (d2 > 0) v += (knots_[i + static_cast<std::size_t>(q) + 1] - x) / d2 * prev[i + 1];
                cur[i] = v;
            }
        }
        for (std::size_t i = 0; i < size(); ++i) out[i] = derivative(table, i, degree_, deriv);
    }

    /// Gram matrix of the order-th derivative: S_ij = ∫ B_i^(r) B_j^(r).
    Eigen::MatrixXd penalty(int order) const
    {
        detail::require(order >= 1 && order <= degree_, "penalty order must lie in [1, degree]");
        // 5-point Gauss-Legendre is exact for the piecewise polynomials here (degree <= 9).
        static constexpr std::array<double, 5> node{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                                    0.9061798459386640};
        static constexpr std::array<double, 5> weight{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                      0.4786286704993665, 0.2369268850561891};
        const auto p = static_cast<Eigen::Index>(size());
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd v(p);
        for (std::size_t seg = 0; seg + 1 < breaks_.size(); ++seg) {
            const double a = breaks_[seg], b = breaks_[seg + 1];
            const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (std::size_t g = 0; g < node.size(); ++g) {
                // Evaluate strictly inside the segment so the right span is used.
                evaluate(mid + half * node[g], std::span<double>(v.data(), static_cast<std::size_t>(p)), order);
                s.noalias() += (weight[g] * half) * v * v.transpose();
            }
        }
        return 0.5 * (s + s.transpose());
    }

  private:
    double derivative(const std::vector<std::vector<double>>& table, std::size_t i, int q, int r) const
    {
        if (r == 0) return table[static_cast<std::size_t>(q)][i];
        double v = 0.0;
        const double d1 = knots_[i + static_cast<std::size_t>(q)] - knots_[i];
        const double d2 = knots_[i + static_cast<std::size_t>(q) + 1] - knots_[i + 1];
        if (d1 > 0) v += derivative(table, i, q - 1, r - 1) / d1;
        if (d2 > 0) v -= derivative(table, i + 1, q - 1, r - 1) / d2;
        return q * v;
    }

    std::vector<double> breaks_;
    std::vector<double> knots_;
    int degree_ = 3;
};

} // namespace lshift
