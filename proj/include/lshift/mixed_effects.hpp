#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lshift/data.hpp"
#include "lshift/error.hpp"
#include "lshift/optimize.hpp"
#include "lshift/random_intercept.hpp"

namespace lshift {

/// Feature values with their grouping, detached from covariates so that
/// bootstrap replicates can swap in new x and group columns cheaply.
struct GroupedData {
    std::vector<double> x;
    std::vector<std::size_t> group;
    std::vector<std::size_t> group_condition;
    std::vector<std::string> condition_names;
    std::vector<std::string> group_names;

    std::size_t size() const { return x.size(); }
    std::size_t conditions() const { return condition_names.size(); }
    std::size_t groups() const { return group_names.size(); }
    std::size_t condition_of(std::size_t i) const { return group_condition[group[i]]; }
};

inline GroupedData grouped_data(const Dataset& data)
{
    detail::require(data.all_x(), "dataset has records without x");
    GroupedData g;
    g.x = data.x();
    g.group = data.group_index();
    for (std::size_t k = 0; k < data.groups().size(); ++k) g.group_condition.push_back(data.group_condition(k));
    g.condition_names = data.conditions();
    g.group_names = data.groups();
    return g;
}

struct LmmOptions {
    bool label_dependent = false;
    double min_weight = 1e-8;
    double sigma2_floor = 1e-10;
    NelderMeadOptions optimizer{0.5, 1e-12, 1e-6, 6000};
};

struct MixedEffectsFit {
    bool label_dependent = false;
    std::vector<std::string> conditions;
    std::vector<std::string> groups;
    std::array<bool, 2> fitted{false, false};
    std::vector<std::array<double, 2>> beta; // [condition][class]; NaN when the class has no weight there
    std::array<double, 2> sigma2{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    std::array<double, 2> omega2{0.0, 0.0}; // both entries equal unless label_dependent
    std::vector<std::array<double, 2>> b_hat;     // [group][class]
    std::vector<std::array<double, 2>> residuals; // [record][class], x - b_hat
    double loglik = 0;
    std::vector<std::vector<double>> traces; // best profiled loglik per optimizer iteration, one per run
    std::vector<std::string> warnings;

    double coefficient(const std::string& condition, int y) const
    {
        for (std::size_t c = 0; c < conditions.size(); ++c)
            if (conditions[c] == condition) return beta[c][static_cast<std::size_t>(y)];
        throw ValidationError("unknown condition: " + condition);
    }
};

namespace detail {

struct RiFit {
    RiSolution solution;
    std::array<double, 2> sigma2{1.0, 1.0};
    double omega2 = 0;
    std::vector<double> trace;
};

inline std::array<double, 2> ri_sigma2_given(const RiStats& s, const RiSolution& sol, std::array<bool, 2> mask,
                                             double floor)
{
    std::array<double, 2> rss{0, 0}, n{0, 0};
    for (std::size_t k = 0; k < s.groups(); ++k)
        for (std::size_t y = 0; y < 2; ++y) {
            const CellStats& cs = s.cell[k][y];
            if (!mask[y] || cs.w <= 0) continue;
            const double d = cs.mean - sol.beta[s.group_condition[k]][y] - sol.b[k];
            rss[y] += cs.ss + cs.w * d * d;
            n[y] += static_cast<double>(cs.n);
        }
    std::array<double, 2> out{1.0, 1.0};
    for (std::size_t y = 0; y < 2; ++y)
        if (mask[y]) out[y] = std::max(rss[y] / n[y], floor);
    return out;
}

/// Maximum likelihood for the classes in `mask`. Variances are optimized on
/// the log scale; the omega2 = 0 boundary is solved in closed form and kept
/// when it is at least as good as the interior optimum.
inline RiFit ri_fit_ml(const RiStats& s, std::array<bool, 2> mask, bool estimate_omega, const LmmOptions& opt)
{
    RiFit boundary;
    boundary.solution = ri_solve(s, {1.0, 1.0}, 0.0, mask);
    boundary.sigma2 = ri_sigma2_given(s, boundary.solution, mask, opt.sigma2_floor);
    boundary.solution = ri_solve(s, boundary.sigma2, 0.0, mask);
    boundary.trace.push_back(boundary.solution.loglik);
    if (!estimate_omega) return boundary;

    double between = 0, groups = 0;
    for (std::size_t k = 0; k < s.groups(); ++k) {
        double w = 0, wd = 0;
        for (std::size_t y = 0; y < 2; ++y) {
            const CellStats& cs = s.cell[k][y];
            if (!mask[y] || cs.w <= 0) continue;
            w += cs.w;
            wd += cs.w * (cs.mean - boundary.solution.beta[s.group_condition[k]][y]);
        }
        if (w <= 0) continue;
        between += (wd / w) * (wd / w);
        groups += 1;
    }
    between /= std::max(groups, 1.0);
    double scale = std::max(between, opt.sigma2_floor);
    for (std::size_t y = 0; y < 2; ++y)
        if (mask[y]) scale = std::max(scale, boundary.sigma2[y]);

    std::vector<std::size_t> slots;
    for (std::size_t y = 0; y < 2; ++y)
        if (mask[y]) slots.push_back(y);
    const std::size_t dim = slots.size() + 1;
    std::vector<double> lo(dim), hi(dim), x0(dim);
    for (std::size_t j = 0; j < slots.size(); ++j) {
        lo[j] = std::log(opt.sigma2_floor);
        hi[j] = std::log(1e8 * scale);
        x0[j] = std::log(boundary.sigma2[slots[j]]);
    }
    lo[dim - 1] = std::log(1e-10 * scale);
    hi[dim - 1] = std::log(1e8 * scale);
    x0[dim - 1] = std::clamp(std::log(std::max(between, 1e-2 * scale)), lo[dim - 1], hi[dim - 1]);

    auto unpack = [&](const std::vector<double>& t, std::array<double, 2>& sig, double& om) {
        sig = {1.0, 1.0};
        for (std::size_t j = 0; j < slots.size(); ++j) sig[slots[j]] = std::exp(t[j]);
        om = std::exp(t[dim - 1]);
    };
    auto objective = [&](const std::vector<double>& t) {
        std::array<double, 2> sig;
        double om;
        unpack(t, sig, om);
        return -ri_solve(s, sig, om, mask).loglik;
    };

    auto first = nelder_mead(objective, x0, lo, hi, opt.optimizer);
    auto refine_opt = opt.optimizer;
    refine_opt.initial_step = 0.1;
    auto second = nelder_mead(objective, first.x, lo, hi, refine_opt);
    if (!second.converged) throw NumericalError("variance-profile optimizer did not converge");

    RiFit interior;
    unpack(second.x, interior.sigma2, interior.omega2);
    interior.solution = ri_solve(s, interior.sigma2, interior.omega2, mask);
    for (double v : first.trace) interior.trace.push_back(-v);
    for (double v : second.trace) interior.trace.push_back(-v);
    if (boundary.solution.loglik >= interior.solution.loglik) {
        boundary.trace = interior.trace;
        boundary.trace.push_back(std::max(boundary.trace.back(), boundary.solution.loglik));
        return boundary;
    }
    return interior;
}

} // namespace detail

/// Fit the probability-weighted random-intercept model. `w1` holds P(Y=1)
/// per record; class 0 uses 1 - w1. With label_dependent each class gets its
/// own fit and its own random effects, otherwise both classes share b_k.
inline MixedEffectsFit fit_weighted_lmm(const GroupedData& data, std::span<const double> w1, const LmmOptions& opt = {})
{
    const std::size_t n = data.size();
    detail::require(n > 0, "empty dataset");
    detail::require(w1.size() == n, "weights and records differ in length");
    detail::require(data.group.size() == n, "group column and records differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(std::isfinite(data.x[i]), "non-finite x at row " + std::to_string(i));
        detail::require(w1[i] >= 0.0 && w1[i] <= 1.0, "weights must lie in [0, 1]");
    }
    std::vector<double> w0(n);
    for (std::size_t i = 0; i < n; ++i) w0[i] = 1.0 - w1[i];

    MixedEffectsFit fit;
    fit.label_dependent = opt.label_dependent;
    fit.conditions = data.condition_names;
    fit.groups = data.group_names;
    fit.beta.assign(data.conditions(), {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()});
    fit.b_hat.assign(data.groups(), {0.0, 0.0});

    const std::array<std::span<const double>, 2> weights{std::span<const double>(w0), w1};
    const auto all = detail::ri_stats(data.x, data.group, data.group_condition, data.conditions(), weights, opt.min_weight);
    std::array<bool, 2> present{};
    for (int y = 0; y < 2; ++y) {
        present[static_cast<std::size_t>(y)] = all.class_weight(y) > 0;
        if (!present[static_cast<std::size_t>(y)])
            fit.warnings.push_back("class " + std::to_string(y) + " has no weight; omitted");
    }
    if (!present[0] && !present[1]) throw ValidationError("all weights are zero");

    // Whether the classes in `mask` see at least two groups in some condition.
    auto identifiable = [&](std::array<bool, 2> mask) {
        std::vector<int> count(data.conditions(), 0);
        for (std::size_t k = 0; k < data.groups(); ++k)
            if ((mask[0] && all.cell[k][0].w > 0) || (mask[1] && all.cell[k][1].w > 0)) ++count[data.group_condition[k]];
        bool any = false;
        for (std::size_t c = 0; c < count.size(); ++c) {
            if (count[c] == 1)
                fit.warnings.push_back("condition '" + data.condition_names[c] + "' has a single group");
            any = any || count[c] >= 2;
        }
        if (!any) fit.warnings.push_back("random-effect variance not identifiable; fixed at 0");
        return any;
    };

    auto store = [&](const detail::RiFit& r, std::array<bool, 2> mask) {
        for (std::size_t y = 0; y < 2; ++y) {
            if (!mask[y]) continue;
            fit.fitted[y] = true;
            fit.sigma2[y] = r.sigma2[y];
            fit.omega2[y] = r.omega2;
            for (std::size_t c = 0; c < data.conditions(); ++c) {
                fit.beta[c][y] = r.solution.beta[c][y];
                if (std::isnan(fit.beta[c][y]))
                    fit.warnings.push_back("condition '" + data.condition_names[c] + "' has no weight for class " +
                                           std::to_string(y));
            }
            for (std::size_t k = 0; k < data.groups(); ++k) fit.b_hat[k][y] = r.solution.b[k];
        }
        fit.loglik += r.solution.loglik;
        fit.traces.push_back(r.trace);
    };

    if (opt.label_dependent) {
        for (std::size_t y = 0; y < 2; ++y) {
            if (!present[y]) continue;
            std::array<bool, 2> mask{y == 0, y == 1};
            store(detail::ri_fit_ml(all, mask, identifiable(mask), opt), mask);
        }
    } else {
        auto r = detail::ri_fit_ml(all, present, identifiable(present), opt);
        store(r, present);
        // One intercept per group: copy it to an omitted class too.
        for (std::size_t k = 0; k < data.groups(); ++k) fit.b_hat[k] = {r.solution.b[k], r.solution.b[k]};
        fit.omega2 = {r.omega2, r.omega2};
    }

    fit.residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = fit.b_hat[data.group[i]];
        fit.residuals[i] = {data.x[i] - b[0], data.x[i] - b[1]};
    }
    return fit;
}

inline MixedEffectsFit fit_weighted_lmm(const Dataset& data, std::span<const double> w1, const LmmOptions& opt = {})
{
    return fit_weighted_lmm(grouped_data(data), w1, opt);
}

inline double weighted_class_mean(std::span<const double> x, std::span<const double> w)
{
    detail::require(x.size() == w.size(), "values and weights differ in length");
    double sw = 0, swx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        swx += w[i] * x[i];
    }
    detail::require(sw > 0, "zero total weight");
    return swx / sw;
}

/// Mean of x over records whose probability exceeds h.
inline double threshold_class_mean(std::span<const double> x, std::span<const double> probs, double h = 0.5)
{
    detail::require(x.size() == probs.size(), "values and probabilities differ in length");
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (probs[i] > h) {
            s += x[i];
            ++n;
        }
    detail::require(n > 0, "no record exceeds the threshold");
    return s / static_cast<double>(n);
}

} // namespace lshift
