#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lshift/bspline.hpp"
#include "lshift/error.hpp"
#include "lshift/mixed_effects.hpp"
#include "lshift/random_intercept.hpp"

namespace lshift {

enum class MixtureInit { weighted, quantile, reversed, supplied };

inline const char* to_string(MixtureInit m)
{
    switch (m) {
    case MixtureInit::weighted: return "weighted";
    case MixtureInit::quantile: return "quantile";
    case MixtureInit::reversed: return "reversed";
    case MixtureInit::supplied: return "supplied";
    }
    return "?";
}

struct MixtureOptions {
    bool shared_random_effect = false; // one b_k for both classes instead of b_{k,y}
    std::size_t max_iter = 500;
    double tol = 1e-8; // relative change of the penalized loglik
    double sigma2_floor = 1e-10;
    double resp_clip = 1e-12;
    int restarts = 3; // initialization rules tried: weighted (if weights given), quantile, reversed
};

/// Starting values for EM; b may be empty (all zero).
struct MixtureStart {
    std::vector<std::array<double, 2>> beta; // [condition][class]
    std::array<double, 2> sigma2{1.0, 1.0};
    std::array<double, 2> omega2{0.0, 0.0};
    std::vector<std::array<double, 2>> b; // [group][class]
};

struct MixtureFit {
    bool shared_random_effect = false;
    std::vector<std::string> conditions;
    std::vector<std::string> groups;
    std::vector<std::array<double, 2>> beta;
    std::array<double, 2> sigma2{};
    std::array<double, 2> omega2{};
    std::array<bool, 2> omega2_fixed{false, false}; // held at 0 for lack of groups
    std::vector<std::array<double, 2>> b_hat;
    std::vector<double> responsibilities; // P(Y=1 | x) per record
    double loglik = 0;                    // penalized observed-data loglik
    std::vector<double> trace;            // penalized loglik after each EM iteration
    std::size_t iterations = 0;
    bool converged = false;
    bool monotone = true;
    MixtureInit init = MixtureInit::quantile;
    std::vector<std::string> warnings;

    MixtureStart start() const { return MixtureStart{beta, sigma2, omega2, b_hat}; }

    double coefficient(const std::string& condition, int y) const
    {
        for (std::size_t c = 0; c < conditions.size(); ++c)
            if (conditions[c] == condition) return beta[c][static_cast<std::size_t>(y)];
        throw ValidationError("unknown condition: " + condition);
    }
};

/// Mixing proportion per record: a group entry wins over its condition's.
inline std::vector<double> mixing_per_record(const GroupedData& data, const std::map<std::string, double>& mixing)
{
    std::vector<double> per_group(data.groups());
    for (std::size_t k = 0; k < data.groups(); ++k) {
        auto it = mixing.find(data.group_names[k]);
        if (it == mixing.end()) it = mixing.find(data.condition_names[data.group_condition[k]]);
        detail::require(it != mixing.end(), "no mixing proportion for group '" + data.group_names[k] + "'");
        per_group[k] = it->second;
    }
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = per_group[data.group[i]];
    return out;
}

namespace detail {

struct MixtureState {
    std::vector<std::array<double, 2>> beta;
    std::array<double, 2> sigma2{1.0, 1.0};
    std::array<double, 2> omega2{0.0, 0.0};
    std::vector<std::array<double, 2>> b;
};

inline double log_normal_density(double x, double mean, double var)
{
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

/// Penalized observed-data loglik; fills responsibilities when `resp` is given.
inline double mixture_penalized_loglik(const GroupedData& data, std::span<const double> mixing, const MixtureState& s,
                                       std::array<bool, 2> omega_fixed, bool shared, std::vector<double>* resp,
                                       double clip)
{
    double ll = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t k = data.group[i], c = data.group_condition[k];
        const double l1 = std::log(mixing[i]) + log_normal_density(data.x[i], s.beta[c][1] + s.b[k][1], s.sigma2[1]);
        const double l0 = std::log1p(-mixing[i]) + log_normal_density(data.x[i], s.beta[c][0] + s.b[k][0], s.sigma2[0]);
        const double hi = std::max(l0, l1);
        const double mix = hi + std::log(std::exp(l0 - hi) + std::exp(l1 - hi));
        ll += mix;
        if (resp) (*resp)[i] = std::clamp(std::exp(l1 - mix), clip, 1.0 - clip);
    }
    for (std::size_t y = 0; y < 2; ++y) {
        if (omega_fixed[y] || (shared && y == 0)) continue;
        for (std::size_t k = 0; k < data.groups(); ++k)
            ll -= s.b[k][y] * s.b[k][y] / (2.0 * s.omega2[y]) + 0.5 * std::log(2.0 * std::numbers::pi * s.omega2[y]);
    }
    return ll;
}

inline double sample_variance(std::span<const double> x)
{
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return x.size() > 1 ? s / static_cast<double>(x.size() - 1) : 0.0;
}

/// Class means and variances from per-record class-1 weights.
inline MixtureState state_from_weights(const GroupedData& data, std::span<const double> w1, double floor)
{
    MixtureState s;
    const std::size_t nc = data.conditions();
    std::vector<std::array<double, 2>> sw(nc, {0, 0}), swx(nc, {0, 0});
    std::array<double, 2> tw{0, 0}, twx{0, 0};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = data.condition_of(i);
        const std::array<double, 2> w{1.0 - w1[i], w1[i]};
        for (std::size_t y = 0; y < 2; ++y) {
            sw[c][y] += w[y];
            swx[c][y] += w[y] * data.x[i];
            tw[y] += w[y];
            twx[y] += w[y] * data.x[i];
        }
    }
    s.beta.assign(nc, {0, 0});
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t y = 0; y < 2; ++y)
            s.beta[c][y] = sw[c][y] > 0 ? swx[c][y] / sw[c][y] : (tw[y] > 0 ? twx[y] / tw[y] : 0.0);
    std::array<double, 2> ss{0, 0};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = data.condition_of(i);
        const std::array<double, 2> w{1.0 - w1[i], w1[i]};
        for (std::size_t y = 0; y < 2; ++y) ss[y] += w[y] * (data.x[i] - s.beta[c][y]) * (data.x[i] - s.beta[c][y]);
    }
    const double fallback = std::max(sample_variance(data.x), floor);
    for (std::size_t y = 0; y < 2; ++y) s.sigma2[y] = tw[y] > 0 ? std::max(ss[y] / tw[y], floor) : fallback;
    s.b.assign(data.groups(), {0, 0});
    return s;
}

/// Hard split per condition: the top (or, reversed, bottom) mixing share of x goes to class 1.
inline std::vector<double> quantile_split(const GroupedData& data, std::span<const double> mixing, bool reversed)
{
    std::vector<std::vector<double>> by_cond(data.conditions());
    std::vector<double> share(data.conditions(), 0), count(data.conditions(), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_cond[data.condition_of(i)].push_back(data.x[i]);
        share[data.condition_of(i)] += mixing[i];
        count[data.condition_of(i)] += 1;
    }
    std::vector<double> cut(data.conditions());
    for (std::size_t c = 0; c < cut.size(); ++c) {
        if (by_cond[c].empty()) continue;
        std::sort(by_cond[c].begin(), by_cond[c].end());
        const double p = share[c] / count[c];
        cut[c] = quantile_sorted(by_cond[c], reversed ? p : 1.0 - p);
    }
    std::vector<double> w(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double cu = cut[data.condition_of(i)];
        w[i] = reversed ? (data.x[i] <= cu ? 1.0 : 0.0) : (data.x[i] > cu ? 1.0 : 0.0);
    }
    return w;
}

} // namespace detail

/// Penalized observed-data log-likelihood of `fit` on `data`.
inline double mixture_loglik(const MixtureFit& fit, const GroupedData& data, std::span<const double> mixing)
{
    detail::require(mixing.size() == data.size(), "mixing and records differ in length");
    detail::require(fit.beta.size() == data.conditions() && fit.b_hat.size() == data.groups(), "fit does not match data");
    detail::MixtureState s{fit.beta, fit.sigma2, fit.omega2, fit.b_hat};
    return detail::mixture_penalized_loglik(data, mixing, s, fit.omega2_fixed, fit.shared_random_effect, nullptr, 0.0);
}

namespace detail {

inline MixtureFit run_em(const GroupedData& data, std::span<const double> mixing, MixtureState s, const MixtureOptions& opt,
                         MixtureInit init)
{
    const std::size_t n = data.size(), ng = data.groups();
    const double omega_floor = std::max(1e-8 * sample_variance(data.x), 1e-12);
    const bool shared = opt.shared_random_effect;
    std::vector<double> r(n);

    // First E-step at the starting values decides which classes can carry a
    // random-effect variance (at least two groups with responsibility mass >= 1).
    std::array<bool, 2> fixed{false, false};
    {
        const std::array<bool, 2> none{true, true};
        mixture_penalized_loglik(data, mixing, s, none, shared, &r, opt.resp_clip);
        std::vector<std::array<double, 2>> mass(ng, {0, 0});
        for (std::size_t i = 0; i < n; ++i) {
            mass[data.group[i]][0] += 1.0 - r[i];
            mass[data.group[i]][1] += r[i];
        }
        std::array<int, 2> eff{0, 0};
        for (std::size_t k = 0; k < ng; ++k)
            for (std::size_t y = 0; y < 2; ++y) eff[y] += mass[k][y] >= 1.0 ? 1 : 0;
        if (shared) {
            const bool lacking = ng < 2;
            fixed = {true, lacking};
        } else {
            fixed = {eff[0] < 2, eff[1] < 2};
        }
    }
    for (std::size_t y = 0; y < 2; ++y) {
        if (fixed[y]) {
            s.omega2[y] = 0.0;
            for (auto& bk : s.b) bk[y] = shared ? bk[y] : 0.0;
        } else if (!(s.omega2[y] >= omega_floor)) {
            s.omega2[y] = std::max(0.1 * s.sigma2[y], omega_floor);
        }
    }
    if (shared) {
        s.omega2[0] = s.omega2[1];
        if (fixed[1])
            for (auto& bk : s.b) bk = {0, 0};
    }

    MixtureFit fit;
    fit.shared_random_effect = shared;
    fit.conditions = data.condition_names;
    fit.groups = data.group_names;
    fit.omega2_fixed = shared ? std::array<bool, 2>{fixed[1], fixed[1]} : fixed;
    fit.init = init;
    const std::array<bool, 2> pen_fixed = shared ? std::array<bool, 2>{true, fixed[1]} : fixed;

    double f_prev = mixture_penalized_loglik(data, mixing, s, pen_fixed, shared, &r, opt.resp_clip);
    fit.trace.push_back(f_prev);
    std::vector<double> r0(n);
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) r0[i] = 1.0 - r[i];
        const auto stats = ri_stats(data.x, data.group, data.group_condition, data.conditions(),
                                    {std::span<const double>(r0), std::span<const double>(r)}, 0.0);
        // (beta, b) jointly, then sigma2, then omega2: each block raises the penalized objective.
        if (shared) {
            const auto sol = ri_solve(stats, s.sigma2, fixed[1] ? 0.0 : s.omega2[1], {true, true});
            s.beta = sol.beta;
            for (std::size_t k = 0; k < ng; ++k) s.b[k] = {sol.b[k], sol.b[k]};
        } else {
            for (std::size_t y = 0; y < 2; ++y) {
                std::array<bool, 2> mask{y == 0, y == 1};
                const auto sol = ri_solve(stats, s.sigma2, fixed[y] ? 0.0 : s.omega2[y], mask);
                for (std::size_t c = 0; c < data.conditions(); ++c) s.beta[c][y] = sol.beta[c][y];
                for (std::size_t k = 0; k < ng; ++k) s.b[k][y] = sol.b[k];
            }
        }
        for (std::size_t c = 0; c < data.conditions(); ++c)
            for (std::size_t y = 0; y < 2; ++y)
                if (!std::isfinite(s.beta[c][y])) throw NumericalError("component collapse: class without weight in a condition");
        std::array<double, 2> rss{0, 0}, tot{0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = data.group[i], c = data.group_condition[k];
            const double d1 = data.x[i] - s.beta[c][1] - s.b[k][1];
            const double d0 = data.x[i] - s.beta[c][0] - s.b[k][0];
            rss[1] += r[i] * d1 * d1;
            rss[0] += r0[i] * d0 * d0;
            tot[1] += r[i];
            tot[0] += r0[i];
        }
        for (std::size_t y = 0; y < 2; ++y) s.sigma2[y] = std::max(rss[y] / tot[y], opt.sigma2_floor);
        if (shared) {
            if (!fixed[1]) {
                double sb = 0;
                for (std::size_t k = 0; k < ng; ++k) sb += s.b[k][1] * s.b[k][1];
                s.omega2[1] = s.omega2[0] = std::max(sb / static_cast<double>(ng), omega_floor);
            }
        } else {
            for (std::size_t y = 0; y < 2; ++y) {
                if (fixed[y]) continue;
                double sb = 0;
                for (std::size_t k = 0; k < ng; ++k) sb += s.b[k][y] * s.b[k][y];
                s.omega2[y] = std::max(sb / static_cast<double>(ng), omega_floor);
            }
        }

        const double f = mixture_penalized_loglik(data, mixing, s, pen_fixed, shared, &r, opt.resp_clip);
        if (!std::isfinite(f)) throw NumericalError("non-finite mixture loglik");
        fit.trace.push_back(f);
        if (f < f_prev - 1e-9 * (1.0 + std::abs(f_prev))) fit.monotone = false;
        fit.iterations = it;
        const double change = std::abs(f - f_prev) / std::max(std::abs(f_prev), 1e-300);
        f_prev = f;
        if (change < opt.tol) {
            fit.converged = true;
            break;
        }
    }
    if (!fit.converged) throw NumericalError("mixture EM did not converge in " + std::to_string(opt.max_iter) + " iterations");

    for (std::size_t y = 0; y < 2; ++y) {
        double mass = 0;
        for (std::size_t i = 0; i < n; ++i) mass += y == 1 ? r[i] : 1.0 - r[i];
        if (s.sigma2[y] <= opt.sigma2_floor * (1.0 + 1e-9) || mass < 1e-6 * static_cast<double>(n) + 1e-9)
            throw NumericalError("component collapse in class " + std::to_string(y));
    }

    fit.beta = s.beta;
    fit.sigma2 = s.sigma2;
    fit.omega2 = fixed[1] && shared ? std::array<double, 2>{0.0, 0.0} : s.omega2;
    if (!shared)
        for (std::size_t y = 0; y < 2; ++y)
            if (fixed[y]) fit.omega2[y] = 0.0;
    fit.b_hat = s.b;
    fit.responsibilities = r;
    fit.loglik = f_prev;
    return fit;
}

} // namespace detail

/// Two-component hierarchical Gaussian mixture with fixed per-record mixing
/// proportions, fitted by penalized EM with the random intercepts as
/// penalized parameters.
///
/// `init_weights` (optional, e.g. corrected classifier probabilities) seed
/// the "weighted" start. With `start` given only that start is used;
/// otherwise up to opt.restarts rules are tried and the best penalized
/// loglik wins (lowest rule index on ties).
inline MixtureFit fit_hier_gmm(const GroupedData& data, std::span<const double> mixing, const MixtureOptions& opt = {},
                               std::span<const double> init_weights = {}, const MixtureStart* start = nullptr)
{
    const std::size_t n = data.size();
    detail::require(n > 0, "empty dataset");
    detail::require(mixing.size() == n, "mixing and records differ in length");
    for (double p : mixing) detail::require(p > 0.0 && p < 1.0, "mixing proportions must lie in (0, 1)");
    for (double v : data.x) detail::require(std::isfinite(v), "non-finite x");
    std::vector<int> per_group(data.groups(), 0);
    for (std::size_t k : data.group) ++per_group[k];
    for (std::size_t k = 0; k < per_group.size(); ++k)
        detail::require(per_group[k] == 0 || per_group[k] >= 2, "group '" + data.group_names[k] + "' has fewer than two records");

    if (start) {
        detail::require(start->beta.size() == data.conditions(), "start values do not match the conditions");
        detail::MixtureState s{start->beta, start->sigma2, start->omega2, start->b};
        if (s.b.empty()) s.b.assign(data.groups(), {0, 0});
        detail::require(s.b.size() == data.groups(), "start values do not match the groups");
        for (double v : s.sigma2) detail::require(v > 0, "start variances must be positive");
        return detail::run_em(data, mixing, std::move(s), opt, MixtureInit::supplied);
    }

    std::vector<MixtureInit> rules;
    if (!init_weights.empty()) {
        detail::require(init_weights.size() == n, "initial weights and records differ in length");
        rules.push_back(MixtureInit::weighted);
    }
    rules.push_back(MixtureInit::quantile);
    rules.push_back(MixtureInit::reversed);
    rules.resize(std::min<std::size_t>(rules.size(), static_cast<std::size_t>(std::max(opt.restarts, 1))));

    std::optional<MixtureFit> best;
    std::string last_error;
    for (MixtureInit rule : rules) {
        std::vector<double> w = rule == MixtureInit::weighted ? std::vector<double>(init_weights.begin(), init_weights.end())
                                                              : detail::quantile_split(data, mixing, rule == MixtureInit::reversed);
        try {
            auto fit = detail::run_em(data, mixing, detail::state_from_weights(data, w, opt.sigma2_floor), opt, rule);
            if (!best || fit.loglik > best->loglik) best = std::move(fit);
        } catch (const NumericalError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw NumericalError("all mixture restarts failed: " + last_error);
    return *best;
}

inline MixtureFit fit_hier_gmm(const GroupedData& data, const std::map<std::string, double>& mixing, const MixtureOptions& opt = {},
                               std::span<const double> init_weights = {})
{
    const auto per_record = mixing_per_record(data, mixing);
    return fit_hier_gmm(data, per_record, opt, init_weights);
}

/// One row of the per-group fitted component densities.
struct ComponentCurvePoint {
    std::string group;
    double x = 0;
    double density0 = 0; // (1 - pi) * N(x; beta_c0 + b_k0, sigma2_0)
    double density1 = 0; // pi * N(x; beta_c1 + b_k1, sigma2_1)
};

/// Fitted component curves for every group on `points` equally spaced x values.
inline std::vector<ComponentCurvePoint> component_curves(const MixtureFit& fit, const GroupedData& data,
                                                         std::span<const double> mixing, std::size_t points = 200)
{
    detail::require(points >= 2, "need at least two curve points");
    const auto [lo_it, hi_it] = std::minmax_element(data.x.begin(), data.x.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> pi_group(data.groups(), 0.5);
    for (std::size_t i = 0; i < data.size(); ++i) pi_group[data.group[i]] = mixing[i];
    std::vector<ComponentCurvePoint> out;
    for (std::size_t k = 0; k < data.groups(); ++k) {
        const std::size_t c = data.group_condition[k];
        for (std::size_t j = 0; j < points; ++j) {
            const double x = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
            ComponentCurvePoint p;
            p.group = data.group_names[k];
            p.x = x;
            p.density0 = (1.0 - pi_group[k]) * std::exp(detail::log_normal_density(x, fit.beta[c][0] + fit.b_hat[k][0], fit.sigma2[0]));
            p.density1 = pi_group[k] * std::exp(detail::log_normal_density(x, fit.beta[c][1] + fit.b_hat[k][1], fit.sigma2[1]));
            out.push_back(p);
        }
    }
    return out;
}

} // namespace lshift
