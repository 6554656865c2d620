#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lshift/classifier.hpp"
#include "lshift/data.hpp"
#include "lshift/error.hpp"
#include "lshift/interval.hpp"
#include "lshift/mixed_effects.hpp"
#include "lshift/mixture.hpp"
#include "lshift/parallel.hpp"
#include "lshift/random.hpp"
#include "lshift/shift.hpp"

namespace lshift {

enum class ClassifierMode { refit, posterior_sample };

inline const char* to_string(ClassifierMode m) { return m == ClassifierMode::refit ? "refit" : "posterior_sample"; }

struct BootstrapConfig {
    std::size_t B = 200;
    double level = 0.95;
    IntervalKind interval_kind = IntervalKind::pivotal;
    ClassifierMode classifier_mode = ClassifierMode::posterior_sample;
    std::uint64_t seed = 1;
    ShiftMethod shift_method = ShiftMethod::fixed_point;
    ShiftMode shift_mode = ShiftMode::label_shift;
    double threshold = 0.5; // h for the discretization method
    FixedPointSearch search{};
    int threads = 1;
    std::size_t first_replicate = 0;     // index of the first replicate, for splitting one run into pieces
    bool stratify_training = false;      // resample training rows within groups
    bool stratify_test = false;          // resample test rows (and residuals) within groups
    std::size_t calibration_replicates = 0; // first-pass size of the variance calibration; 0 means B
    LmmOptions lmm{};
    MixtureOptions mixture{};
};

struct ReplicateDiagnostics {
    std::size_t index = 0;
    bool failed = false;
    std::string error;
    double train_prevalence = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> prevalence; // by test condition; NaN when a condition is absent
};

struct BootstrapResult {
    std::string condition;
    double point = 0;
    std::vector<double> replicates; // successful replicates in index order
    Interval interval;
    std::size_t n_failed = 0;
};

struct BootstrapRun {
    std::string procedure;
    std::vector<BootstrapResult> results; // one per test condition
    std::vector<ReplicateDiagnostics> diagnostics;
    std::size_t n_failed = 0; // replicates that raised an error
    std::vector<std::string> warnings;
    std::map<std::string, double> point_prevalence;
    double train_prevalence = 0;
    std::map<std::string, double> extras; // procedure-specific scalars, e.g. variance components
    double seconds = 0;

    const BootstrapResult& at(const std::string& c) const
    {
        for (const auto& r : results)
            if (r.condition == c) return r;
        throw ValidationError("unknown condition: " + c);
    }
};

namespace detail {

struct BootstrapContext {
    const Dataset& train;
    const Dataset& test;
    const ClassifierModel& model;
    const BootstrapConfig& cfg;
    Eigen::MatrixXd x_train; // design rows
    Eigen::MatrixXd x_test;
    std::vector<std::vector<std::size_t>> train_by_group;
    std::vector<std::vector<std::size_t>> test_by_group;

    BootstrapContext(const Dataset& tr, const Dataset& te, const ClassifierModel& m, const BootstrapConfig& c)
        : train(tr), test(te), model(m), cfg(c)
    {
        detail::require(train.labeled(), "bootstrap needs labeled training data");
        detail::require(train.dim() == model.design.dim() && test.dim() == model.design.dim(),
                        "dimension mismatch between model and datasets");
        detail::require(cfg.B >= 2, "B must be at least 2");
        detail::require(cfg.level > 0.0 && cfg.level < 1.0, "level must lie in (0, 1)");
        x_train = model.design.matrix(train.features());
        x_test = model.design.matrix(test.features());
        train_by_group = rows_by_group(train);
        test_by_group = rows_by_group(test);
    }

    static std::vector<std::vector<std::size_t>> rows_by_group(const Dataset& d)
    {
        std::vector<std::vector<std::size_t>> out(d.groups().size());
        for (std::size_t i = 0; i < d.size(); ++i) out[d.group_index()[i]].push_back(i);
        return out;
    }
};

inline std::vector<std::size_t> resample_rows(std::size_t n, const std::vector<std::vector<std::size_t>>& by_group, bool stratified,
                                              Engine& rng)
{
    std::vector<std::size_t> rows;
    rows.reserve(n);
    if (!stratified) {
        for (std::size_t i = 0; i < n; ++i) rows.push_back(uniform_index(rng, n));
        return rows;
    }
    for (const auto& g : by_group)
        for (std::size_t j = 0; j < g.size(); ++j) rows.push_back(g[uniform_index(rng, g.size())]);
    return rows;
}

struct ShiftDraw {
    double pi_train = 0;
    std::vector<double> prevalence; // by test condition index
    std::vector<double> raw;        // classifier probabilities of the sampled test rows
    std::vector<double> corrected;  // prior-corrected probabilities of the sampled test rows
};

/// Prevalence estimates and corrected probabilities for one (training
/// sample, classifier, test sample) triple. Row lists index the original data.
inline ShiftDraw shift_on_sample(const BootstrapContext& ctx, std::span<const std::size_t> train_rows, const Eigen::VectorXd& beta,
                                 std::span<const std::size_t> test_rows)
{
    const auto& cfg = ctx.cfg;
    ShiftDraw out;
    std::vector<int> y(train_rows.size());
    double pos = 0;
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        y[i] = ctx.train.labels()[train_rows[i]];
        pos += y[i];
    }
    out.pi_train = pos / static_cast<double>(y.size());
    if (out.pi_train <= 0.0 || out.pi_train >= 1.0) throw ValidationError("single-class training sample");

    out.raw = predict_rows(take_rows(ctx.x_test, test_rows), beta);
    const std::size_t nc = ctx.test.conditions().size();
    std::vector<std::vector<double>> by_cond(nc);
    for (std::size_t i = 0; i < test_rows.size(); ++i) by_cond[ctx.test.condition_index()[test_rows[i]]].push_back(out.raw[i]);

    out.prevalence.assign(nc, std::numeric_limits<double>::quiet_NaN());
    const bool correct = cfg.shift_mode == ShiftMode::label_shift;
    std::vector<double> train_probs;
    if (correct && cfg.shift_method == ShiftMethod::discretization) train_probs = predict_rows(take_rows(ctx.x_train, train_rows), beta);
    for (std::size_t c = 0; c < nc; ++c) {
        if (by_cond[c].empty()) continue;
        if (!correct || cfg.shift_method == ShiftMethod::naive) {
            double s = 0;
            for (double p : by_cond[c]) s += p;
            out.prevalence[c] = s / static_cast<double>(by_cond[c].size());
        } else if (cfg.shift_method == ShiftMethod::fixed_point) {
            out.prevalence[c] = fixed_point_estimate(by_cond[c], out.pi_train, cfg.search);
        } else {
            out.prevalence[c] = discretization_estimate(train_probs, y, by_cond[c], cfg.threshold);
        }
    }
    out.corrected = out.raw;
    if (correct)
        for (std::size_t i = 0; i < test_rows.size(); ++i)
            out.corrected[i] = correct_prediction(clip_probability(out.raw[i]), out.pi_train,
                                                  out.prevalence[ctx.test.condition_index()[test_rows[i]]]);
    return out;
}

inline std::vector<std::size_t> identity_rows(std::size_t n)
{
    std::vector<std::size_t> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = i;
    return r;
}

/// Classifier coefficients for a replicate: refit on the resampled rows or
/// a draw from the coefficient posterior.
inline Eigen::VectorXd replicate_classifier(const BootstrapContext& ctx, std::span<const std::size_t> train_rows, Engine& rng)
{
    if (ctx.cfg.classifier_mode == ClassifierMode::posterior_sample) return sample_coefficients(ctx.model, rng);
    std::vector<int> y(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) y[i] = ctx.train.labels()[train_rows[i]];
    return refit_classifier(ctx.model, take_rows(ctx.x_train, train_rows), y).beta_hat;
}

struct ReplicateOutput {
    std::vector<double> values; // by test condition; NaN when not estimable
    ReplicateDiagnostics diag;
};

/// Run `body(index, rng)` for every replicate of the configured range on
/// its own stream and assemble per-condition results.
template <class Body>
void run_replicates(const BootstrapContext& ctx, std::uint64_t tag, std::size_t count, std::size_t first, Body&& body,
                    std::vector<ReplicateOutput>& out)
{
    const auto& cfg = ctx.cfg;
    out.assign(count, {});
    parallel_for(count, cfg.threads, [&](std::size_t s) {
        const std::size_t index = first + s;
        auto rng = make_stream(cfg.seed, {tag, index});
        ReplicateOutput& slot = out[s];
        slot.diag.index = index;
        try {
            body(rng, slot);
        } catch (const ValidationError& e) {
            slot.diag.failed = true;
            slot.diag.error = e.what();
        } catch (const NumericalError& e) {
            slot.diag.failed = true;
            slot.diag.error = e.what();
        }
        if (slot.diag.failed) slot.values.assign(ctx.test.conditions().size(), std::numeric_limits<double>::quiet_NaN());
    });
}

inline void assemble(const BootstrapContext& ctx, const std::vector<double>& points, std::vector<ReplicateOutput>& reps,
                     BootstrapRun& run)
{
    const auto& cfg = ctx.cfg;
    const std::size_t nc = ctx.test.conditions().size();
    if (cfg.B == 2) run.warnings.push_back("B = 2: interval rests on two replicates");
    for (const auto& r : reps) {
        run.n_failed += r.diag.failed ? 1 : 0;
        run.diagnostics.push_back(r.diag);
    }
    for (std::size_t c = 0; c < nc; ++c) {
        BootstrapResult res;
        res.condition = ctx.test.conditions()[c];
        res.point = points[c];
        for (const auto& r : reps) {
            const double v = r.values[c];
            if (std::isfinite(v)) res.replicates.push_back(v);
            else ++res.n_failed;
        }
        if (4 * res.n_failed > cfg.B) {
            std::string why;
            for (const auto& r : reps)
                if (r.diag.failed) {
                    why = ": " + r.diag.error;
                    break;
                }
            throw NumericalError("too many failed replicates for condition '" + res.condition + "' (" + std::to_string(res.n_failed) +
                                 " of " + std::to_string(cfg.B) + ")" + why);
        }
        if (!std::isfinite(res.point)) throw NumericalError("point estimate not available for condition '" + res.condition + "'");
        res.interval = interval_from_replicates(res.point, res.replicates, cfg.level, cfg.interval_kind);
        run.results.push_back(std::move(res));
    }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline GroupedData resampled_grouped(const GroupedData& base, std::span<const std::size_t> rows, std::vector<double> x)
{
    GroupedData g;
    g.x = std::move(x);
    g.group.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) g.group[i] = base.group[rows[i]];
    g.group_condition = base.group_condition;
    g.condition_names = base.condition_names;
    g.group_names = base.group_names;
    return g;
}

inline void record_point_shift(const BootstrapContext& ctx, const ShiftDraw& point, BootstrapRun& run)
{
    run.train_prevalence = point.pi_train;
    for (std::size_t c = 0; c < ctx.test.conditions().size(); ++c) run.point_prevalence[ctx.test.conditions()[c]] = point.prevalence[c];
}

} // namespace detail

/// Prevalence intervals for every test condition (resample training rows,
/// redraw the classifier, resample test rows, re-estimate).
inline BootstrapRun bootstrap_prevalence_ci(const Dataset& train, const Dataset& test, const ClassifierModel& model,
                                            const BootstrapConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const detail::BootstrapContext ctx(train, test, model, cfg);
    BootstrapRun run;
    run.procedure = "prevalence";
    const auto all_train = detail::identity_rows(train.size()), all_test = detail::identity_rows(test.size());
    const auto point = detail::shift_on_sample(ctx, all_train, model.beta_hat, all_test);
    detail::record_point_shift(ctx, point, run);

    std::vector<detail::ReplicateOutput> reps;
    detail::run_replicates(ctx, stream_tag::bootstrap, cfg.B, cfg.first_replicate, [&](Engine& rng, detail::ReplicateOutput& slot) {
        const auto train_rows = detail::resample_rows(train.size(), ctx.train_by_group, cfg.stratify_training, rng);
        const auto beta = detail::replicate_classifier(ctx, train_rows, rng);
        const auto test_rows = detail::resample_rows(test.size(), ctx.test_by_group, cfg.stratify_test, rng);
        const auto draw = detail::shift_on_sample(ctx, train_rows, beta, test_rows);
        slot.values = draw.prevalence;
        slot.diag.train_prevalence = draw.pi_train;
        slot.diag.prevalence = draw.prevalence;
    }, reps);
    detail::assemble(ctx, point.prevalence, reps, run);
    run.seconds = detail::seconds_since(t0);
    return run;
}

struct LmmBootstrapOptions {
    bool label_dependent = false;
    bool variance_calibration = false; // two-pass calibration of the random-effect variances
};

namespace detail {

/// Calibration line v^2 = a + b * omega^2 by least squares.
inline std::array<double, 2> calibration_line(std::span<const double> omega2, std::span<const double> v2)
{
    const auto n = static_cast<double>(omega2.size());
    detail::require(omega2.size() >= 2, "calibration needs at least two replicates");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < omega2.size(); ++i) {
        mx += omega2[i] / n;
        my += v2[i] / n;
    }
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < omega2.size(); ++i) {
        sxx += (omega2[i] - mx) * (omega2[i] - mx);
        sxy += (omega2[i] - mx) * (v2[i] - my);
    }
    if (!(sxx > 0)) return {my, 0.0};
    const double slope = sxy / sxx;
    return {my - slope * mx, slope};
}

} // namespace detail

/// Intervals for beta_{c,1} of the probability-weighted mixed model, by
/// regenerating test x from residuals and fresh random effects.
inline BootstrapRun bootstrap_mean_ci_lmm(const Dataset& train, const Dataset& test, const ClassifierModel& model,
                                          const BootstrapConfig& cfg, const LmmBootstrapOptions& mode = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    detail::require(!mode.variance_calibration || mode.label_dependent, "variance calibration needs label-dependent random effects");
    const detail::BootstrapContext ctx(train, test, model, cfg);
    const GroupedData grouped = grouped_data(test);
    BootstrapRun run;
    run.procedure = mode.variance_calibration ? "lmm-labeldep-calibrated" : (mode.label_dependent ? "lmm-labeldep" : "lmm");
    const auto all_train = detail::identity_rows(train.size()), all_test = detail::identity_rows(test.size());
    const auto point_shift = detail::shift_on_sample(ctx, all_train, model.beta_hat, all_test);
    detail::record_point_shift(ctx, point_shift, run);

    LmmOptions lopt = cfg.lmm;
    lopt.label_dependent = mode.label_dependent;
    const auto fit = fit_weighted_lmm(grouped, point_shift.corrected, lopt);
    for (const auto& w : fit.warnings) run.warnings.push_back(w);
    std::vector<double> points(grouped.conditions());
    for (std::size_t c = 0; c < points.size(); ++c) points[c] = fit.beta[c][1];
    run.extras["omega2_1"] = fit.omega2[1];
    run.extras["sigma2_1"] = fit.sigma2[1];
    if (mode.label_dependent) {
        run.extras["omega2_0"] = fit.omega2[0];
        run.extras["sigma2_0"] = fit.sigma2[0];
    }
    const std::size_t ng = grouped.groups();
    const std::size_t nc = grouped.conditions();

    // One replicate: returns the replicate fit; b_star receives the drawn effects.
    auto replicate = [&](Engine& rng, std::array<double, 2> omega2, std::vector<std::array<double, 2>>& b_star, detail::ReplicateOutput& slot) {
        const auto train_rows = detail::resample_rows(train.size(), ctx.train_by_group, cfg.stratify_training, rng);
        const auto beta = detail::replicate_classifier(ctx, train_rows, rng);
        const auto rows = detail::resample_rows(test.size(), ctx.test_by_group, cfg.stratify_test, rng);
        std::vector<int> y_star(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) y_star[i] = bernoulli(rng, point_shift.corrected[rows[i]]) ? 1 : 0;
        b_star.assign(ng, {0, 0});
        for (std::size_t k = 0; k < ng; ++k) {
            if (mode.label_dependent) {
                b_star[k][0] = std::sqrt(omega2[0]) * standard_normal(rng);
                b_star[k][1] = std::sqrt(omega2[1]) * standard_normal(rng);
            } else {
                const double b = std::sqrt(omega2[1]) * standard_normal(rng);
                b_star[k] = {b, b};
            }
        }
        std::vector<double> x(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t src = rows[i], k = grouped.group[src];
            const std::size_t y = mode.label_dependent ? static_cast<std::size_t>(y_star[i]) : 1;
            x[i] = fit.residuals[src][y] + b_star[k][y];
        }
        const auto draw = detail::shift_on_sample(ctx, train_rows, beta, rows);
        slot.diag.train_prevalence = draw.pi_train;
        slot.diag.prevalence = draw.prevalence;
        const auto rep = fit_weighted_lmm(detail::resampled_grouped(grouped, rows, std::move(x)), draw.corrected, lopt);
        slot.values.assign(nc, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t c = 0; c < nc; ++c) slot.values[c] = rep.beta[c][1];
        return rep;
    };

    std::array<double, 2> omega2_boot = fit.omega2;
    if (mode.variance_calibration) {
        // The first pass always covers replicate indices [0, B_cal), so a run
        // split by first_replicate sees the same calibration line.
        const std::size_t n_cal = cfg.calibration_replicates > 0 ? cfg.calibration_replicates : cfg.B;
        detail::require(n_cal >= 2, "calibration needs at least two replicates");
        std::vector<std::array<double, 2>> omega_hat(n_cal), v2(n_cal);
        std::vector<char> ok(n_cal, 0);
        std::vector<detail::ReplicateOutput> first;
        detail::run_replicates(ctx, stream_tag::calibration_pass, n_cal, 0, [&](Engine& rng, detail::ReplicateOutput& slot) {
            std::vector<std::array<double, 2>> b_star;
            const auto rep = replicate(rng, fit.omega2, b_star, slot);
            const std::size_t s = slot.diag.index;
            for (std::size_t y = 0; y < 2; ++y) {
                double sb = 0;
                for (const auto& b : b_star) sb += b[y] * b[y];
                v2[s][y] = ng > 1 ? sb / static_cast<double>(ng - 1) : 0.0;
                omega_hat[s][y] = rep.omega2[y];
            }
            ok[s] = 1;
        }, first);
        std::size_t failed_first = 0;
        for (std::size_t y = 0; y < 2; ++y) {
            std::vector<double> xs, ys;
            for (std::size_t s = 0; s < n_cal; ++s)
                if (ok[s] && std::isfinite(omega_hat[s][y])) {
                    xs.push_back(omega_hat[s][y]);
                    ys.push_back(v2[s][y]);
                }
            if (y == 0) failed_first = n_cal - xs.size();
            if (4 * (n_cal - xs.size()) > n_cal) throw NumericalError("too many failed calibration replicates");
            const auto line = detail::calibration_line(xs, ys);
            omega2_boot[y] = std::max(0.0, line[0] + line[1] * fit.omega2[y]);
            run.extras["calibration_intercept_" + std::to_string(y)] = line[0];
            run.extras["calibration_slope_" + std::to_string(y)] = line[1];
        }
        run.extras["omega2_adj_0"] = omega2_boot[0];
        run.extras["omega2_adj_1"] = omega2_boot[1];
        run.extras["calibration_failed"] = static_cast<double>(failed_first);
    }

    std::vector<detail::ReplicateOutput> reps;
    detail::run_replicates(ctx, stream_tag::bootstrap, cfg.B, cfg.first_replicate, [&](Engine& rng, detail::ReplicateOutput& slot) {
        std::vector<std::array<double, 2>> b_star;
        replicate(rng, omega2_boot, b_star, slot);
    }, reps);
    detail::assemble(ctx, points, reps, run);
    run.seconds = detail::seconds_since(t0);
    return run;
}

/// Intervals for beta_{c,1} of the hierarchical mixture with mixing
/// proportions fixed at the label-shift prevalence estimates.
inline BootstrapRun bootstrap_mean_ci_mixture(const Dataset& train, const Dataset& test, const ClassifierModel& model,
                                              const BootstrapConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const detail::BootstrapContext ctx(train, test, model, cfg);
    const GroupedData grouped = grouped_data(test);
    BootstrapRun run;
    run.procedure = "mixture";
    const auto all_train = detail::identity_rows(train.size()), all_test = detail::identity_rows(test.size());
    const auto point_shift = detail::shift_on_sample(ctx, all_train, model.beta_hat, all_test);
    detail::record_point_shift(ctx, point_shift, run);

    auto mixing_for = [&](const detail::ShiftDraw& d, std::span<const std::size_t> rows) {
        std::vector<double> m(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) m[i] = d.prevalence[grouped.condition_of(rows[i])];
        return m;
    };
    const auto fit = fit_hier_gmm(grouped, mixing_for(point_shift, all_test), cfg.mixture, point_shift.corrected);
    std::vector<double> points(grouped.conditions());
    for (std::size_t c = 0; c < points.size(); ++c) points[c] = fit.beta[c][1];
    run.extras["omega2_0"] = fit.omega2[0];
    run.extras["omega2_1"] = fit.omega2[1];
    run.extras["sigma2_0"] = fit.sigma2[0];
    run.extras["sigma2_1"] = fit.sigma2[1];
    run.extras["em_iterations"] = static_cast<double>(fit.iterations);
    const std::size_t ng = grouped.groups(), nc = grouped.conditions();
    MixtureStart warm = fit.start();
    warm.b.clear();

    std::vector<detail::ReplicateOutput> reps;
    detail::run_replicates(ctx, stream_tag::bootstrap, cfg.B, cfg.first_replicate, [&](Engine& rng, detail::ReplicateOutput& slot) {
        const auto train_rows = detail::resample_rows(train.size(), ctx.train_by_group, cfg.stratify_training, rng);
        const auto beta = detail::replicate_classifier(ctx, train_rows, rng);
        const auto rows = detail::resample_rows(test.size(), ctx.test_by_group, cfg.stratify_test, rng);
        std::vector<int> y_star(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) y_star[i] = bernoulli(rng, point_shift.corrected[rows[i]]) ? 1 : 0;
        std::vector<std::array<double, 2>> b_star(ng);
        for (std::size_t k = 0; k < ng; ++k) {
            if (fit.shared_random_effect) {
                const double b = std::sqrt(fit.omega2[1]) * standard_normal(rng);
                b_star[k] = {b, b};
            } else {
                b_star[k][0] = std::sqrt(fit.omega2[0]) * standard_normal(rng);
                b_star[k][1] = std::sqrt(fit.omega2[1]) * standard_normal(rng);
            }
        }
        std::vector<double> x(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t src = rows[i], k = grouped.group[src];
            const auto y = static_cast<std::size_t>(y_star[i]);
            x[i] = grouped.x[src] - fit.b_hat[k][y] + b_star[k][y];
        }
        const auto draw = detail::shift_on_sample(ctx, train_rows, beta, rows);
        slot.diag.train_prevalence = draw.pi_train;
        slot.diag.prevalence = draw.prevalence;
        const auto data = detail::resampled_grouped(grouped, rows, std::move(x));
        const auto rep = fit_hier_gmm(data, mixing_for(draw, rows), cfg.mixture, {}, &warm);
        slot.values.assign(nc, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t c = 0; c < nc; ++c) slot.values[c] = rep.beta[c][1];
    }, reps);
    detail::assemble(ctx, points, reps, run);
    run.seconds = detail::seconds_since(t0);
    return run;
}

} // namespace lshift
