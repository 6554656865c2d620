#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lshift/classifier.hpp"
#include "lshift/data.hpp"
#include "lshift/error.hpp"

namespace lshift {

enum class ShiftMethod { discretization, fixed_point, naive };
enum class ShiftMode { label_shift, none };

inline const char* to_string(ShiftMethod m)
{
    switch (m) {
    case ShiftMethod::discretization: return "discretization";
    case ShiftMethod::fixed_point: return "fixed_point";
    case ShiftMethod::naive: return "naive";
    }
    return "?";
}

inline const char* to_string(ShiftMode m) { return m == ShiftMode::label_shift ? "label_shift" : "none"; }

/// Raw probabilities are pulled into [kProbClip, 1 - kProbClip] before any
/// prior correction.
inline constexpr double kProbClip = 1e-6;

inline double clip_probability(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }

/// Bayes-rule prior correction of a classifier probability from the
/// training prevalence to a new prevalence. 0 and 1 are fixed points.
inline double correct_prediction(double p_raw, double pi_train, double pi_test)
{
    if (p_raw <= 0.0) return 0.0;
    if (p_raw >= 1.0) return 1.0;
    const double up = pi_test / pi_train;
    const double down = (1.0 - pi_test) / (1.0 - pi_train);
    return up * p_raw / (up * p_raw + down * (1.0 - p_raw));
}

struct DiscretizationDiagnostics {
    Eigen::Matrix2d confusion = Eigen::Matrix2d::Zero(); // rows: predicted class, cols: true class
    std::array<double, 2> pi_train{};
    std::array<double, 2> pi_test_hat{};
    double raw_estimate = 0;
    bool clipped = false;
};

struct FixedPointDiagnostics {
    double objective = 0;        // |mean corrected - pi| at the estimate
    double coarse_estimate = 0;  // grid minimizer before refinement
    double coarse_objective = 0;
    std::size_t evaluations = 0; // objective evaluations spent
};

struct ShiftEstimate {
    ShiftMethod method = ShiftMethod::fixed_point;
    double train_prevalence = 0;
    std::map<std::string, double> prevalence;
    std::map<std::string, DiscretizationDiagnostics> discretization;
    std::map<std::string, FixedPointDiagnostics> fixed_point;

    double at(const std::string& c) const
    {
        const auto it = prevalence.find(c);
        if (it == prevalence.end()) throw ValidationError("unknown condition: " + c);
        return it->second;
    }
};

/// Solve M w = pi_test_hat and scale the positive-class component by the
/// training prevalence. Out-of-range answers are clipped to [0, 1] and flagged.
inline double discretization_solve(const Eigen::Matrix2d& confusion, const std::array<double, 2>& pi_train,
                                   const std::array<double, 2>& pi_test_hat, DiscretizationDiagnostics* diag = nullptr)
{
    const double det = confusion.determinant();
    if (!(std::abs(det) >= 1e-12))
        throw NumericalError("singular confusion matrix: classifier has no discriminative power at this threshold");
    const Eigen::Vector2d w = confusion.inverse() * Eigen::Vector2d(pi_test_hat[0], pi_test_hat[1]);
    const double raw = w(1) * pi_train[1];
    const double est = std::clamp(raw, 0.0, 1.0);
    if (diag) {
        diag->confusion = confusion;
        diag->pi_train = pi_train;
        diag->pi_test_hat = pi_test_hat;
        diag->raw_estimate = raw;
        diag->clipped = est != raw;
    }
    return est;
}

/// Discretization estimate for one test condition from thresholded predictions.
inline double discretization_estimate(std::span<const double> train_probs, std::span<const int> train_labels,
                                      std::span<const double> test_probs, double h, DiscretizationDiagnostics* diag = nullptr)
{
    detail::require(h > 0.0 && h < 1.0, "threshold must lie in (0, 1)");
    detail::require(train_probs.size() == train_labels.size() && !train_probs.empty(), "training predictions/labels mismatch");
    detail::require(!test_probs.empty(), "no test predictions for condition");
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    double pos = 0;
    for (std::size_t i = 0; i < train_probs.size(); ++i) {
        m(train_probs[i] > h ? 1 : 0, train_labels[i]) += 1.0;
        pos += train_labels[i];
    }
    const auto n_train = static_cast<double>(train_probs.size());
    m /= n_train;
    double test_pos = 0;
    for (double p : test_probs) test_pos += p > h ? 1.0 : 0.0;
    const double q = test_pos / static_cast<double>(test_probs.size());
    return discretization_solve(m, {1.0 - pos / n_train, pos / n_train}, {1.0 - q, q}, diag);
}

struct FixedPointSearch {
    double a = 0.001;
    double b = 0.999;
    std::size_t grid_size = 2000;
    bool refine = true; // one pass, 10x finer around the coarse minimizer
};

/// Fixed-point objective for one condition: |mean corrected probability - pi|.
///
/// Probabilities are clipped and converted to odds once; the corrected
/// probability under a putative prevalence pi is odds / (odds + kappa(pi)).
class FixedPointObjective {
  public:
    FixedPointObjective(std::span<const double> probs, double pi_train) : pi_train_(pi_train)
    {
        detail::require(pi_train > 0.0 && pi_train < 1.0, "training prevalence must lie in (0, 1)");
        detail::require(!probs.empty(), "no test predictions for condition");
        odds_.reserve(probs.size());
        for (double p : probs) {
            const double c = clip_probability(p);
            odds_.push_back(c / (1.0 - c));
        }
    }

    /// Mean corrected probability under prevalence pi.
    double mean_corrected(double pi) const
    {
        const double kappa = ((1.0 - pi) / (1.0 - pi_train_)) * (pi_train_ / pi);
        double s = 0.0;
        for (double o : odds_) s += o / (o + kappa);
        return s / static_cast<double>(odds_.size());
    }

    double signed_gap(double pi) const { return mean_corrected(pi) - pi; }
    double operator()(double pi) const { return std::abs(signed_gap(pi)); }

  private:
    std::vector<double> odds_;
    double pi_train_;
};

inline double fixed_point_objective(std::span<const double> probs, double pi_train, double pi)
{
    return FixedPointObjective(probs, pi_train)(pi);
}

inline double grid_point(const FixedPointSearch& s, std::size_t j)
{
    return s.a + (s.b - s.a) * static_cast<double>(j) / static_cast<double>(s.grid_size - 1);
}

/// Exact grid argmin of the fixed-point objective (lowest index on ties).
///
/// The mean corrected probability is nondecreasing in pi, so on any run of
/// grid points the signed gap is bracketed by its endpoint values. Runs
/// whose bracket cannot beat the incumbent are skipped. This visits a few
/// dozen grid points instead of all of them and returns the same index as a
/// full scan.
inline std::size_t fixed_point_grid_argmin(const FixedPointObjective& f, const FixedPointSearch& s, std::size_t* evaluations = nullptr)
{
    const std::size_t g = s.grid_size;
    std::vector<double> mean(g, std::numeric_limits<double>::quiet_NaN());
    std::size_t evals = 0;
    auto at = [&](std::size_t j) {
        if (std::isnan(mean[j])) {
            mean[j] = f.mean_corrected(grid_point(s, j));
            ++evals;
        }
        return mean[j];
    };
    std::size_t best = 0;
    double best_val = std::abs(at(0) - grid_point(s, 0));
    auto offer = [&](std::size_t j) {
        const double v = std::abs(at(j) - grid_point(s, j));
        if (v < best_val || (v == best_val && j < best)) {
            best_val = v;
            best = j;
        }
    };
    offer(g - 1);
    constexpr double slack = 1e-12;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, g - 1}};
    while (!stack.empty()) {
        const auto [lo, hi] = stack.back();
        stack.pop_back();
        if (hi - lo <= 1) continue;
        const double low_gap = at(lo) - grid_point(s, hi);
        const double high_gap = at(hi) - grid_point(s, lo);
        const double bound = (low_gap <= 0.0 && high_gap >= 0.0) ? 0.0 : std::min(std::abs(low_gap), std::abs(high_gap));
        if (bound > best_val + slack) continue;
        const std::size_t mid = lo + (hi - lo) / 2;
        offer(mid);
        stack.emplace_back(mid, hi);
        stack.emplace_back(lo, mid);
    }
    if (evaluations) *evaluations = evals;
    return best;
}

/// Fixed-point prevalence estimate for one condition's raw predictions.
inline double fixed_point_estimate(std::span<const double> test_probs, double pi_train, const FixedPointSearch& s = {},
                                   FixedPointDiagnostics* diag = nullptr)
{
    detail::require(s.a > 0.0 && s.b < 1.0 && s.a < s.b, "search range must satisfy 0 < a < b < 1");
    detail::require(s.grid_size >= 2, "grid_size must be at least 2");
    const FixedPointObjective f(test_probs, pi_train);
    std::size_t evals = 0;
    const std::size_t j = fixed_point_grid_argmin(f, s, &evals);
    const double coarse = grid_point(s, j);
    const double coarse_val = f(coarse);
    double est = coarse, est_val = coarse_val;
    if (s.refine) {
        const double step = (s.b - s.a) / static_cast<double>(s.grid_size - 1);
        for (int k = -10; k <= 10; ++k) {
            const double pi = coarse + step * k / 10.0;
            if (pi < s.a || pi > s.b || k == 0) continue;
            const double v = f(pi);
            ++evals;
            if (v < est_val) {
                est_val = v;
                est = pi;
            }
        }
    }
    if (!std::isfinite(est_val)) throw NumericalError("fixed-point objective is not finite");
    if (diag) *diag = FixedPointDiagnostics{est_val, coarse, coarse_val, evals};
    return est;
}

namespace detail {

inline std::vector<std::vector<double>> split_by_condition(std::span<const double> values, const Dataset& data)
{
    std::vector<std::vector<double>> out(data.conditions().size());
    for (std::size_t i = 0; i < data.size(); ++i) out[data.condition_index()[i]].push_back(values[i]);
    return out;
}

} // namespace detail

inline ShiftEstimate estimate_prevalence_discretization(const ClassifierModel& model, const Dataset& train, const Dataset& test,
                                                        double h = 0.5)
{
    detail::require(train.labeled(), "discretization needs labeled training data");
    const auto train_probs = predict_proba(model, train);
    const auto test_probs = predict_proba(model, test);
    const auto by_cond = detail::split_by_condition(test_probs, test);
    ShiftEstimate out;
    out.method = ShiftMethod::discretization;
    out.train_prevalence = model.train_prevalence;
    for (std::size_t c = 0; c < by_cond.size(); ++c) {
        DiscretizationDiagnostics d;
        out.prevalence[test.conditions()[c]] = discretization_estimate(train_probs, train.labels(), by_cond[c], h, &d);
        out.discretization[test.conditions()[c]] = d;
    }
    return out;
}

inline ShiftEstimate estimate_prevalence_fixed_point(const ClassifierModel& model, const Dataset& test, const FixedPointSearch& s = {})
{
    const auto test_probs = predict_proba(model, test);
    const auto by_cond = detail::split_by_condition(test_probs, test);
    ShiftEstimate out;
    out.method = ShiftMethod::fixed_point;
    out.train_prevalence = model.train_prevalence;
    for (std::size_t c = 0; c < by_cond.size(); ++c) {
        FixedPointDiagnostics d;
        out.prevalence[test.conditions()[c]] = fixed_point_estimate(by_cond[c], model.train_prevalence, s, &d);
        out.fixed_point[test.conditions()[c]] = d;
    }
    return out;
}

/// Mean uncorrected prediction per condition (the biased baseline).
inline ShiftEstimate naive_prevalence(const ClassifierModel& model, const Dataset& test)
{
    const auto test_probs = predict_proba(model, test);
    const auto by_cond = detail::split_by_condition(test_probs, test);
    ShiftEstimate out;
    out.method = ShiftMethod::naive;
    out.train_prevalence = model.train_prevalence;
    for (std::size_t c = 0; c < by_cond.size(); ++c) {
        double s = 0;
        for (double p : by_cond[c]) s += p;
        out.prevalence[test.conditions()[c]] = s / static_cast<double>(by_cond[c].size());
    }
    return out;
}

/// Corrected probabilities for every record of `data` under `shift`.
/// Records whose condition has no estimate keep their raw probability.
inline std::vector<double> correct_for_dataset(std::span<const double> raw, const Dataset& data, const ShiftEstimate& shift)
{
    std::vector<double> out(raw.begin(), raw.end());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto it = shift.prevalence.find(data.conditions()[data.condition_index()[i]]);
        if (it == shift.prevalence.end()) continue;
        out[i] = correct_prediction(clip_probability(raw[i]), shift.train_prevalence, it->second);
    }
    return out;
}

} // namespace lshift
