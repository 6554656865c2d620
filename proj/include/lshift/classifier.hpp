#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lshift/bspline.hpp"
#include "lshift/data.hpp"
#include "lshift/error.hpp"
#include "lshift/random.hpp"

namespace lshift {

struct BasisSpec {
    int interior_knots = 10;
    int degree = 3;
    KnotRule knot_rule = KnotRule::quantile;
    int penalty_order = 2;
};

struct FixedLambda {
    double value = 1.0;
};

/// Pick lambda from `values` by held-out deviance on a group split of the
/// training data (every fifth group held out; every fifth row when there
/// are fewer than five groups).
struct LambdaGrid {
    std::vector<double> values{1.0, 10.0, 100.0, 1e3, 1e4};
};

using LambdaRule = std::variant<FixedLambda, LambdaGrid>;

/// Intercept plus one centered smooth per feature.
///
/// Each smooth is a clamped B-spline reparameterized onto the null space of
/// its training column sums, so every smooth sums to zero over the training
/// sample and the intercept is identifiable.
class AdditiveSplineDesign {
  public:
    struct Term {
        BSplineBasis basis;
        Eigen::VectorXd column_sums; // raw basis column sums on the training sample
        Eigen::MatrixXd null_space;  // K x (K-1), orthonormal columns orthogonal to column_sums
    };

    AdditiveSplineDesign() = default;

    static AdditiveSplineDesign build(const Eigen::MatrixXd& z, const BasisSpec& spec)
    {
        detail::require(spec.interior_knots >= 0, "knot count must be non-negative");
        AdditiveSplineDesign d;
        d.penalty_order_ = spec.penalty_order;
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            std::vector<double> col(z.col(j).data(), z.col(j).data() + z.rows());
            BSplineBasis basis = BSplineBasis::for_sample(col, spec.interior_knots, spec.degree, spec.knot_rule);
            const auto k = static_cast<Eigen::Index>(basis.size());
            Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
            Eigen::VectorXd row(k);
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                basis.evaluate(z(i, j), std::span<double>(row.data(), static_cast<std::size_t>(k)));
                sums += row;
            }
            d.terms_.push_back(make_term(std::move(basis), std::move(sums)));
        }
        d.penalty_ = d.compute_penalty();
        return d;
    }

    static Term make_term(BSplineBasis basis, Eigen::VectorXd column_sums)
    {
        const auto k = column_sums.size();
        const Eigen::MatrixXd sums_col = column_sums;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(sums_col);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
        return Term{std::move(basis), std::move(column_sums), q.rightCols(k - 1)};
    }

    static AdditiveSplineDesign from_terms(std::vector<Term> terms, int penalty_order)
    {
        AdditiveSplineDesign d;
        d.terms_ = std::move(terms);
        d.penalty_order_ = penalty_order;
        d.penalty_ = d.compute_penalty();
        return d;
    }

    std::size_t dim() const { return terms_.size(); }
    const std::vector<Term>& terms() const { return terms_; }
    int penalty_order() const { return penalty_order_; }

    Eigen::Index columns() const
    {
        Eigen::Index p = 1;
        for (const auto& t : terms_) p += t.null_space.cols();
        return p;
    }

    /// Design row for one input vector; inputs are clamped to the training range.
    Eigen::RowVectorXd row(std::span<const double> z) const
    {
        detail::require(z.size() == terms_.size(), "dimension mismatch: model expects " + std::to_string(terms_.size()) +
                                                       " features, got " + std::to_string(z.size()));
        Eigen::RowVectorXd out(columns());
        out(0) = 1.0;
        Eigen::Index at = 1;
        for (std::size_t j = 0; j < terms_.size(); ++j) {
            const auto& t = terms_[j];
            Eigen::VectorXd raw(t.basis.size());
            t.basis.evaluate(z[j], std::span<double>(raw.data(), t.basis.size()));
            const auto w = t.null_space.cols();
            out.segment(at, w) = raw.transpose() * t.null_space;
            at += w;
        }
        return out;
    }

    Eigen::MatrixXd matrix(const Eigen::MatrixXd& z) const
    {
        Eigen::MatrixXd out(z.rows(), columns());
        std::vector<double> buf(static_cast<std::size_t>(z.cols()));
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            for (Eigen::Index j = 0; j < z.cols(); ++j) buf[static_cast<std::size_t>(j)] = z(i, j);
            out.row(i) = row(buf);
        }
        return out;
    }

    /// Block-diagonal smoothing penalty in the constrained parameterization.
    const Eigen::MatrixXd& penalty() const { return penalty_; }

  private:
    Eigen::MatrixXd compute_penalty() const
    {
        const Eigen::Index p = columns();
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
        Eigen::Index at = 1;
        for (const auto& t : terms_) {
            const auto w = t.null_space.cols();
            s.block(at, at, w, w) = t.null_space.transpose() * t.basis.penalty(penalty_order_) * t.null_space;
            at += w;
        }
        return s;
    }

    std::vector<Term> terms_;
    int penalty_order_ = 2;
    Eigen::MatrixXd penalty_;
};

/// Penalized logistic additive spline classifier with its Gaussian
/// coefficient posterior N(beta_hat, (X'WX + lambda S)^-1).
struct ClassifierModel {
    BasisSpec spec;
    AdditiveSplineDesign design;
    Eigen::VectorXd beta_hat;
    double lambda = 0.0;
    Eigen::MatrixXd posterior_cov;
    double train_prevalence = 0.5;
    /// posterior_cov = factor * factor^T after clamping small eigenvalues.
    Eigen::MatrixXd posterior_factor;
    int iterations = 0;
    std::vector<double> deviance_trace;
};

namespace detail {

inline double sigmoid(double eta)
{
    // Clamping keeps predictions strictly inside (0, 1) in double precision.
    eta = std::clamp(eta, -35.0, 35.0);
    return 1.0 / (1.0 + std::exp(-eta));
}

inline double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

inline constexpr double kEigenClamp = 1e-10;

inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov)
{
    if (!cov.allFinite()) throw NumericalError("non-finite covariance");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    Eigen::VectorXd ev = eig.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = ev(i) < kEigenClamp ? 0.0 : std::sqrt(ev(i));
    return eig.eigenvectors() * ev.asDiagonal();
}

struct PirlsResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;
    int iterations = 0;
    std::vector<double> trace; // penalized deviance after each accepted step
};

inline double penalized_deviance(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& s, double lambda,
                                 const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd eta = x * beta;
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) dev += 2.0 * (softplus(eta(i)) - y[static_cast<std::size_t>(i)] * eta(i));
    return dev + lambda * beta.dot(s * beta);
}

/// Penalized iteratively reweighted least squares with step halving.
inline PirlsResult pirls(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& s, double lambda,
                         Eigen::VectorXd beta, int max_iter = 50, double tol = 1e-8)
{
    const Eigen::Index n = x.rows();
    PirlsResult out;
    double dev = penalized_deviance(x, y, s, lambda, beta);
    out.trace.push_back(dev);
    bool converged = false;
    Eigen::VectorXd w(n), work(n);
    auto information = [&](const Eigen::VectorXd& b, bool with_work) {
        const Eigen::VectorXd eta = x * b;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu = sigmoid(eta(i));
            w(i) = std::max(mu * (1.0 - mu), 1e-10);
            if (with_work) work(i) = eta(i) + (y[static_cast<std::size_t>(i)] - mu) / w(i);
        }
        Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x + lambda * s;
        return h;
    };
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::MatrixXd h = information(beta, true);
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() != Eigen::Success) throw NumericalError("singular penalized information matrix");
        Eigen::VectorXd next = llt.solve(x.transpose() * (w.asDiagonal() * work));
        double next_dev = penalized_deviance(x, y, s, lambda, next);
        for (int halve = 0; halve < 30 && !(next_dev <= dev); ++halve) {
            next = 0.5 * (beta + next);
            next_dev = penalized_deviance(x, y, s, lambda, next);
        }
        if (!std::isfinite(next_dev)) throw NumericalError("PIRLS produced a non-finite deviance");
        if (next_dev > dev) {
            // No descent direction left at machine precision.
            converged = true;
            out.iterations = it;
            break;
        }
        const double change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
        beta = std::move(next);
        dev = next_dev;
        out.trace.push_back(dev);
        out.iterations = it;
        if (change < tol) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericalError("PIRLS did not converge in " + std::to_string(max_iter) + " iterations");
    const Eigen::MatrixXd h = information(beta, false);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalError("singular penalized information matrix");
    out.cov = llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.beta = std::move(beta);
    return out;
}

inline Eigen::VectorXd initial_coefficients(Eigen::Index p, double prevalence)
{
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    b(0) = std::log(prevalence / (1.0 - prevalence));
    return b;
}

inline double mean_label(std::span<const int> y)
{
    double s = 0;
    for (int v : y) s += v;
    return s / static_cast<double>(y.size());
}

inline double heldout_deviance(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd eta = x * beta;
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) dev += 2.0 * (softplus(eta(i)) - y[static_cast<std::size_t>(i)] * eta(i));
    return dev;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline double select_lambda(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const std::size_t> groups,
                            const Eigen::MatrixXd& s, const LambdaGrid& grid)
{
    detail::require(!grid.values.empty(), "empty lambda grid");
    std::size_t n_groups = 0;
    for (std::size_t g : groups) n_groups = std::max(n_groups, g + 1);
    std::vector<std::size_t> fit_rows, hold_rows;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool hold = n_groups >= 5 ? groups[i] % 5 == 4 : i % 5 == 4;
        (hold ? hold_rows : fit_rows).push_back(i);
    }
    std::vector<int> y_fit, y_hold;
    for (std::size_t i : fit_rows) y_fit.push_back(y[i]);
    for (std::size_t i : hold_rows) y_hold.push_back(y[i]);
    const double prev = mean_label(y_fit);
    if (hold_rows.empty() || prev <= 0.0 || prev >= 1.0) return grid.values.front();
    const Eigen::MatrixXd x_fit = take_rows(x, fit_rows), x_hold = take_rows(x, hold_rows);
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = std::numeric_limits<double>::quiet_NaN();
    for (double lambda : grid.values) {
        detail::require(lambda >= 0.0, "lambda must be non-negative");
        try {
            const auto fit = pirls(x_fit, y_fit, s, lambda, initial_coefficients(x.cols(), prev));
            const double dev = heldout_deviance(x_hold, y_hold, fit.beta);
            if (dev < best) {
                best = dev;
                best_lambda = lambda;
            }
        } catch (const NumericalError&) {
            // this lambda is unusable on the split; the others may be fine
        }
    }
    if (std::isnan(best_lambda)) throw NumericalError("no lambda in the grid produced a usable fit");
    return best_lambda;
}

} // namespace detail

/// Fit on a raw feature matrix. `groups` (0-based ids) drive the held-out split of a lambda grid.
inline ClassifierModel fit_classifier(const Eigen::MatrixXd& z, std::span<const int> y, std::span<const std::size_t> groups,
                                      const BasisSpec& spec, const LambdaRule& rule)
{
    detail::require(static_cast<std::size_t>(z.rows()) == y.size(), "feature/label length mismatch");
    detail::require(!y.empty(), "empty training data");
    const double prevalence = detail::mean_label(y);
    if (prevalence <= 0.0 || prevalence >= 1.0) throw ValidationError("single-class data");
    ClassifierModel m;
    m.spec = spec;
    m.design = AdditiveSplineDesign::build(z, spec);
    const Eigen::MatrixXd x = m.design.matrix(z);
    const Eigen::MatrixXd s = m.design.penalty();
    if (const auto* fixed = std::get_if<FixedLambda>(&rule)) {
        detail::require(fixed->value >= 0.0, "lambda must be non-negative");
        m.lambda = fixed->value;
    } else {
        m.lambda = detail::select_lambda(x, y, groups, s, std::get<LambdaGrid>(rule));
    }
    auto fit = detail::pirls(x, y, s, m.lambda, detail::initial_coefficients(x.cols(), prevalence));
    m.beta_hat = std::move(fit.beta);
    m.posterior_cov = std::move(fit.cov);
    m.posterior_factor = detail::covariance_factor(m.posterior_cov);
    m.train_prevalence = prevalence;
    m.iterations = fit.iterations;
    m.deviance_trace = std::move(fit.trace);
    return m;
}

inline ClassifierModel fit_classifier(const Dataset& train, const BasisSpec& spec = {}, const LambdaRule& rule = LambdaGrid{})
{
    detail::require(train.labeled(), "classifier training data must be labeled");
    return fit_classifier(train.features(), train.labels(), train.group_index(), spec, rule);
}

/// Refit on new rows of an existing design with lambda and basis held fixed.
/// `x` holds design rows (see AdditiveSplineDesign::matrix).
inline ClassifierModel refit_classifier(const ClassifierModel& base, const Eigen::MatrixXd& x, std::span<const int> y)
{
    const double prevalence = detail::mean_label(y);
    if (prevalence <= 0.0 || prevalence >= 1.0) throw ValidationError("single-class data");
    ClassifierModel m = base;
    auto fit = detail::pirls(x, y, base.design.penalty(), base.lambda, base.beta_hat);
    m.beta_hat = std::move(fit.beta);
    m.posterior_cov = std::move(fit.cov);
    m.posterior_factor = detail::covariance_factor(m.posterior_cov);
    m.train_prevalence = prevalence;
    m.iterations = fit.iterations;
    m.deviance_trace = std::move(fit.trace);
    return m;
}

inline double predict_proba(const ClassifierModel& model, std::span<const double> z)
{
    for (double v : z) detail::require(std::isfinite(v), "non-finite classifier input");
    return detail::sigmoid(model.design.row(z).dot(model.beta_hat));
}

/// Probabilities for precomputed design rows and an arbitrary coefficient vector.
inline std::vector<double> predict_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd eta = x * beta;
    std::vector<double> p(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) p[static_cast<std::size_t>(i)] = detail::sigmoid(eta(i));
    return p;
}

inline std::vector<double> predict_proba(const ClassifierModel& model, const Dataset& data)
{
    detail::require(data.dim() == model.design.dim(), "dimension mismatch between model and dataset");
    return predict_rows(model.design.matrix(data.features()), model.beta_hat);
}

/// Coefficients drawn from N(beta_hat, posterior_cov).
inline Eigen::VectorXd sample_coefficients(const ClassifierModel& model, Engine& rng)
{
    Eigen::VectorXd u(model.posterior_factor.cols());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = standard_normal(rng);
    return model.beta_hat + model.posterior_factor * u;
}

inline ClassifierModel sample_classifier(const ClassifierModel& model, Engine& rng)
{
    ClassifierModel out = model;
    out.beta_hat = sample_coefficients(model, rng);
    return out;
}

struct CalibrationBin {
    double lower = 0;
    double upper = 0;
    double mean_predicted = 0;
    double observed_rate = 0;
    std::size_t count = 0;
    bool empty = true;
};

/// Equal-width bins on [0, 1]; a probability of exactly 1 lands in the last bin.
inline std::vector<CalibrationBin> calibration_table(std::span<const double> probs, std::span<const int> labels, int n_bins)
{
    detail::require(probs.size() == labels.size(), "length mismatch between probabilities and labels");
    detail::require(n_bins >= 1, "n_bins must be positive");
    std::vector<CalibrationBin> bins(static_cast<std::size_t>(n_bins));
    std::vector<double> psum(bins.size(), 0.0), ysum(bins.size(), 0.0);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].lower = static_cast<double>(b) / n_bins;
        bins[b].upper = static_cast<double>(b + 1) / n_bins;
    }
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        detail::require(p >= 0.0 && p <= 1.0, "probability outside [0, 1]");
        const auto b = std::min(static_cast<std::size_t>(p * n_bins), bins.size() - 1);
        psum[b] += p;
        ysum[b] += labels[i];
        ++bins[b].count;
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
        if (bins[b].count == 0) continue;
        bins[b].empty = false;
        bins[b].mean_predicted = psum[b] / static_cast<double>(bins[b].count);
        bins[b].observed_rate = ysum[b] / static_cast<double>(bins[b].count);
    }
    return bins;
}

/// Largest |mean predicted - observed| over populated bins.
inline double max_calibration_gap(const std::vector<CalibrationBin>& bins)
{
    double gap = 0.0;
    for (const auto& b : bins)
        if (!b.empty) gap = std::max(gap, std::abs(b.mean_predicted - b.observed_rate));
    return gap;
}

} // namespace lshift
