#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "lshift/bootstrap.hpp"
#include "lshift/classifier.hpp"
#include "lshift/data.hpp"
#include "lshift/error.hpp"
#include "lshift/parallel.hpp"
#include "lshift/random.hpp"
#include "lshift/shift.hpp"

namespace lshift {

enum class Scenario { s1, s2, s3 };

inline const char* to_string(Scenario s)
{
    switch (s) {
    case Scenario::s1: return "s1";
    case Scenario::s2: return "s2";
    case Scenario::s3: return "s3";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string& s)
{
    if (s == "s1" || s == "S1" || s == "1") return Scenario::s1;
    if (s == "s2" || s == "S2" || s == "2") return Scenario::s2;
    if (s == "s3" || s == "S3" || s == "3") return Scenario::s3;
    throw ValidationError("unknown scenario: " + s);
}

/// S1: label shift holds and x depends on y only through z.
/// S2: training z | y=0 is shifted, so label shift fails.
/// S3: x gains +1 for the positive class, so x carries information beyond z.
struct ScenarioSpec {
    Scenario scenario = Scenario::s1;
    bool normal = true; // false: skew-normal class distributions
    bool label_dependent_re = false;
    std::size_t m = 1000; // training size
    std::size_t n = 3000; // test size
    std::size_t n_groups = 15;
    double train_prevalence = 0.2;
    double test_prevalence = 0.4;
    double re_sd = std::sqrt(0.5);
    double noise_sd = std::sqrt(0.2);
    std::uint64_t seed = 1;

    void validate() const
    {
        detail::require(m > 0 && n > 0, "sizes must be positive");
        detail::require(n_groups > 0, "need at least one group");
        detail::require(train_prevalence > 0 && train_prevalence < 1, "training prevalence must lie in (0, 1)");
        detail::require(test_prevalence > 0 && test_prevalence < 1, "test prevalence must lie in (0, 1)");
        detail::require(re_sd >= 0 && noise_sd >= 0, "standard deviations must be non-negative");
    }
};

struct ScenarioTruth {
    double prevalence = 0;
    double class_mean0 = 0; // E[X | Y=0]
    double class_mean1 = 0; // E[X | Y=1]
};

struct ScenarioData {
    Dataset train;
    Dataset test; // labeled, so diagnostics can use the truth; estimators never read test labels
    ScenarioTruth truth;
};

inline constexpr char kTestCondition[] = "c1";

/// One SN(xi, omega, alpha) draw from the two-normal representation.
inline double sample_skew_normal(double xi, double omega, double alpha, Engine& rng)
{
    detail::require(omega > 0, "skew-normal scale must be positive");
    const double delta = alpha / std::sqrt(1 + alpha * alpha);
    const double u0 = standard_normal(rng);
    const double u1 = standard_normal(rng);
    return xi + omega * (delta * std::abs(u0) + std::sqrt(1 - delta * delta) * u1);
}

inline double skew_normal_mean(double xi, double omega, double alpha)
{
    return xi + omega * alpha / std::sqrt(1 + alpha * alpha) * std::sqrt(2 / std::numbers::pi);
}

namespace detail {

inline constexpr double kSkewScale = 2.0;
inline constexpr double kSkewShape = 3.0;

inline double draw_z(const ScenarioSpec& spec, int y, bool training, Engine& rng)
{
    const double shift0 = training && spec.scenario == Scenario::s2 ? -0.5 : 0.0;
    if (spec.normal) return y ? 3.0 + standard_normal(rng) : shift0 + standard_normal(rng);
    return y ? 8.0 - sample_skew_normal(3.0, kSkewScale, kSkewShape, rng) : sample_skew_normal(shift0, kSkewScale, kSkewShape, rng);
}

inline std::vector<Record> draw_records(const ScenarioSpec& spec, std::size_t count, double prevalence, bool training,
                                        const std::string& condition, const std::string& group_prefix, Engine& rng)
{
    std::vector<std::array<double, 2>> b(spec.n_groups);
    for (auto& bk : b) {
        bk[0] = spec.re_sd * standard_normal(rng);
        bk[1] = spec.label_dependent_re ? spec.re_sd * standard_normal(rng) : bk[0];
    }
    std::vector<Record> out(count);
    for (auto& r : out) {
        const int y = bernoulli(rng, prevalence) ? 1 : 0;
        const std::size_t k = uniform_index(rng, spec.n_groups);
        const double z = draw_z(spec, y, training, rng);
        double x = z + b[k][static_cast<std::size_t>(y)] + spec.noise_sd * standard_normal(rng);
        if (spec.scenario == Scenario::s3 && y == 1) x += 1.0;
        r.z = {z};
        r.x = x;
        r.y = y;
        r.c = condition;
        r.k = group_prefix + std::to_string(k + 1);
    }
    return out;
}

} // namespace detail

/// Population values the test-data estimators target.
inline ScenarioTruth scenario_truth(const ScenarioSpec& spec)
{
    ScenarioTruth t;
    t.prevalence = spec.test_prevalence;
    if (spec.normal) {
        t.class_mean0 = 0.0;
        t.class_mean1 = 3.0;
    } else {
        t.class_mean0 = skew_normal_mean(0.0, detail::kSkewScale, detail::kSkewShape);
        t.class_mean1 = 8.0 - skew_normal_mean(3.0, detail::kSkewScale, detail::kSkewShape);
    }
    if (spec.scenario == Scenario::s3) t.class_mean1 += 1.0;
    return t;
}

/// Draw one (training, test) pair. Replicate r of a study uses its own
/// training and test streams, so pairs do not depend on each other.
inline ScenarioData generate_scenario(const ScenarioSpec& spec, std::uint64_t replicate = 0)
{
    spec.validate();
    auto train_rng = make_stream(spec.seed, {stream_tag::train_data, replicate});
    auto test_rng = make_stream(spec.seed, {stream_tag::test_data, replicate});
    auto train = detail::draw_records(spec, spec.m, spec.train_prevalence, true, "train", "t", train_rng);
    auto test = detail::draw_records(spec, spec.n, spec.test_prevalence, false, kTestCondition, "k", test_rng);
    return {Dataset::from_records(train, Role::training), Dataset::from_records(test, Role::test), scenario_truth(spec)};
}

enum class StudyMethod { prevalence, lmm, lmm_labeldep, lmm_labeldep_calibrated, mixture };

inline const char* to_string(StudyMethod m)
{
    switch (m) {
    case StudyMethod::prevalence: return "prevalence";
    case StudyMethod::lmm: return "lmm";
    case StudyMethod::lmm_labeldep: return "lmm-labeldep";
    case StudyMethod::lmm_labeldep_calibrated: return "lmm-labeldep-calibrated";
    case StudyMethod::mixture: return "mixture";
    }
    return "?";
}

inline StudyMethod study_method_from_string(const std::string& s)
{
    for (auto m : {StudyMethod::prevalence, StudyMethod::lmm, StudyMethod::lmm_labeldep, StudyMethod::lmm_labeldep_calibrated,
                   StudyMethod::mixture})
        if (s == to_string(m)) return m;
    throw ValidationError("unknown method: " + s);
}

struct CoverageCell {
    StudyMethod method = StudyMethod::prevalence;
    Scenario scenario = Scenario::s1;
    bool normal = true;
    bool label_dependent_re = false;
    double truth = 0;
    std::size_t replicates = 0; // pairs with an interval
    std::size_t failed = 0;
    double mean = 0;
    double mean_se = 0;
    double coverage = 0;
    double coverage_se = 0;
    double mean_width = 0;
};

struct CoverageReport {
    ScenarioSpec spec;
    BootstrapConfig cfg;
    std::size_t R = 0;
    std::vector<CoverageCell> cells;
    std::vector<std::string> errors; // first error per failing (pair, method)
    double seconds = 0;
};

namespace detail {

struct PairOutcome {
    bool ok = false;
    double point = 0;
    double lower = 0;
    double upper = 0;
    std::string error;
};

inline BootstrapRun run_study_method(StudyMethod method, const ScenarioData& d, const ClassifierModel& model, const BootstrapConfig& cfg,
                                     bool label_dependent_re)
{
    switch (method) {
    case StudyMethod::prevalence: return bootstrap_prevalence_ci(d.train, d.test, model, cfg);
    case StudyMethod::lmm: return bootstrap_mean_ci_lmm(d.train, d.test, model, cfg, {false, false});
    case StudyMethod::lmm_labeldep: return bootstrap_mean_ci_lmm(d.train, d.test, model, cfg, {true, false});
    case StudyMethod::lmm_labeldep_calibrated: return bootstrap_mean_ci_lmm(d.train, d.test, model, cfg, {true, true});
    case StudyMethod::mixture: {
        BootstrapConfig c = cfg;
        c.mixture.shared_random_effect = !label_dependent_re;
        return bootstrap_mean_ci_mixture(d.train, d.test, model, c);
    }
    }
    throw ValidationError("unknown method");
}

} // namespace detail

/// Coverage of the requested interval procedures over R independent
/// (training, test) pairs. Pairs run in parallel with cfg.threads workers;
/// each pair's bootstrap is single-threaded and seeded from (cfg.seed, r).
inline CoverageReport coverage_study(const ScenarioSpec& spec, const std::vector<StudyMethod>& methods, std::size_t R,
                                     const BootstrapConfig& cfg, const BasisSpec& basis = {}, const LambdaRule& rule = LambdaGrid{})
{
    detail::require(R >= 1, "R must be at least 1");
    detail::require(!methods.empty(), "no methods requested");
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto truth = scenario_truth(spec);
    std::vector<std::vector<detail::PairOutcome>> outcome(R, std::vector<detail::PairOutcome>(methods.size()));

    parallel_for(R, cfg.threads, [&](std::size_t r) {
        const auto data = generate_scenario(spec, r);
        std::optional<ClassifierModel> model;
        std::string model_error;
        try {
            model = fit_classifier(data.train, basis, rule);
        } catch (const ValidationError& e) {
            model_error = e.what();
        } catch (const NumericalError& e) {
            model_error = e.what();
        }
        for (std::size_t j = 0; j < methods.size(); ++j) {
            auto& o = outcome[r][j];
            if (!model) {
                o.error = "classifier: " + model_error;
                continue;
            }
            BootstrapConfig c = cfg;
            c.threads = 1;
            c.first_replicate = 0;
            c.seed = derive_seed(cfg.seed, {stream_tag::study_bootstrap, r});
            try {
                const auto run = detail::run_study_method(methods[j], data, *model, c, spec.label_dependent_re);
                const auto& res = run.at(kTestCondition);
                o = {true, res.point, res.interval.lower, res.interval.upper, {}};
            } catch (const ValidationError& e) {
                o.error = e.what();
            } catch (const NumericalError& e) {
                o.error = e.what();
            }
        }
    });

    CoverageReport rep;
    rep.spec = spec;
    rep.cfg = cfg;
    rep.R = R;
    for (std::size_t j = 0; j < methods.size(); ++j) {
        CoverageCell cell;
        cell.method = methods[j];
        cell.scenario = spec.scenario;
        cell.normal = spec.normal;
        cell.label_dependent_re = spec.label_dependent_re;
        cell.truth = methods[j] == StudyMethod::prevalence ? truth.prevalence : truth.class_mean1;
        std::vector<double> points;
        double covered = 0, width = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const auto& o = outcome[r][j];
            if (!o.ok) {
                ++cell.failed;
                rep.errors.push_back("pair " + std::to_string(r) + ", " + to_string(methods[j]) + ": " + o.error);
                continue;
            }
            points.push_back(o.point);
            covered += (o.lower <= cell.truth && cell.truth <= o.upper) ? 1 : 0;
            width += o.upper - o.lower;
        }
        cell.replicates = points.size();
        if (!points.empty()) {
            const auto k = static_cast<double>(points.size());
            double s = 0;
            for (double v : points) s += v;
            cell.mean = s / k;
            double ss = 0;
            for (double v : points) ss += (v - cell.mean) * (v - cell.mean);
            cell.mean_se = points.size() > 1 ? std::sqrt(ss / (k - 1) / k) : 0.0;
            cell.coverage = covered / k;
            cell.coverage_se = std::sqrt(cell.coverage * (1 - cell.coverage) / k);
            cell.mean_width = width / k;
        }
        rep.cells.push_back(cell);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

/// One row per cell, in the layout of a coverage table.
inline void write_coverage_csv(std::ostream& out, const CoverageReport& rep)
{
    out << "scenario,normal,label_dependent_re,method,truth,R,failed,mean,mean_se,coverage,coverage_se,mean_width\n";
    char buf[512];
    for (const auto& c : rep.cells) {
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%.10g,%zu,%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", to_string(c.scenario),
                      c.normal ? "yes" : "no", c.label_dependent_re ? "yes" : "no", to_string(c.method), c.truth, c.replicates, c.failed,
                      c.mean, c.mean_se, c.coverage, c.coverage_se, c.mean_width);
        out << buf;
    }
}

struct SufficiencyCheck {
    std::vector<double> corrected; // A_L(Z, C) per record
    std::vector<double> regression; // P(Y=1 | X, Z) from a spline fit with x appended
    double correlation = 0;
    double mean_abs_gap = 0;
};

/// Compares corrected classifier probabilities with a direct regression of
/// the labels on (Z, X). Large gaps mean X carries label information that
/// Z does not.
inline SufficiencyCheck sufficiency_check(const Dataset& labeled, const ClassifierModel& model, const ShiftEstimate& shift,
                                          const BasisSpec& basis = {}, const LambdaRule& rule = LambdaGrid{})
{
    detail::require(labeled.labeled(), "sufficiency check needs labels");
    detail::require(labeled.all_x(), "sufficiency check needs x for every record");
    std::vector<Record> aug;
    aug.reserve(labeled.size());
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        Record r = labeled.record(i);
        r.z.push_back(*r.x);
        aug.push_back(std::move(r));
    }
    const auto augmented = Dataset::from_records(aug, Role::validation);
    const auto direct = fit_classifier(augmented, basis, rule);

    SufficiencyCheck out;
    out.regression = predict_proba(direct, augmented);
    out.corrected = correct_for_dataset(predict_proba(model, labeled), labeled, shift);
    const auto n = static_cast<double>(labeled.size());
    double ma = 0, mb = 0, gap = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        ma += out.corrected[i] / n;
        mb += out.regression[i] / n;
        gap += std::abs(out.corrected[i] - out.regression[i]) / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const double a = out.corrected[i] - ma, b = out.regression[i] - mb;
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    out.correlation = saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
    out.mean_abs_gap = gap;
    return out;
}

} // namespace lshift
