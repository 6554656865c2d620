// Acceptance run: one PASS/FAIL line per criterion.
// Usage: lshift_acceptance [criterion...]   (default: all of 1-8)

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lshift/lshift.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lshift;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects failed checks; the first few are echoed in the detail line.
class Checks {
  public:
    void expect(bool ok, const std::string& what)
    {
        ++total_;
        if (ok) return;
        ++failed_;
        if (failed_ <= 5) messages_.push_back(what);
    }
    Outcome outcome(const std::string& summary) const
    {
        Outcome o{failed_ == 0, summary + " (" + std::to_string(total_ - failed_) + "/" + std::to_string(total_) + " checks)"};
        for (const auto& m : messages_) o.detail += "; failed: " + m;
        return o;
    }

  private:
    std::size_t total_ = 0, failed_ = 0;
    std::vector<std::string> messages_;
};

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

constexpr std::size_t kR = 200;

ScenarioSpec study_spec(Scenario sc, bool normal = true, bool label_dependent = false)
{
    ScenarioSpec spec;
    spec.scenario = sc;
    spec.normal = normal;
    spec.label_dependent_re = label_dependent;
    spec.m = 1000;
    spec.n = 3000;
    spec.n_groups = 15;
    return spec;
}

BootstrapConfig study_config()
{
    BootstrapConfig cfg;
    cfg.B = 200;
    cfg.level = 0.95;
    cfg.interval_kind = IntervalKind::pivotal;
    cfg.threads = worker_count();
    return cfg;
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string describe(const CoverageCell& c)
{
    return fmt("%s mean %.4f (se %.4f) coverage %.3f (se %.3f) width %.4f R %zu failed %zu", to_string(c.method), c.mean, c.mean_se,
               c.coverage, c.coverage_se, c.mean_width, c.replicates, c.failed);
}

CoverageReport study(const ScenarioSpec& spec, std::vector<StudyMethod> methods)
{
    const auto rep = coverage_study(spec, methods, kR, study_config());
    for (const auto& e : rep.errors) std::fprintf(stderr, "  pair error: %s\n", e.c_str());
    return rep;
}

Outcome criterion1()
{
    const auto c = study(study_spec(Scenario::s1), {StudyMethod::prevalence}).cells.at(0);
    return {std::abs(c.mean - 0.40) <= 0.01 && c.coverage >= 0.87 && c.coverage <= 0.99, "S1 normal " + describe(c)};
}

Outcome criterion2()
{
    const auto c = study(study_spec(Scenario::s2), {StudyMethod::prevalence}).cells.at(0);
    return {c.coverage < 0.30, "S2 normal " + describe(c)};
}

Outcome criterion3()
{
    const auto c = study(study_spec(Scenario::s1), {StudyMethod::lmm}).cells.at(0);
    return {std::abs(c.mean - 3.00) <= 0.06 && c.coverage >= 0.87, "S1 normal " + describe(c)};
}

Outcome criterion4()
{
    const auto rep = study(study_spec(Scenario::s3), {StudyMethod::lmm, StudyMethod::mixture});
    const auto& lmm = rep.cells.at(0);
    const auto& mix = rep.cells.at(1);
    const bool ok = lmm.mean <= 3.95 && lmm.coverage < mix.coverage && std::abs(mix.mean - 4.00) <= 0.06 && mix.coverage >= 0.87;
    return {ok, "S3 normal " + describe(lmm) + " | " + describe(mix)};
}

Outcome criterion5()
{
    const auto c = study(study_spec(Scenario::s1, false), {StudyMethod::mixture}).cells.at(0);
    return {c.coverage < 0.6, "S1 skew " + describe(c)};
}

Outcome criterion6()
{
    const auto rep = study(study_spec(Scenario::s1, true, true), {StudyMethod::lmm_labeldep, StudyMethod::lmm_labeldep_calibrated});
    const auto& raw = rep.cells.at(0);
    const auto& cal = rep.cells.at(1);
    return {cal.coverage >= raw.coverage - 0.02 && cal.coverage >= 0.88, "S1 label-dependent " + describe(raw) + " | " + describe(cal)};
}

void prior_correction_checks(Checks& ck)
{
    ck.expect(std::abs(correct_prediction(0.5, 0.2, 0.4) - 8.0 / 11.0) <= 1e-12, "0.5 at 0.2 -> 0.4 is 8/11");
    auto rng = make_stream(7, {1});
    for (int trial = 0; trial < 200; ++trial) {
        const double a = 0.01 + 0.98 * uniform01(rng), b = 0.01 + 0.98 * uniform01(rng);
        double last = -1;
        bool identity = true, monotone = true, inverse = true;
        for (int i = 1; i < 1000; ++i) {
            const double p = i / 1000.0;
            const double q = correct_prediction(p, a, b);
            identity = identity && std::abs(correct_prediction(p, a, a) - p) <= 1e-12;
            monotone = monotone && q > last;
            inverse = inverse && std::abs(correct_prediction(q, b, a) - p) <= 1e-12;
            last = q;
        }
        ck.expect(identity, "equal priors leave predictions unchanged");
        ck.expect(monotone, "correction is increasing");
        ck.expect(inverse, "swapping priors inverts the correction");
    }
}

void discretization_checks(Checks& ck)
{
    Eigen::Matrix2d m;
    m << 0.7, 0.05, 0.1, 0.15;
    ck.expect(std::abs(discretization_solve(m, {0.8, 0.2}, {0.6, 0.4}) - 0.44) <= 1e-13, "2x2 hand example gives 0.44");
}

void grid_refinement_checks(Checks& ck)
{
    auto rng = make_stream(8, {2});
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = testing::calibrated_probs(1000, 0.1 + 0.8 * uniform01(rng), 2.0, 300 + trial);
        const double pi_train = 0.1 + 0.8 * uniform01(rng);
        FixedPointSearch coarse;
        coarse.refine = false;
        FixedPointSearch fine = coarse;
        fine.grid_size = coarse.grid_size * 10;
        const double step = (coarse.b - coarse.a) / static_cast<double>(coarse.grid_size - 1);
        const double f = fixed_point_estimate(p, pi_train, fine);
        ck.expect(std::abs(fixed_point_estimate(p, pi_train, coarse) - f) <= step, "coarse grid within one step of fine grid");
        ck.expect(std::abs(fixed_point_estimate(p, pi_train) - f) <= step, "refined search within one step of fine grid");
    }
}

void em_checks(Checks& ck)
{
    int fitted = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto rng = make_stream(seed, {3});
        const double gap = 0.5 + 3 * uniform01(rng);
        const double pi = 0.2 + 0.6 * uniform01(rng);
        const auto s = testing::simulate(15 + seed % 20, 2 + seed % 4, {{0.0, gap}, {0.3, gap + 0.4}}, pi, 0.5 + uniform01(rng), 0.4, seed);
        try {
            const auto fit = fit_hier_gmm(s.data, s.mixing);
            ++fitted;
            bool up = fit.monotone;
            for (std::size_t t = 1; t < fit.trace.size(); ++t) up = up && fit.trace[t] >= fit.trace[t - 1] - 1e-9 * (1 + std::abs(fit.trace[t - 1]));
            ck.expect(up, "EM trace non-decreasing on instance " + std::to_string(seed));
        } catch (const NumericalError&) {
        }
    }
    ck.expect(fitted >= 90, "at least 90 of 100 EM instances fit");
}

void lmm_oracle_checks(Checks& ck)
{
    auto rng = make_stream(52, {2});
    for (int trial = 0; trial < 12; ++trial) {
        const auto g = testing::random_instance(rng, 2 + trial % 2, 6 + trial % 7, 1);
        const auto fit = fit_weighted_lmm(g, std::vector<double>(g.size(), 1.0));
        const auto oracle = testing::lmm_grid_oracle(g);
        ck.expect(fit.loglik >= oracle.loglik - 1e-7, "LMM loglik reaches the grid optimum");
        ck.expect(std::abs(fit.beta[0][1] - oracle.beta) <= 1e-4, "LMM fixed effect matches the grid oracle");
    }
}

void posterior_checks(Checks& ck)
{
    const auto train = testing::gaussian_pair(500, 0.3, 2.0, 16);
    const auto model = fit_classifier(train, BasisSpec{4, 3, KnotRule::quantile, 2}, FixedLambda{1.0});
    const int draws = 10000;
    const auto p = model.beta_hat.size();
    auto rng = make_stream(9, {9});
    Eigen::MatrixXd s(draws, p);
    for (int i = 0; i < draws; ++i) s.row(i) = sample_coefficients(model, rng).transpose();
    const Eigen::VectorXd mean = s.colwise().mean();
    const Eigen::MatrixXd centered = s.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / (draws - 1.0);
    const auto& v = model.posterior_cov;
    for (Eigen::Index j = 0; j < p; ++j) {
        ck.expect(std::abs(mean(j) - model.beta_hat(j)) < 4 * std::sqrt(v(j, j) / draws) + 1e-12, "posterior draw mean");
        for (Eigen::Index k = 0; k < p; ++k) {
            const double sd = std::sqrt((v(j, j) * v(k, k) + v(j, k) * v(j, k)) / draws);
            ck.expect(std::abs(cov(j, k) - v(j, k)) < 5 * sd + 1e-12, "posterior draw covariance");
        }
    }
}

void skew_normal_checks(Checks& ck)
{
    auto rng = make_stream(11, {4});
    const std::size_t n = 1000000;
    double sum = 0, sumsq = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = sample_skew_normal(0.0, 2.0, 3.0, rng);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n, var = sumsq / n - mean * mean;
    const double closed = 2 * (3 / std::sqrt(10.0)) * std::sqrt(2 / std::numbers::pi);
    ck.expect(std::abs(mean - closed) < 4 * std::sqrt(var / n), "SN(0,2,3) mean within 4 s.e. of closed form");
}

void determinism_checks(Checks& ck)
{
    ScenarioSpec spec;
    spec.m = 300;
    spec.n = 600;
    spec.seed = 3;
    const auto d = generate_scenario(spec);
    const auto model = fit_classifier(d.train);
    for (auto mode : {ClassifierMode::posterior_sample, ClassifierMode::refit})
        for (auto method : {StudyMethod::prevalence, StudyMethod::lmm, StudyMethod::lmm_labeldep, StudyMethod::lmm_labeldep_calibrated,
                            StudyMethod::mixture}) {
            BootstrapConfig cfg;
            cfg.B = 8;
            cfg.seed = 17;
            cfg.classifier_mode = mode;
            cfg.threads = 1;
            const auto one = detail::run_study_method(method, d, model, cfg, false);
            cfg.threads = 8;
            const auto eight = detail::run_study_method(method, d, model, cfg, false);
            const std::string name = std::string(to_string(method)) + "/" + to_string(mode);
            ck.expect(one.results.at(0).replicates == eight.results.at(0).replicates, name + " replicates match across workers");
            ck.expect(one.results[0].interval.lower == eight.results[0].interval.lower &&
                          one.results[0].interval.upper == eight.results[0].interval.upper,
                      name + " interval matches across workers");
        }
    BootstrapConfig cfg;
    cfg.B = 10;
    cfg.threads = 1;
    const auto a = coverage_study(spec, {StudyMethod::prevalence, StudyMethod::lmm}, 4, cfg);
    cfg.threads = 8;
    const auto b = coverage_study(spec, {StudyMethod::prevalence, StudyMethod::lmm}, 4, cfg);
    std::ostringstream sa, sb;
    write_coverage_csv(sa, a);
    write_coverage_csv(sb, b);
    ck.expect(sa.str() == sb.str(), "coverage table identical across workers");
}

Outcome criterion7()
{
    Checks ck;
    prior_correction_checks(ck);
    discretization_checks(ck);
    grid_refinement_checks(ck);
    em_checks(ck);
    lmm_oracle_checks(ck);
    posterior_checks(ck);
    skew_normal_checks(ck);
    determinism_checks(ck);
    return ck.outcome("property suite");
}

/// Largest bin gap over bins holding at least `min_count` records.
double bin_gap(std::span<const double> probs, std::span<const int> labels, std::size_t min_count)
{
    double gap = 0;
    for (const auto& b : calibration_table(probs, labels, 10))
        if (b.count >= min_count) gap = std::max(gap, std::abs(b.mean_predicted - b.observed_rate));
    return gap;
}

Outcome criterion8()
{
    // Labeled training runs, shifted unlabeled test runs; labels of the test
    // set are used only to score the estimates.
    const std::size_t datasets = 20;
    std::size_t gap_wins = 0;
    double err_weighted = 0, err_thresh_raw = 0, err_thresh_cor = 0, err_weighted_raw = 0, raw_gap = 0, cor_gap = 0;
    ScenarioSpec spec = study_spec(Scenario::s1);
    spec.seed = 8;
    for (std::size_t r = 0; r < datasets; ++r) {
        const auto d = generate_scenario(spec, r);
        const auto model = fit_classifier(d.train);
        const auto raw = predict_proba(model, d.test);
        const auto corrected = correct_for_dataset(raw, d.test, estimate_prevalence_fixed_point(model, d.test));
        const double g_raw = bin_gap(raw, d.test.labels(), 50), g_cor = bin_gap(corrected, d.test.labels(), 50);
        raw_gap += g_raw / datasets;
        cor_gap += g_cor / datasets;
        if (g_cor < g_raw) ++gap_wins;

        const auto& x = d.test.x();
        for (int y : {0, 1}) {
            double truth = 0, count = 0;
            for (std::size_t i = 0; i < d.test.size(); ++i)
                if (d.test.labels()[i] == y) {
                    truth += x[i];
                    count += 1;
                }
            truth /= count;
            std::vector<double> pr(raw), pc(corrected);
            if (y == 0) {
                for (auto& p : pr) p = 1 - p;
                for (auto& p : pc) p = 1 - p;
            }
            err_weighted += std::abs(weighted_class_mean(x, pc) - truth);
            err_weighted_raw += std::abs(weighted_class_mean(x, pr) - truth);
            err_thresh_raw += std::abs(threshold_class_mean(x, pr) - truth);
            err_thresh_cor += std::abs(threshold_class_mean(x, pc) - truth);
        }
    }
    const bool ok = gap_wins == datasets && err_weighted < err_thresh_raw && err_weighted < err_thresh_cor;
    const double n = 2.0 * datasets;
    return {ok, fmt("calibration gap raw %.3f corrected %.3f (corrected smaller in %zu/%zu); class-mean abs error: weighted corrected "
                    "%.4f, weighted raw %.4f, threshold raw %.4f, threshold corrected %.4f",
                    raw_gap, cor_gap, gap_wins, datasets, err_weighted / n, err_weighted_raw / n, err_thresh_raw / n, err_thresh_cor / n)};
}

} // namespace

int main(int argc, char** argv)
{
    const std::map<int, std::function<Outcome()>> criteria{{1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
                                                           {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8}};
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (!criteria.count(n)) {
            std::fprintf(stderr, "unknown criterion: %s\n", argv[i]);
            return 2;
        }
        wanted.push_back(n);
    }
    if (wanted.empty())
        for (const auto& [n, f] : criteria) wanted.push_back(n);

    int failed = 0;
    for (int n : wanted) {
        Outcome o;
        try {
            o = criteria.at(n)();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
