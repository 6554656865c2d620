#pragma once

// JSON views of library results for the command-line tool.

#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lshift/lshift.hpp"

namespace lshift::report {

using nlohmann::ordered_json;

/// Named wall-clock stages of one command.
class Stopwatch {
  public:
    Stopwatch() : start_(clock::now()), last_(start_) {}

    void lap(const std::string& stage)
    {
        const auto now = clock::now();
        stages_.push_back({stage, std::chrono::duration<double>(now - last_).count()});
        last_ = now;
    }

    ordered_json json() const
    {
        ordered_json out = ordered_json::object();
        for (const auto& [name, s] : stages_) out[name] = s;
        out["total"] = std::chrono::duration<double>(clock::now() - start_).count();
        return out;
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_, last_;
    std::vector<std::pair<std::string, double>> stages_;
};

inline std::string utc_timestamp()
{
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// NaN and infinities become null.
inline ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

inline ordered_json to_json(const BasisSpec& b)
{
    return {{"interior_knots", b.interior_knots},
            {"degree", b.degree},
            {"knot_rule", b.knot_rule == KnotRule::quantile ? "quantile" : "uniform"},
            {"penalty_order", b.penalty_order}};
}

inline ordered_json to_json(const BootstrapConfig& c)
{
    return {{"B", c.B},
            {"level", c.level},
            {"interval", to_string(c.interval_kind)},
            {"classifier_mode", to_string(c.classifier_mode)},
            {"seed", c.seed},
            {"shift_method", to_string(c.shift_method)},
            {"shift_mode", to_string(c.shift_mode)},
            {"threshold", c.threshold},
            {"threads", c.threads},
            {"first_replicate", c.first_replicate},
            {"calibration_replicates", c.calibration_replicates},
            {"stratify_training", c.stratify_training},
            {"stratify_test", c.stratify_test},
            {"mixture_shared_random_effect", c.mixture.shared_random_effect}};
}

inline ordered_json to_json(const ScenarioSpec& s)
{
    return {{"scenario", to_string(s.scenario)},
            {"normal", s.normal},
            {"label_dependent_re", s.label_dependent_re},
            {"m", s.m},
            {"n", s.n},
            {"n_groups", s.n_groups},
            {"train_prevalence", s.train_prevalence},
            {"test_prevalence", s.test_prevalence},
            {"re_sd", s.re_sd},
            {"noise_sd", s.noise_sd},
            {"seed", s.seed}};
}

inline ordered_json to_json(const ScenarioTruth& t)
{
    return {{"prevalence", t.prevalence}, {"class_mean0", t.class_mean0}, {"class_mean1", t.class_mean1}};
}

inline ordered_json to_json(const ShiftEstimate& s)
{
    ordered_json out{{"method", to_string(s.method)}, {"train_prevalence", s.train_prevalence}};
    out["prevalence"] = ordered_json::object();
    for (const auto& [c, p] : s.prevalence) out["prevalence"][c] = p;
    for (const auto& [c, d] : s.discretization)
        out["diagnostics"][c] = {{"confusion", {{d.confusion(0, 0), d.confusion(0, 1)}, {d.confusion(1, 0), d.confusion(1, 1)}}},
                                 {"raw_estimate", d.raw_estimate},
                                 {"clipped", d.clipped}};
    for (const auto& [c, d] : s.fixed_point)
        out["diagnostics"][c] = {{"objective", d.objective},
                                 {"coarse_estimate", d.coarse_estimate},
                                 {"coarse_objective", d.coarse_objective},
                                 {"evaluations", d.evaluations}};
    return out;
}

inline ordered_json summary(const std::vector<double>& v)
{
    ordered_json out{{"count", v.size()}};
    if (v.empty()) return out;
    double mean = 0, lo = v.front(), hi = v.front();
    for (double x : v) {
        mean += x / static_cast<double>(v.size());
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out["mean"] = mean;
    out["sd"] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out["min"] = lo;
    out["max"] = hi;
    return out;
}

inline ordered_json to_json(const BootstrapRun& run, bool full_replicates)
{
    ordered_json out{{"procedure", run.procedure}, {"train_prevalence", run.train_prevalence}};
    out["point_prevalence"] = ordered_json::object();
    for (const auto& [c, p] : run.point_prevalence) out["point_prevalence"][c] = number(p);
    out["results"] = ordered_json::array();
    for (const auto& r : run.results) {
        ordered_json j{{"condition", r.condition},
                       {"point", r.point},
                       {"interval", {r.interval.lower, r.interval.upper}},
                       {"n_failed", r.n_failed},
                       {"replicates", summary(r.replicates)}};
        if (full_replicates) j["replicate_values"] = r.replicates;
        out["results"].push_back(j);
    }
    out["n_failed"] = run.n_failed;
    if (!run.extras.empty()) {
        out["estimates"] = ordered_json::object();
        for (const auto& [k, v] : run.extras) out["estimates"][k] = number(v);
    }
    out["warnings"] = run.warnings;
    ordered_json diags = ordered_json::array();
    for (const auto& d : run.diagnostics) {
        ordered_json j{{"index", d.index}, {"failed", d.failed}};
        if (d.failed) j["error"] = d.error;
        j["train_prevalence"] = number(d.train_prevalence);
        ordered_json prev = ordered_json::array();
        for (double p : d.prevalence) prev.push_back(number(p));
        j["prevalence"] = prev;
        diags.push_back(j);
    }
    out["replicate_diagnostics"] = diags;
    out["seconds"] = run.seconds;
    return out;
}

inline ordered_json to_json(const CoverageReport& rep)
{
    ordered_json cells = ordered_json::array();
    for (const auto& c : rep.cells)
        cells.push_back({{"scenario", to_string(c.scenario)},
                         {"normal", c.normal},
                         {"label_dependent_re", c.label_dependent_re},
                         {"method", to_string(c.method)},
                         {"truth", c.truth},
                         {"R", c.replicates},
                         {"failed", c.failed},
                         {"mean", c.mean},
                         {"mean_se", c.mean_se},
                         {"coverage", c.coverage},
                         {"coverage_se", c.coverage_se},
                         {"mean_width", c.mean_width}});
    return {{"R", rep.R}, {"B", rep.cfg.B}, {"cells", cells}, {"errors", rep.errors}, {"seconds", rep.seconds}};
}

inline ordered_json to_json(const std::vector<CalibrationBin>& bins)
{
    ordered_json out = ordered_json::array();
    for (const auto& b : bins)
        out.push_back({{"lower", b.lower},
                       {"upper", b.upper},
                       {"count", b.count},
                       {"mean_predicted", b.empty ? ordered_json(nullptr) : ordered_json(b.mean_predicted)},
                       {"observed_rate", b.empty ? ordered_json(nullptr) : ordered_json(b.observed_rate)}});
    return out;
}

} // namespace lshift::report
