// lshift: prevalence and class-mean intervals for classifier output under label shift.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "report.hpp"

#ifndef LSHIFT_VERSION
#define LSHIFT_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace lshift;
using report::ordered_json;

namespace {

struct Options {
    std::string config;
    int threads = 1;
    std::uint64_t seed = 1;
    std::string out;

    std::string train, test;
    std::string label_col = "y";
    std::string test_label_col = "y_true";

    int knots = 10;
    int degree = 3;
    int penalty_order = 2;
    std::string knot_rule = "quantile";
    double lambda = -1; // negative: choose from the grid

    std::size_t B = 200;
    double level = 0.95;
    std::string interval = "pivotal";
    std::string classifier_mode = "posterior_sample";
    std::string shift_method;
    std::string shift_mode = "label_shift";
    double threshold = 0.5;
    bool stratify_training = false;
    bool stratify_test = false;
    bool full_replicates = false;
    std::size_t first_replicate = 0;
    std::size_t calibration_replicates = 0;
    bool shared_re = false;

    std::string method = "lmm";

    std::string scenario = "s1";
    bool skew = false;
    bool label_dependent_re = false;
    std::size_t m = 1000, n = 3000, groups = 15;
    std::string out_dir = ".";
    bool force = false;

    std::string methods = "prevalence,lmm,mixture";
    std::size_t R = 200;
    std::string out_csv;

    int bins = 10;
    std::string predictions;
};

BasisSpec basis(const Options& o)
{
    BasisSpec b;
    b.interior_knots = o.knots;
    b.degree = o.degree;
    b.penalty_order = o.penalty_order;
    b.knot_rule = o.knot_rule == "uniform" ? KnotRule::uniform : KnotRule::quantile;
    return b;
}

LambdaRule lambda_rule(const Options& o)
{
    if (o.lambda >= 0) return FixedLambda{o.lambda};
    return LambdaGrid{};
}

ShiftMethod shift_method_from_string(const std::string& s)
{
    if (s == "fixed_point") return ShiftMethod::fixed_point;
    if (s == "discretization") return ShiftMethod::discretization;
    if (s == "naive") return ShiftMethod::naive;
    throw ValidationError("unknown shift method: " + s);
}

BootstrapConfig bootstrap_config(const Options& o)
{
    BootstrapConfig c;
    c.B = o.B;
    c.level = o.level;
    c.interval_kind = interval_kind_from_string(o.interval);
    c.classifier_mode = o.classifier_mode == "refit" ? ClassifierMode::refit : ClassifierMode::posterior_sample;
    c.seed = o.seed;
    c.shift_method = shift_method_from_string(o.shift_method.empty() ? "fixed_point" : o.shift_method);
    c.shift_mode = o.shift_mode == "none" ? ShiftMode::none : ShiftMode::label_shift;
    c.threshold = o.threshold;
    c.threads = o.threads;
    c.first_replicate = o.first_replicate;
    c.calibration_replicates = o.calibration_replicates;
    c.stratify_training = o.stratify_training;
    c.stratify_test = o.stratify_test;
    c.mixture.shared_random_effect = o.shared_re;
    return c;
}

ScenarioSpec scenario_spec(const Options& o)
{
    ScenarioSpec s;
    s.scenario = scenario_from_string(o.scenario);
    s.normal = !o.skew;
    s.label_dependent_re = o.label_dependent_re;
    s.m = o.m;
    s.n = o.n;
    s.n_groups = o.groups;
    s.seed = o.seed;
    return s;
}

Dataset load_train(const Options& o)
{
    detail::require(!o.train.empty(), "--train is required");
    Schema s;
    s.y = o.label_col;
    return load_dataset(o.train, s, Role::training);
}

Dataset load_test(const Options& o, bool labeled = false)
{
    detail::require(!o.test.empty(), "--test is required");
    Schema s;
    s.y = labeled ? o.test_label_col : std::string();
    return load_dataset(o.test, s, Role::test);
}

void check_dims(const Dataset& train, const Dataset& test)
{
    detail::require(train.dim() == test.dim(), "missing feature columns: training has " + std::to_string(train.dim()) +
                                                   " features, test has " + std::to_string(test.dim()));
}

ordered_json envelope(const std::string& command, const Options& o, const ordered_json& config)
{
    ordered_json j;
    j["command"] = command;
    j["version"] = LSHIFT_VERSION;
    j["started"] = report::utc_timestamp();
    ordered_json cfg = config;
    cfg["seed"] = o.seed;
    cfg["threads"] = o.threads;
    if (!o.train.empty()) cfg["train"] = o.train;
    if (!o.test.empty()) cfg["test"] = o.test;
    cfg["basis"] = report::to_json(basis(o));
    cfg["lambda"] = o.lambda >= 0 ? ordered_json(o.lambda) : ordered_json("grid");
    j["config"] = cfg;
    return j;
}

void emit(const ordered_json& j, const std::string& path)
{
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    detail::require(out.good(), "cannot write " + path);
    out << j.dump(2) << '\n';
}

std::string write_or_refuse(const fs::path& path, const std::string& content, bool force)
{
    if (fs::exists(path) && !force) throw ValidationError("refusing to overwrite " + path.string() + " (use --force)");
    std::ofstream out(path, std::ios::binary);
    detail::require(out.good(), "cannot write " + path.string());
    out << content;
    return path.string();
}

int cmd_simulate(const Options& o)
{
    const auto spec = scenario_spec(o);
    const auto data = generate_scenario(spec);
    fs::create_directories(o.out_dir);
    std::ostringstream train, test;
    write_dataset_csv(train, data.train);
    write_dataset_csv(test, data.test, "y_true");
    ordered_json truth{{"scenario", report::to_json(spec)}, {"truth", report::to_json(data.truth)}, {"version", LSHIFT_VERSION}};
    // check every target first so a refusal leaves nothing half-written
    const fs::path dir(o.out_dir);
    for (const char* name : {"train.csv", "test.csv", "truth.json"})
        if (fs::exists(dir / name) && !o.force) throw ValidationError("refusing to overwrite " + (dir / name).string() + " (use --force)");
    write_or_refuse(dir / "train.csv", train.str(), true);
    write_or_refuse(dir / "test.csv", test.str(), true);
    write_or_refuse(dir / "truth.json", truth.dump(2) + "\n", true);
    std::cerr << "wrote " << (dir / "train.csv").string() << ", " << (dir / "test.csv").string() << ", " << (dir / "truth.json").string()
              << '\n';
    return 0;
}

int cmd_fit_classifier(const Options& o)
{
    report::Stopwatch sw;
    const auto train = load_train(o);
    sw.lap("load");
    const auto model = fit_classifier(train, basis(o), lambda_rule(o));
    sw.lap("fit");
    auto j = envelope("fit-classifier", o, {});
    const auto train_probs = predict_proba(model, train);
    j["classifier"] = {{"lambda", model.lambda},
                       {"coefficients", std::vector<double>(model.beta_hat.data(), model.beta_hat.data() + model.beta_hat.size())},
                       {"iterations", model.iterations},
                       {"deviance_trace", model.deviance_trace},
                       {"train_prevalence", model.train_prevalence}};
    j["training_calibration"] = report::to_json(calibration_table(train_probs, train.labels(), o.bins));
    if (!o.test.empty()) {
        const auto test = load_test(o);
        check_dims(train, test);
        const auto probs = predict_proba(model, test);
        const auto shift = estimate_prevalence_fixed_point(model, test);
        const auto corrected = correct_for_dataset(probs, test, shift);
        j["shift"] = report::to_json(shift);
        if (!o.predictions.empty()) {
            std::ofstream out(o.predictions);
            detail::require(out.good(), "cannot write " + o.predictions);
            out << "row,c,k,raw,corrected\n";
            char buf[128];
            for (std::size_t i = 0; i < test.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g", probs[i], corrected[i]);
                out << i << ',' << test.conditions()[test.condition_index()[i]] << ',' << test.groups()[test.group_index()[i]] << ','
                    << buf << '\n';
            }
        }
        sw.lap("predict");
    }
    j["timings"] = sw.json();
    emit(j, o.out);
    return 0;
}

int cmd_prevalence_ci(const Options& o)
{
    report::Stopwatch sw;
    const auto train = load_train(o);
    const auto test = load_test(o);
    check_dims(train, test);
    sw.lap("load");
    const auto model = fit_classifier(train, basis(o), lambda_rule(o));
    sw.lap("classifier");
    const auto base = bootstrap_config(o);
    std::vector<ShiftMethod> methods;
    if (base.shift_mode == ShiftMode::none) methods = {ShiftMethod::naive};
    else if (o.shift_method.empty() || o.shift_method == "both") methods = {ShiftMethod::fixed_point, ShiftMethod::discretization};
    else methods = {shift_method_from_string(o.shift_method)};

    auto j = envelope("prevalence-ci", o, {{"bootstrap", report::to_json(base)}});
    j["classifier"] = {{"lambda", model.lambda}, {"train_prevalence", model.train_prevalence}};
    j["naive"] = report::to_json(naive_prevalence(model, test));
    ordered_json runs = ordered_json::array();
    for (auto m : methods) {
        BootstrapConfig cfg = base;
        cfg.shift_method = m;
        const auto run = bootstrap_prevalence_ci(train, test, model, cfg);
        ordered_json r = report::to_json(run, o.full_replicates);
        r["shift_method"] = to_string(m);
        runs.push_back(r);
        for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
        sw.lap(std::string("bootstrap_") + to_string(m));
    }
    j["runs"] = runs;
    j["timings"] = sw.json();
    emit(j, o.out);
    return 0;
}

int cmd_mean_ci(const Options& o)
{
    report::Stopwatch sw;
    const auto train = load_train(o);
    const auto test = load_test(o);
    check_dims(train, test);
    detail::require(test.all_x(), "test data needs x for every record");
    sw.lap("load");
    const auto model = fit_classifier(train, basis(o), lambda_rule(o));
    sw.lap("classifier");
    const auto cfg = bootstrap_config(o);

    const auto raw = predict_proba(model, test);
    ShiftEstimate shift;
    if (cfg.shift_mode == ShiftMode::none || cfg.shift_method == ShiftMethod::naive) shift = naive_prevalence(model, test);
    else if (cfg.shift_method == ShiftMethod::discretization) shift = estimate_prevalence_discretization(model, train, test, cfg.threshold);
    else shift = estimate_prevalence_fixed_point(model, test, cfg.search);
    const auto corrected = cfg.shift_mode == ShiftMode::none ? raw : correct_for_dataset(raw, test, shift);
    sw.lap("shift");

    auto j = envelope("mean-ci", o, {{"method", o.method}, {"bootstrap", report::to_json(cfg)}});
    j["classifier"] = {{"lambda", model.lambda}, {"train_prevalence", model.train_prevalence}};
    j["shift"] = report::to_json(shift);

    // simple class-mean estimates for comparison
    ordered_json means = ordered_json::array();
    for (std::size_t c = 0; c < test.conditions().size(); ++c) {
        std::vector<double> x, pr, pc;
        for (std::size_t i = 0; i < test.size(); ++i)
            if (test.condition_index()[i] == c) {
                x.push_back(test.x()[i]);
                pr.push_back(raw[i]);
                pc.push_back(corrected[i]);
            }
        auto guarded = [](auto&& f) -> ordered_json {
            try {
                return f();
            } catch (const ValidationError&) {
                return nullptr;
            }
        };
        means.push_back({{"condition", test.conditions()[c]},
                         {"weighted_raw", guarded([&] { return weighted_class_mean(x, pr); })},
                         {"weighted_corrected", guarded([&] { return weighted_class_mean(x, pc); })},
                         {"threshold_raw", guarded([&] { return threshold_class_mean(x, pr); })},
                         {"threshold_corrected", guarded([&] { return threshold_class_mean(x, pc); })}});
    }
    j["class_means"] = means;

    BootstrapRun run;
    if (o.method == "lmm") run = bootstrap_mean_ci_lmm(train, test, model, cfg, {false, false});
    else if (o.method == "lmm-labeldep") run = bootstrap_mean_ci_lmm(train, test, model, cfg, {true, false});
    else if (o.method == "lmm-labeldep-calibrated") run = bootstrap_mean_ci_lmm(train, test, model, cfg, {true, true});
    else if (o.method == "mixture") run = bootstrap_mean_ci_mixture(train, test, model, cfg);
    else throw ValidationError("unknown method: " + o.method);
    sw.lap("bootstrap");
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
    j["bootstrap"] = report::to_json(run, o.full_replicates);
    j["timings"] = sw.json();
    emit(j, o.out);
    return 0;
}

std::vector<StudyMethod> parse_methods(const std::string& list)
{
    std::vector<StudyMethod> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(study_method_from_string(item));
    detail::require(!out.empty(), "no methods given");
    return out;
}

int cmd_coverage_study(const Options& o)
{
    report::Stopwatch sw;
    const auto spec = scenario_spec(o);
    auto cfg = bootstrap_config(o);
    const auto methods = parse_methods(o.methods);
    const auto rep = coverage_study(spec, methods, o.R, cfg, basis(o), lambda_rule(o));
    sw.lap("study");
    std::ostringstream csv;
    write_coverage_csv(csv, rep);
    if (!o.out_csv.empty()) {
        std::ofstream out(o.out_csv, std::ios::binary);
        detail::require(out.good(), "cannot write " + o.out_csv);
        out << csv.str();
    } else if (o.out.empty()) {
        std::cout << csv.str();
    }
    if (!o.out.empty()) {
        auto j = envelope("coverage-study", o, {{"scenario", report::to_json(spec)}, {"bootstrap", report::to_json(cfg)}, {"methods", o.methods}});
        j["report"] = report::to_json(rep);
        j["timings"] = sw.json();
        emit(j, o.out);
    }
    for (const auto& e : rep.errors) std::cerr << "failed: " << e << '\n';
    return 0;
}

int cmd_calibrate_report(const Options& o)
{
    report::Stopwatch sw;
    const auto train = load_train(o);
    const auto test = load_test(o, true);
    check_dims(train, test);
    detail::require(test.labeled(), "calibration report needs test labels in column '" + o.test_label_col + "'");
    sw.lap("load");
    auto j = envelope("calibrate-report", o, {{"bins", o.bins}, {"test_label_col", o.test_label_col}});

    // validation: every fifth training group held out, classifier refit on the rest
    if (train.groups().size() >= 2) {
        std::set<std::string> held;
        for (std::size_t g = 0; g < train.groups().size(); ++g)
            if (g % 5 == 4 || (train.groups().size() < 5 && g + 1 == train.groups().size())) held.insert(train.groups()[g]);
        const auto [fit_part, valid] = split_by_group(train, held);
        try {
            const auto vmodel = fit_classifier(fit_part, basis(o), lambda_rule(o));
            const auto bins = calibration_table(predict_proba(vmodel, valid), valid.labels(), o.bins);
            j["validation"] = {{"records", valid.size()}, {"raw", report::to_json(bins)}, {"raw_max_gap", max_calibration_gap(bins)}};
        } catch (const ValidationError& e) {
            j["validation"] = {{"error", e.what()}};
        }
        sw.lap("validation");
    }

    const auto model = fit_classifier(train, basis(o), lambda_rule(o));
    const auto raw = predict_proba(model, test);
    const auto shift = estimate_prevalence_fixed_point(model, test);
    const auto corrected = correct_for_dataset(raw, test, shift);
    const auto raw_bins = calibration_table(raw, test.labels(), o.bins);
    const auto cor_bins = calibration_table(corrected, test.labels(), o.bins);
    j["shift"] = report::to_json(shift);
    j["test"] = {{"records", test.size()},
                 {"raw", report::to_json(raw_bins)},
                 {"corrected", report::to_json(cor_bins)},
                 {"raw_max_gap", max_calibration_gap(raw_bins)},
                 {"corrected_max_gap", max_calibration_gap(cor_bins)}};
    sw.lap("test");
    j["timings"] = sw.json();
    emit(j, o.out);
    return 0;
}

/// Turn a flat JSON object into long flags placed ahead of the user's own.
std::vector<std::string> config_args(const std::string& path)
{
    std::ifstream in(path);
    detail::require(in.good(), "cannot open config file: " + path);
    nlohmann::json cfg;
    try {
        in >> cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid config file " + path + ": " + e.what());
    }
    detail::require(cfg.is_object(), "config file must hold a JSON object");
    std::vector<std::string> args;
    for (const auto& [key, value] : cfg.items()) {
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
        } else if (value.is_string()) {
            args.push_back(flag);
            args.push_back(value.get<std::string>());
        } else if (value.is_number()) {
            args.push_back(flag);
            args.push_back(value.dump());
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
            args.push_back(flag);
            args.push_back(joined);
        } else {
            throw ValidationError("config key '" + key + "' must be a scalar or a list");
        }
    }
    return args;
}

} // namespace

int main(int argc, char** argv)
{
    Options o;
    CLI::App app{"Prevalence and class-mean intervals for classifier output under label shift", "lshift"};
    app.set_version_flag("--version", std::string(LSHIFT_VERSION));
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto common = [&](CLI::App* s) {
        s->add_option("--config", o.config, "JSON file of defaults (keys are long flag names)");
        s->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        s->add_option("--seed", o.seed, "random seed");
        s->add_option("--out", o.out, "output JSON path (default stdout)");
    };
    auto data = [&](CLI::App* s) {
        s->add_option("--train", o.train, "training CSV (labeled)");
        s->add_option("--test", o.test, "test CSV");
        s->add_option("--label-col", o.label_col, "training label column");
    };
    auto classifier = [&](CLI::App* s) {
        s->add_option("--knots", o.knots, "interior knots per feature")->check(CLI::NonNegativeNumber);
        s->add_option("--degree", o.degree, "spline degree")->check(CLI::Range(1, 5));
        s->add_option("--penalty-order", o.penalty_order, "derivative order of the penalty")->check(CLI::Range(1, 3));
        s->add_option("--knot-rule", o.knot_rule, "knot placement")->check(CLI::IsMember({"quantile", "uniform"}));
        s->add_option("--lambda", o.lambda, "fixed smoothing parameter (default: choose from a grid)");
    };
    auto bootstrap = [&](CLI::App* s) {
        s->add_option("--B", o.B, "bootstrap replicates")->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
        s->add_option("--level", o.level, "confidence level")->check(CLI::Bound(1e-9, 1 - 1e-9));
        s->add_option("--interval", o.interval, "interval kind")->check(CLI::IsMember({"percentile", "pivotal", "normal_z"}));
        s->add_option("--classifier-mode", o.classifier_mode, "how replicates redraw the classifier")
            ->check(CLI::IsMember({"posterior_sample", "refit"}));
        s->add_option("--shift-mode", o.shift_mode, "label_shift or none")->check(CLI::IsMember({"label_shift", "none"}));
        s->add_option("--threshold", o.threshold, "threshold of the discretization estimator")->check(CLI::Bound(0.0, 1.0));
        s->add_flag("--stratify-training", o.stratify_training, "resample training rows within groups");
        s->add_flag("--stratify-test", o.stratify_test, "resample test rows within groups");
        s->add_flag("--full-replicates", o.full_replicates, "include every replicate value in the report");
        s->add_option("--first-replicate", o.first_replicate, "index of the first replicate");
        s->add_option("--calibration-replicates", o.calibration_replicates, "first-pass size of the variance calibration (0: B)");
    };
    auto scenario = [&](CLI::App* s) {
        s->add_option("--scenario", o.scenario, "s1, s2 or s3")->check(CLI::IsMember({"s1", "s2", "s3"}));
        s->add_flag("--skew", o.skew, "skew-normal class distributions");
        s->add_flag("--label-dependent-re", o.label_dependent_re, "separate random effects per class");
        s->add_option("--m", o.m, "training size")->check(CLI::PositiveNumber);
        s->add_option("--n", o.n, "test size")->check(CLI::PositiveNumber);
        s->add_option("--groups", o.groups, "test groups")->check(CLI::PositiveNumber);
    };

    auto* sim = app.add_subcommand("simulate", "write a simulated training/test pair");
    common(sim);
    scenario(sim);
    sim->add_option("--out-dir", o.out_dir, "directory for train.csv, test.csv and truth.json");
    sim->add_flag("--force", o.force, "overwrite existing files");

    auto* fit = app.add_subcommand("fit-classifier", "fit the spline classifier and report it");
    common(fit);
    data(fit);
    classifier(fit);
    fit->add_option("--bins", o.bins, "calibration bins")->check(CLI::PositiveNumber);
    fit->add_option("--predictions", o.predictions, "CSV of raw and corrected test predictions");

    auto* prev = app.add_subcommand("prevalence-ci", "bootstrap intervals for prevalence per condition");
    common(prev);
    data(prev);
    classifier(prev);
    bootstrap(prev);
    prev->add_option("--shift-method", o.shift_method, "fixed_point, discretization or both")
        ->check(CLI::IsMember({"fixed_point", "discretization", "both"}));

    auto* mean = app.add_subcommand("mean-ci", "bootstrap intervals for the positive-class mean of x");
    common(mean);
    data(mean);
    classifier(mean);
    bootstrap(mean);
    mean->add_option("--shift-method", o.shift_method, "fixed_point or discretization")
        ->check(CLI::IsMember({"fixed_point", "discretization"}));
    mean->add_option("--method", o.method, "estimator")->check(CLI::IsMember({"lmm", "lmm-labeldep", "lmm-labeldep-calibrated", "mixture"}));
    mean->add_flag("--shared-re", o.shared_re, "mixture: one random intercept per group for both classes");

    auto* cov = app.add_subcommand("coverage-study", "coverage of the interval procedures on simulated pairs");
    common(cov);
    scenario(cov);
    classifier(cov);
    bootstrap(cov);
    cov->add_option("--shift-method", o.shift_method, "fixed_point or discretization")
        ->check(CLI::IsMember({"fixed_point", "discretization"}));
    cov->add_option("--methods", o.methods, "comma-separated: prevalence, lmm, lmm-labeldep, lmm-labeldep-calibrated, mixture");
    cov->add_option("--R", o.R, "simulated pairs")->check(CLI::PositiveNumber);
    cov->add_option("--out-csv", o.out_csv, "CSV table path (default stdout when --out is not given)");

    auto* cal = app.add_subcommand("calibrate-report", "binned calibration of raw and corrected predictions");
    common(cal);
    data(cal);
    classifier(cal);
    cal->add_option("--test-label-col", o.test_label_col, "test label column");
    cal->add_option("--bins", o.bins, "calibration bins")->check(CLI::PositiveNumber);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        // defaults from --config go right after the subcommand name, so explicit flags win
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
            if (path.empty()) continue;
            const auto extra = config_args(path);
            std::size_t at = 0;
            while (at < args.size() && !app.get_subcommand_no_throw(args[at])) ++at;
            if (at == args.size()) throw ValidationError("--config needs a subcommand");
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(at) + 1, extra.begin(), extra.end());
            break;
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(o);
        if (fit->parsed()) return cmd_fit_classifier(o);
        if (prev->parsed()) return cmd_prevalence_ci(o);
        if (mean->parsed()) return cmd_mean_ci(o);
        if (cov->parsed()) return cmd_coverage_study(o);
        if (cal->parsed()) return cmd_calibrate_report(o);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
