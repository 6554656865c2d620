#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "lshift/mixed_effects.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lshift;
using namespace testing;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("sufficient-statistic likelihood equals the dense likelihood", "[mixed_effects]")
{
    auto rng = make_stream(51, {1});
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_instance(rng, 2 + trial % 4, 8 + trial % 7, 1 + trial % 2);
        std::vector<double> w1(g.size());
        for (auto& w : w1) w = uniform01(rng);
        w1[0] = 0.0; // one record drops out of class 1
        const std::array<double, 2> sigma2{0.3 + uniform01(rng), 0.3 + uniform01(rng)};
        const double omega2 = trial % 5 == 0 ? 0.0 : 2.0 * uniform01(rng);
        for (std::array<bool, 2> mask : {std::array<bool, 2>{true, true}, {false, true}, {true, false}}) {
            const std::vector<double> w0 = [&] {
                std::vector<double> v(w1.size());
                for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 - w1[i];
                return v;
            }();
            const auto stats = detail::ri_stats(g.x, g.group, g.group_condition, g.conditions(),
                                                {std::span<const double>(w0), std::span<const double>(w1)}, 1e-8);
            const auto fast = detail::ri_solve(stats, sigma2, omega2, mask);
            const auto dense = dense_loglik(g, w1, sigma2, omega2, mask);
            CHECK(fast.loglik == Catch::Approx(dense.loglik).epsilon(1e-10));
            for (std::size_t c = 0; c < g.conditions(); ++c)
                for (std::size_t y = 0; y < 2; ++y)
                    if (mask[y]) CHECK(fast.beta[c][y] == Catch::Approx(dense.beta[c][y]).margin(1e-9));
        }
    }
}

TEST_CASE("fit matches a direct-likelihood grid oracle on tiny instances", "[mixed_effects]")
{
    auto rng = make_stream(52, {2});
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t groups = 2 + trial % 2;
        const auto g = random_instance(rng, groups, 6 + trial % 7, 1);
        const std::vector<double> ones(g.size(), 1.0);
        const auto fit = fit_weighted_lmm(g, ones);

        const auto oracle = lmm_grid_oracle(g);
        CHECK(fit.loglik >= oracle.loglik - 1e-7);
        CHECK(fit.beta[0][1] == Catch::Approx(oracle.beta).margin(1e-4));
    }
}

TEST_CASE("noiseless data is recovered exactly", "[mixed_effects]")
{
    std::vector<double> x;
    std::vector<std::size_t> grp;
    for (std::size_t k = 0; k < 4; ++k)
        for (int j = 0; j < 5; ++j) {
            x.push_back(k < 2 ? 2.5 : -1.0);
            grp.push_back(k);
        }
    const auto g = make_grouped(x, grp, {0, 0, 1, 1});
    const std::vector<double> ones(x.size(), 1.0);
    const auto fit = fit_weighted_lmm(g, ones);
    CHECK(fit.beta[0][1] == Catch::Approx(2.5).epsilon(1e-12));
    CHECK(fit.beta[1][1] == Catch::Approx(-1.0).epsilon(1e-12));
    CHECK(fit.omega2[1] == 0.0);
    CHECK(fit.sigma2[1] == 1e-10);
    CHECK_FALSE(fit.fitted[0]);
    for (const auto& b : fit.b_hat) CHECK(b[1] == 0.0);
}

TEST_CASE("zero-weight records are ignored", "[mixed_effects]")
{
    const auto g = make_grouped({1, 2, 3}, {0, 0, 0}, {0});
    const std::vector<double> w{1, 0, 1};
    const auto fit = fit_weighted_lmm(g, w);
    CHECK(fit.beta[0][1] == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(fit.omega2[1] == 0.0);
    bool warned = false;
    for (const auto& m : fit.warnings) warned = warned || m.find("single group") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("invalid weights", "[mixed_effects]")
{
    const auto g = make_grouped({1, 2, 3}, {0, 0, 1}, {0, 0});
    CHECK_THROWS_AS(fit_weighted_lmm(g, std::vector<double>{1, 2, 0}), ValidationError);
    CHECK_THROWS_AS(fit_weighted_lmm(g, std::vector<double>{1, 1}), ValidationError);
    // class 0 has all the weight here, class 1 none
    const auto fit = fit_weighted_lmm(g, std::vector<double>{0, 0, 0});
    CHECK(fit.fitted[0]);
    CHECK_FALSE(fit.fitted[1]);
    CHECK(std::isnan(fit.beta[0][1]));
}

TEST_CASE("equivariance and monotone optimizer trace", "[mixed_effects]")
{
    auto rng = make_stream(53, {3});
    const auto g = random_instance(rng, 9, 300, 3);
    std::vector<double> w1(g.size());
    for (auto& w : w1) w = uniform01(rng);
    const auto fit = fit_weighted_lmm(g, w1);
    REQUIRE(fit.fitted[0]);
    REQUIRE(fit.fitted[1]);
    CHECK(fit.omega2[1] > 0.0);
    for (const auto& t : fit.traces)
        for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] >= t[i - 1]);

    auto shifted = g;
    for (auto& v : shifted.x) v += 7.25;
    const auto fit2 = fit_weighted_lmm(shifted, w1);
    for (std::size_t c = 0; c < g.conditions(); ++c)
        for (std::size_t y = 0; y < 2; ++y) CHECK(fit2.beta[c][y] == Catch::Approx(fit.beta[c][y] + 7.25).margin(1e-5));
    CHECK(fit2.omega2[1] == Catch::Approx(fit.omega2[1]).epsilon(1e-4));
    CHECK(fit2.sigma2[0] == Catch::Approx(fit.sigma2[0]).epsilon(1e-4));
    CHECK(fit2.sigma2[1] == Catch::Approx(fit.sigma2[1]).epsilon(1e-4));

    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(fit.residuals[i][1] == g.x[i] - fit.b_hat[g.group[i]][1]);
        CHECK(fit.b_hat[g.group[i]][0] == fit.b_hat[g.group[i]][1]);
    }
}

TEST_CASE("label-dependent mode fits each class separately", "[mixed_effects]")
{
    auto rng = make_stream(54, {4});
    const std::size_t groups = 12;
    std::vector<std::size_t> gc(groups), grp;
    std::vector<double> b0(groups), b1(groups), x, w1;
    for (std::size_t k = 0; k < groups; ++k) {
        gc[k] = k % 2;
        b0[k] = 0.3 * standard_normal(rng);
        b1[k] = 1.5 * standard_normal(rng);
    }
    for (int i = 0; i < 1200; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) % groups;
        const int y = bernoulli(rng, 0.4);
        grp.push_back(k);
        x.push_back(y ? 3.0 + b1[k] + standard_normal(rng) : b0[k] + standard_normal(rng));
        w1.push_back(y ? 1.0 : 0.0);
    }
    const auto g = make_grouped(x, grp, gc);
    LmmOptions opt;
    opt.label_dependent = true;
    const auto fit = fit_weighted_lmm(g, w1, opt);
    CHECK(fit.omega2[1] > fit.omega2[0]);
    CHECK(fit.traces.size() == 2);

    // Each class equals a single-class fit on that class's records.
    std::vector<double> x1;
    std::vector<std::size_t> g1;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (w1[i] == 1.0) {
            x1.push_back(x[i]);
            g1.push_back(grp[i]);
        }
    const auto only1 = fit_weighted_lmm(make_grouped(x1, g1, gc), std::vector<double>(x1.size(), 1.0));
    CHECK(fit.beta[0][1] == Catch::Approx(only1.beta[0][1]).epsilon(1e-10));
    CHECK(fit.omega2[1] == Catch::Approx(only1.omega2[1]).epsilon(1e-10));
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(fit.residuals[i][0] == x[i] - fit.b_hat[grp[i]][0]);
        CHECK(fit.residuals[i][1] == x[i] - fit.b_hat[grp[i]][1]);
    }
}

TEST_CASE("weighted and threshold class means", "[mixed_effects]")
{
    CHECK(weighted_class_mean(std::vector<double>{1, 2, 3}, std::vector<double>{1, 0, 1}) == 2.0);
    CHECK(weighted_class_mean(std::vector<double>{1, 2, 6}, std::vector<double>{0.3, 0.3, 0.3}) == Catch::Approx(3.0));
    CHECK_THROWS_AS(weighted_class_mean(std::vector<double>{1}, std::vector<double>{0}), ValidationError);

    CHECK(threshold_class_mean(std::vector<double>{1, 5, 3}, std::vector<double>{0.9, 0.1, 0.8}, 0.5) == 2.0);
    CHECK(threshold_class_mean(std::vector<double>{1, 5, 3}, std::vector<double>{0.9, 0.6, 0.8}, 0.5) == 3.0);
    CHECK_THROWS_AS(threshold_class_mean(std::vector<double>{1}, std::vector<double>{0.2}, 0.5), ValidationError);
}

TEST_CASE("threshold mean is biased when probability and x are negatively related", "[mixed_effects]")
{
    // x depends on z alone, decreasing where the probability increases.
    auto rng = make_stream(55, {5});
    std::vector<double> x, p;
    double truth = 0;
    int n1 = 0;
    for (int i = 0; i < 20000; ++i) {
        const int y = bernoulli(rng, 0.3);
        const double z = standard_normal(rng) + 2.0 * y;
        const double prob = testing::gaussian_pair_posterior(z, 0.3, 2.0);
        const double xi = 5.0 - z + 0.3 * standard_normal(rng);
        x.push_back(xi);
        p.push_back(prob);
        if (y) {
            truth += xi;
            ++n1;
        }
    }
    truth /= n1;
    const double weighted = weighted_class_mean(x, p);
    const double thresholded = threshold_class_mean(x, p, 0.5);
    CHECK(thresholded < weighted);
    CHECK(std::abs(weighted - truth) < std::abs(thresholded - truth));
}
