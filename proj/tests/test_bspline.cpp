#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "lshift/bspline.hpp"

using namespace lshift;

TEST_CASE("type-7 quantiles", "[bspline]")
{
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(quantile_sorted(v, 0.025) == Catch::Approx(3.475).epsilon(1e-14));
    CHECK(quantile_sorted(v, 0.975) == Catch::Approx(97.525).epsilon(1e-14));
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 100.0);
}

TEST_CASE("B-spline basis is a partition of unity", "[bspline]")
{
    const BSplineBasis b({0.0, 0.3, 0.5, 1.2, 2.0}, 3);
    REQUIRE(b.size() == 7);
    std::vector<double> out(b.size());
    for (double x = -0.5; x <= 2.5; x += 0.01) {
        b.evaluate(x, out);
        double s = 0;
        for (double v : out) {
            CHECK(v >= -1e-15);
            s += v;
        }
        CHECK(s == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("B-spline derivatives match finite differences", "[bspline]")
{
    const BSplineBasis b({0.0, 0.25, 0.6, 1.0}, 3);
    std::vector<double> lo(b.size()), hi(b.size()), d(b.size());
    const double h = 1e-6;
    for (double x : {0.1, 0.4, 0.8}) {
        b.evaluate(x - h, lo);
        b.evaluate(x + h, hi);
        b.evaluate(x, d, 1);
        for (std::size_t i = 0; i < b.size(); ++i) CHECK(d[i] == Catch::Approx((hi[i] - lo[i]) / (2 * h)).margin(1e-6));
    }
}

TEST_CASE("second-derivative penalty vanishes on linear functions", "[bspline]")
{
    const BSplineBasis b({0.0, 0.2, 0.45, 0.7, 1.0}, 3);
    const Eigen::MatrixXd s = b.penalty(2);
    // Greville abscissae give the coefficients that reproduce f(x) = x.
    Eigen::VectorXd linear(static_cast<Eigen::Index>(b.size()));
    std::vector<double> knots{0, 0, 0, 0, 0.2, 0.45, 0.7, 1, 1, 1, 1};
    for (std::size_t i = 0; i < b.size(); ++i) linear(static_cast<Eigen::Index>(i)) = (knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0;
    CHECK(linear.dot(s * linear) == Catch::Approx(0.0).margin(1e-12));
    CHECK(Eigen::VectorXd::Ones(s.rows()).dot(s * Eigen::VectorXd::Ones(s.rows())) == Catch::Approx(0.0).margin(1e-12));

    // f(x) = x^2 has integral of f''^2 over [0,1] equal to 4.
    Eigen::VectorXd quad(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double t1 = knots[i + 1], t2 = knots[i + 2], t3 = knots[i + 3];
        quad(static_cast<Eigen::Index>(i)) = (t1 * t2 + t1 * t3 + t2 * t3) / 3.0;
    }
    CHECK(quad.dot(s * quad) == Catch::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("knot placement rejects a constant feature", "[bspline]")
{
    CHECK_THROWS_AS(BSplineBasis::for_sample({1.0, 1.0, 1.0}, 4, 3, KnotRule::quantile), ValidationError);
    const auto b = BSplineBasis::for_sample({0, 0, 0, 0, 0, 1, 2, 3}, 10, 3, KnotRule::quantile);
    const auto& br = b.breakpoints();
    for (std::size_t i = 1; i < br.size(); ++i) CHECK(br[i] > br[i - 1]);
}
