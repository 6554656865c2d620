#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace lshift {

struct NelderMeadOptions {
    double initial_step = 1.0;
    double f_tol = 1e-12;   // relative spread of simplex values
    double x_tol = 1e-8;    // simplex diameter
    std::size_t max_evals = 6000;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    std::vector<double> trace; // best value after each iteration, nonincreasing
};

/// Derivative-free minimization on a box. Trial points are projected onto
/// [lower, upper]; the best vertex never gets worse, so `trace` is monotone.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                    const std::vector<double>& lower, const std::vector<double>& upper,
                                    const NelderMeadOptions& opt = {})
{
    const std::size_t n = x0.size();
    auto project = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    };
    NelderMeadResult out;
    auto eval = [&](const std::vector<double>& x) {
        ++out.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    project(x0);
    std::vector<std::vector<double>> simplex{x0};
    for (std::size_t i = 0; i < n; ++i) {
        auto v = x0;
        v[i] += opt.initial_step;
        if (v[i] > upper[i]) v[i] = x0[i] - opt.initial_step;
        project(v);
        simplex.push_back(std::move(v));
    }
    std::vector<double> fv(simplex.size());
    for (std::size_t i = 0; i < simplex.size(); ++i) fv[i] = eval(simplex[i]);
    std::vector<std::size_t> order(simplex.size());

    while (out.evaluations < opt.max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
        out.trace.push_back(fv[best]);
        double diameter = 0;
        for (std::size_t i = 0; i < simplex.size(); ++i)
            for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(simplex[i][j] - simplex[best][j]));
        if (std::abs(fv[worst] - fv[best]) <= opt.f_tol * (1.0 + std::abs(fv[best])) && diameter <= opt.x_tol) {
            out.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i : order)
            if (i != worst)
                for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
        auto along = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
            project(p);
            return p;
        };
        auto reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < fv[best]) {
            auto expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                fv[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            simplex[worst] = std::move(reflected);
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        auto contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = std::move(contracted);
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
            project(simplex[i]);
            fv[i] = eval(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    out.x = simplex[best];
    out.value = fv[best];
    return out;
}

} // namespace lshift
