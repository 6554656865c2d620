#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "lshift/data.hpp"
#include "lshift/random.hpp"

namespace testing {

inline std::filesystem::path temp_path(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "lshift_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline std::string write_file(const std::string& name, const std::string& content)
{
    const auto path = temp_path(name);
    std::ofstream(path) << content;
    return path.string();
}

inline double normal_pdf(double x, double mu, double sd)
{
    const double u = (x - mu) / sd;
    return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

/// Labeled 1-D sample with Z|Y=0 ~ N(0,1), Z|Y=1 ~ N(shift,1).
inline lshift::Dataset gaussian_pair(std::size_t n, double prevalence, double shift, std::uint64_t seed,
                                     lshift::Role role = lshift::Role::training, std::size_t groups = 10)
{
    auto rng = lshift::make_stream(seed, {99});
    std::vector<lshift::Record> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = lshift::bernoulli(rng, prevalence) ? 1 : 0;
        recs[i].y = y;
        recs[i].z = {lshift::standard_normal(rng) + (y ? shift : 0.0)};
        recs[i].c = "train";
        recs[i].k = "g" + std::to_string(i % groups);
    }
    return lshift::Dataset::from_records(recs, role);
}

/// Bayes rule P(Y=1|z) for gaussian_pair.
inline double gaussian_pair_posterior(double z, double prevalence, double shift)
{
    const double a = prevalence * normal_pdf(z, shift, 1.0);
    const double b = (1.0 - prevalence) * normal_pdf(z, 0.0, 1.0);
    return a / (a + b);
}

inline double mean_labels(const lshift::Dataset& d)
{
    double s = 0;
    for (int v : d.labels()) s += v;
    return s / static_cast<double>(d.size());
}

} // namespace testing
