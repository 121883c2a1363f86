#pragma once

// Seeded synthetic feature sets for tests, benchmarks and demo fixtures.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "featdist/feature_matrix.hpp"
#include "featdist/random.hpp"
#include "featdist/robustness.hpp"

namespace featdist::synthetic {

/// n rows of N(mean, diag(stddev^2)); mean and stddev have length d.
inline FeatureMatrix gaussian(std::size_t n, std::span<const double> mean, std::span<const double> stddev,
                              std::uint64_t seed) {
    const std::size_t d = mean.size();
    RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    NormalSampler normal(seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mean[j] + stddev[j] * normal();
        }
    }
    return FeatureMatrix(std::move(x));
}

/// n rows of N(offset * 1, I_d).
inline FeatureMatrix isotropic(std::size_t n, std::size_t d, double offset, std::uint64_t seed) {
    const std::vector<double> mean(d, offset);
    const std::vector<double> sd(d, 1.0);
    return gaussian(n, mean, sd, seed);
}

/// Real set and a labeled candidate pool drawn from the same class-conditional
/// Gaussians, with different class proportions.
struct ClassConditional {
    FeatureMatrix real;
    std::vector<ClassId> real_labels;
    FeatureMatrix pool;
    std::vector<ClassId> pool_labels;
    std::size_t num_classes = 0;
};

struct ClassConditionalParams {
    std::size_t num_classes = 10;
    std::size_t dim = 8;
    std::size_t n_real = 5000;
    std::size_t n_pool = 20000;
    double class_separation = 2.0; // stddev of the class means around the origin
    double pool_skew = 0.25;       // pool weight of class c is exp(-skew * c); real is uniform
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<ClassId> draw_labels(std::size_t n, std::span<const double> weights, std::uint64_t seed) {
    std::vector<double> cdf(weights.size());
    double total = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
        total += weights[c];
        cdf[c] = total;
    }
    Xoshiro256StarStar rng(seed);
    std::vector<ClassId> labels(n);
    for (auto& l : labels) {
        const double u = rng.uniform() * total;
        std::size_t c = 0;
        while (c + 1 < cdf.size() && u >= cdf[c]) {
            ++c;
        }
        l = static_cast<ClassId>(c);
    }
    return labels;
}

inline FeatureMatrix draw_features(std::span<const ClassId> labels, const RowMatrix& means, std::uint64_t seed) {
    const auto d = means.cols();
    RowMatrix x(static_cast<Eigen::Index>(labels.size()), d);
    NormalSampler normal(seed);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), j) = means(labels[i], j) + normal();
        }
    }
    return FeatureMatrix(std::move(x));
}

} // namespace detail

inline ClassConditional class_conditional(const ClassConditionalParams& p) {
    RowMatrix means(static_cast<Eigen::Index>(p.num_classes), static_cast<Eigen::Index>(p.dim));
    NormalSampler normal(derive_seed(p.seed, 1));
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        for (Eigen::Index j = 0; j < means.cols(); ++j) {
            means(c, j) = p.class_separation * normal();
        }
    }
    const std::vector<double> uniform(p.num_classes, 1.0);
    std::vector<double> skewed(p.num_classes);
    for (std::size_t c = 0; c < p.num_classes; ++c) {
        skewed[c] = std::exp(-p.pool_skew * static_cast<double>(c));
    }
    auto real_labels = detail::draw_labels(p.n_real, uniform, derive_seed(p.seed, 2));
    auto pool_labels = detail::draw_labels(p.n_pool, skewed, derive_seed(p.seed, 3));
    auto real = detail::draw_features(real_labels, means, derive_seed(p.seed, 4));
    auto pool = detail::draw_features(pool_labels, means, derive_seed(p.seed, 5));
    return {std::move(real), std::move(real_labels), std::move(pool), std::move(pool_labels), p.num_classes};
}

} // namespace featdist::synthetic
