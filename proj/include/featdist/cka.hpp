#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "featdist/error.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/kernel.hpp"
#include "featdist/metric_result.hpp"
#include "featdist/parallel.hpp"

namespace featdist {

struct CkaOptions {
    /// Per-side sample cap for Gram-based (rbf/polynomial) CKA. 20000^2
    /// doubles is ~3.2 GB per Gram.
    std::size_t max_samples = 20000;
    /// Point cap for the median heuristic.
    std::size_t median_cap = 4096;
    ComputeOptions compute;
};

namespace detail {

// Sum_ij a_ij * b_ij over two n x n column-major matrices: sequential within
// a column, pairwise across columns.
inline double frobenius_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, unsigned threads) {
    const auto n = static_cast<std::size_t>(a.rows());
    const std::size_t cols = static_cast<std::size_t>(a.cols());
    std::vector<double> partial(cols);
    parallel_for(cols, threads, [&](std::size_t c) {
        const double* pa = a.data() + c * n;
        const double* pb = b.data() + c * n;
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            acc += pa[r] * pb[r];
        }
        partial[c] = acc;
    });
    return pairwise_sum(partial);
}

inline double clamp_hsic(double value, double scale) {
    if (value < 0.0 && value >= -1e-12 * std::max(1.0, scale)) {
        return 0.0;
    }
    return value;
}

struct HsicTriple {
    double xy = 0.0;
    double xx = 0.0;
    double yy = 0.0;
    double scale_x = 0.0; // magnitude of the uncentered operands, for degeneracy tests
    double scale_y = 0.0;
};

inline HsicTriple hsic_triple_gram(const FeatureMatrix& x, const FeatureMatrix& y, const KernelSpec& k,
                                   std::optional<double> sigma_x, std::optional<double> sigma_y,
                                   const ComputeOptions& opts) {
    GramMatrix kx = gram(x, k, sigma_x, opts);
    GramMatrix ky = gram(y, k, sigma_y, opts);
    const double n1 = static_cast<double>(x.rows() - 1);
    const double denom = n1 * n1;
    HsicTriple t;
    t.scale_x = kx.values.cwiseAbs().maxCoeff() * static_cast<double>(x.rows()) / n1;
    t.scale_y = ky.values.cwiseAbs().maxCoeff() * static_cast<double>(y.rows()) / n1;
    kx = center(std::move(kx), opts);
    ky = center(std::move(ky), opts);
    t.xy = frobenius_inner(kx.values, ky.values, opts.threads) / denom;
    t.xx = frobenius_inner(kx.values, kx.values, opts.threads) / denom;
    t.yy = frobenius_inner(ky.values, ky.values, opts.threads) / denom;
    return t;
}

// Linear kernel through the features: Tr(K~ L~) = ||X~^T Y~||_F^2 with
// column-centered X~, Y~. Avoids the n x n Grams entirely.
inline HsicTriple hsic_triple_linear(const FeatureMatrix& x, const FeatureMatrix& y) {
    const Eigen::MatrixXd xc = x.values().rowwise() - x.values().colwise().mean();
    const Eigen::MatrixXd yc = y.values().rowwise() - y.values().colwise().mean();
    const double n1 = static_cast<double>(x.rows() - 1);
    const double denom = n1 * n1;
    HsicTriple t;
    t.xy = (xc.transpose() * yc).squaredNorm() / denom;
    t.xx = (xc.transpose() * xc).squaredNorm() / denom;
    t.yy = (yc.transpose() * yc).squaredNorm() / denom;
    t.scale_x = x.values().rowwise().squaredNorm().maxCoeff() * static_cast<double>(x.rows()) / n1;
    t.scale_y = y.values().rowwise().squaredNorm().maxCoeff() * static_cast<double>(y.rows()) / n1;
    return t;
}

/// CKA from an HSIC triple; rejects sides whose centered kernel vanishes.
inline double cka_from_triple(const HsicTriple& t) {
    const double xy = clamp_hsic(t.xy, std::sqrt(std::abs(t.xx * t.yy)));
    // Constant features leave only round-off in the centered Gram.
    if (!(t.xx > 1e-20 * t.scale_x * t.scale_x) || !(t.yy > 1e-20 * t.scale_y * t.scale_y)) {
        throw Error(ErrorKind::DegenerateInput,
                    "HSIC(x,x) or HSIC(y,y) is zero; CKA undefined for constant features");
    }
    return xy / std::sqrt(t.xx * t.yy);
}

} // namespace detail

/// Biased HSIC, Tr(K~ L~) / (n - 1)^2, with K~ = H K H. Uncentered inputs are
/// centered here; the trace is taken as the elementwise-product sum.
inline double hsic(const GramMatrix& kx, const GramMatrix& ky, const ComputeOptions& opts = {}) {
    if (kx.size() != ky.size()) {
        throw Error(ErrorKind::SizeMismatch,
                    "gram sizes differ: " + std::to_string(kx.size()) + " vs " + std::to_string(ky.size()));
    }
    if (kx.size() < 2) {
        throw Error(ErrorKind::InsufficientSamples, "HSIC needs n >= 2");
    }
    GramMatrix centered_x, centered_y;
    const GramMatrix* a = &kx;
    const GramMatrix* b = &ky;
    if (!kx.centered) {
        centered_x = center(kx, opts);
        a = &centered_x;
    }
    if (!ky.centered) {
        centered_y = center(ky, opts);
        b = &centered_y;
    }
    const double n1 = static_cast<double>(kx.size() - 1);
    const double value = detail::frobenius_inner(a->values, b->values, opts.threads) / (n1 * n1);
    return detail::clamp_hsic(value, a->values.norm() * b->values.norm() / (n1 * n1));
}

/// Centered kernel alignment HSIC(K,L) / sqrt(HSIC(K,K) HSIC(L,L)).
///
/// Both sets are normalized, the larger one is subsampled to the smaller
/// size, and rbf/polynomial inputs above `max_samples` are subsampled with a
/// warning recorded on the result. The RBF bandwidth is either the override
/// or bandwidth_fraction times the median pairwise distance over x and y,
/// shared by both Grams.
inline MetricResult cka(const FeatureMatrix& x_in, const FeatureMatrix& y_in, const KernelSpec& k,
                        NormalizationSpec norm, std::uint64_t seed, const CkaOptions& opts = {}) {
    k.validate();
    FeatureMatrix x = normalize(x_in, norm);
    FeatureMatrix y = normalize(y_in, norm);
    if (x.cols() != y.cols()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "feature dimensions differ: d=" + std::to_string(x.cols()) + " vs d=" + std::to_string(y.cols()));
    }

    MetricResult out;
    out.metric = MetricKind::cka;
    out.kernel = k;
    out.normalization = norm;
    out.seed = seed;

    std::size_t n = std::min(x.rows(), y.rows());
    if (k.kind != KernelKind::linear && n > opts.max_samples) {
        out.warnings.push_back("WARNING: " + std::string(to_string(k.kind)) + " CKA capped at " +
                               std::to_string(opts.max_samples) + " samples per side (had " +
                               std::to_string(x.rows()) + " and " + std::to_string(y.rows()) + ")");
        n = opts.max_samples;
    }
    if (x.rows() != n) {
        x = subsample(x, n, seed);
    }
    if (y.rows() != n) {
        y = subsample(y, n, seed);
    }

    std::optional<double> sigma;
    if (k.kind == KernelKind::rbf) {
        sigma = k.bandwidth_override
                    ? *k.bandwidth_override
                    : k.bandwidth_fraction * median_heuristic(x, y, opts.median_cap, seed, opts.compute);
        out.bandwidth_used = sigma;
    }

    const detail::HsicTriple t = k.kind == KernelKind::linear
                                     ? detail::hsic_triple_linear(x, y)
                                     : detail::hsic_triple_gram(x, y, k, sigma, sigma, opts.compute);
    out.value = detail::cka_from_triple(t);
    out.n_real = x.rows();
    out.n_syn = y.rows();
    return out;
}

} // namespace featdist
