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
#include "featdist/parallel.hpp"
#include "featdist/random.hpp"

namespace featdist {

enum class KernelKind { linear, polynomial, rbf };

inline std::string_view to_string(KernelKind kind) {
    switch (kind) {
    case KernelKind::linear: return "linear";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::rbf: return "rbf";
    }
    return "linear";
}

inline KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "polynomial" || name == "poly") return KernelKind::polynomial;
    if (name == "rbf") return KernelKind::rbf;
    throw Error(ErrorKind::InvalidKernel, "unknown kernel '" + std::string(name) + "'");
}

/// Kernel family and parameters. Only the fields of the chosen kind matter.
struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    int degree = 3;                          // polynomial
    double coef = 1.0;                       // polynomial
    double bandwidth_fraction = 1.0;         // rbf: sigma = fraction * median distance
    std::optional<double> bandwidth_override; // rbf: explicit sigma

    static KernelSpec linear() { return {KernelKind::linear, 3, 1.0, 1.0, std::nullopt}; }
    static KernelSpec polynomial(int degree, double coef) {
        return {KernelKind::polynomial, degree, coef, 1.0, std::nullopt};
    }
    static KernelSpec rbf(double fraction = 1.0, std::optional<double> sigma = {}) {
        return {KernelKind::rbf, 3, 1.0, fraction, sigma};
    }

    void validate() const {
        if (kind == KernelKind::polynomial) {
            if (degree < 1) {
                throw Error(ErrorKind::InvalidKernel, "polynomial degree must be >= 1");
            }
            // (x.y + c)^p is positive semi-definite only for c >= 0.
            if (!(coef >= 0.0) || !std::isfinite(coef)) {
                throw Error(ErrorKind::InvalidKernel, "polynomial coef must be finite and >= 0");
            }
        }
        if (kind == KernelKind::rbf) {
            if (!(bandwidth_fraction > 0.0) || !std::isfinite(bandwidth_fraction)) {
                throw Error(ErrorKind::InvalidKernel, "bandwidth_fraction must be positive");
            }
            if (bandwidth_override && (!(*bandwidth_override > 0.0) || !std::isfinite(*bandwidth_override))) {
                throw Error(ErrorKind::InvalidKernel, "bandwidth_override must be positive");
            }
        }
    }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Short human-readable form used in CSV and table output.
inline std::string describe(const KernelSpec& k) {
    char buf[96];
    switch (k.kind) {
    case KernelKind::linear:
        return "linear";
    case KernelKind::polynomial:
        std::snprintf(buf, sizeof buf, "polynomial(degree=%d;coef=%.17g)", k.degree, k.coef);
        return buf;
    case KernelKind::rbf:
        if (k.bandwidth_override) {
            std::snprintf(buf, sizeof buf, "rbf(sigma=%.17g)", *k.bandwidth_override);
        } else {
            std::snprintf(buf, sizeof buf, "rbf(fraction=%.17g)", k.bandwidth_fraction);
        }
        return buf;
    }
    return "linear";
}

namespace detail {

// Per-pair primitives. Accumulation order depends only on d, so a cell's
// value is the same whichever block or thread computes it.
inline double dot(const double* a, const double* b, std::size_t d) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= d; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < d; ++k) {
        s0 += a[k] * b[k];
    }
    return (s0 + s1) + (s2 + s3);
}

inline double squared_distance(const double* a, const double* b, std::size_t d) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= d; k += 4) {
        const double e0 = a[k] - b[k];
        const double e1 = a[k + 1] - b[k + 1];
        const double e2 = a[k + 2] - b[k + 2];
        const double e3 = a[k + 3] - b[k + 3];
        s0 += e0 * e0;
        s1 += e1 * e1;
        s2 += e2 * e2;
        s3 += e3 * e3;
    }
    for (; k < d; ++k) {
        const double e = a[k] - b[k];
        s0 += e * e;
    }
    return (s0 + s1) + (s2 + s3);
}

inline double int_power(double base, int exponent) noexcept {
    double result = 1.0;
    for (int i = 0; i < exponent; ++i) {
        result *= base;
    }
    return result;
}

// Enumerates the upper-triangular block pairs (bi <= bj) of an n x n matrix.
struct BlockPairs {
    std::size_t n;
    std::size_t block;
    std::size_t blocks;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    BlockPairs(std::size_t n_, std::size_t block_) : n(n_), block(std::max<std::size_t>(1, block_)) {
        blocks = (n + block - 1) / block;
        for (std::size_t bi = 0; bi < blocks; ++bi) {
            for (std::size_t bj = bi; bj < blocks; ++bj) {
                pairs.emplace_back(bi, bj);
            }
        }
    }
};

} // namespace detail

namespace detail {

inline double median_pairwise_distance(const std::vector<const double*>& points, std::size_t d,
                                       const ComputeOptions& opts) {
    const std::size_t p = points.size();
    const std::size_t pair_count = p * (p - 1) / 2;
    std::vector<double> dist(pair_count);
    // Row i owns the contiguous slice of pairs (i, j > i).
    parallel_for(p, opts.threads, [&](std::size_t i) {
        std::size_t offset = i * (2 * p - i - 1) / 2;
        for (std::size_t j = i + 1; j < p; ++j) {
            dist[offset++] = std::sqrt(squared_distance(points[i], points[j], d));
        }
    });

    const std::size_t mid = pair_count / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double median = dist[mid];
    if (pair_count % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (lower + median);
    }
    if (!(median > 0.0)) {
        throw Error(ErrorKind::ZeroMedian, "median pairwise distance is zero; RBF bandwidth undefined");
    }
    return median;
}

inline void append_rows(std::vector<const double*>& points, const FeatureMatrix& m, std::size_t take,
                        std::uint64_t seed) {
    if (take >= m.rows()) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            points.push_back(m.row(i).data());
        }
        return;
    }
    for (auto i : select_indices(m.rows(), take, seed)) {
        points.push_back(m.row(i).data());
    }
}

} // namespace detail

/// Median of pairwise Euclidean distances over the union of x and y, self
/// pairs excluded. Above `cap` total points, each side contributes
/// floor(cap * n_side / (n_x + n_y)) rows chosen by select_indices(seed), so
/// swapping x and y gives the same point set.
inline double median_heuristic(const FeatureMatrix& x, const FeatureMatrix& y, std::size_t cap, std::uint64_t seed,
                               const ComputeOptions& opts = {}) {
    if (x.cols() != y.cols()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "median heuristic over d=" + std::to_string(x.cols()) + " and d=" + std::to_string(y.cols()));
    }
    const std::size_t total = x.rows() + y.rows();
    cap = std::max<std::size_t>(cap, 2);
    std::vector<const double*> points;
    if (total <= cap) {
        detail::append_rows(points, x, x.rows(), seed);
        detail::append_rows(points, y, y.rows(), seed);
    } else {
        detail::append_rows(points, x, std::max<std::size_t>(1, cap * x.rows() / total), seed);
        detail::append_rows(points, y, std::max<std::size_t>(1, cap * y.rows() / total), seed);
    }
    return detail::median_pairwise_distance(points, x.cols(), opts);
}

/// Single-set variant, for kernels that are not shared across two sets.
inline double median_heuristic(const FeatureMatrix& z, std::size_t cap, std::uint64_t seed,
                               const ComputeOptions& opts = {}) {
    std::vector<const double*> points;
    detail::append_rows(points, z, std::max<std::size_t>(cap, 2), seed);
    return detail::median_pairwise_distance(points, z.cols(), opts);
}

/// Symmetric n x n kernel matrix, optionally double-centered.
struct GramMatrix {
    Eigen::MatrixXd values;
    bool centered = false;

    std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

/// Gram matrix of one feature set. RBF needs a bandwidth: `shared_sigma`
/// (computed jointly over both sets by the caller) wins over the kernel's
/// override. Work is split into row-block pairs; each cell is computed once.
inline GramMatrix gram(const FeatureMatrix& z, const KernelSpec& k, std::optional<double> shared_sigma = {},
                       const ComputeOptions& opts = {}) {
    k.validate();
    double inv_two_sigma_sq = 0.0;
    if (k.kind == KernelKind::rbf) {
        const auto sigma = shared_sigma ? shared_sigma : k.bandwidth_override;
        if (!sigma) {
            throw Error(ErrorKind::MissingBandwidth, "rbf kernel needs a bandwidth override or a shared sigma");
        }
        if (!(*sigma > 0.0) || !std::isfinite(*sigma)) {
            throw Error(ErrorKind::InvalidKernel, "rbf bandwidth must be positive and finite");
        }
        inv_two_sigma_sq = 1.0 / (2.0 * *sigma * *sigma);
    }

    const std::size_t n = z.rows();
    const std::size_t d = z.cols();
    const double* base = z.values().data();
    GramMatrix g{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), false};
    double* out = g.values.data(); // column-major, symmetric

    auto cell = [&](std::size_t i, std::size_t j) -> double {
        const double* a = base + i * d;
        const double* b = base + j * d;
        switch (k.kind) {
        case KernelKind::linear:
            return detail::dot(a, b, d);
        case KernelKind::polynomial:
            return detail::int_power(detail::dot(a, b, d) + k.coef, k.degree);
        case KernelKind::rbf:
            return i == j ? 1.0 : std::exp(-detail::squared_distance(a, b, d) * inv_two_sigma_sq);
        }
        return 0.0;
    };

    const detail::BlockPairs tiles(n, opts.block_size);
    parallel_for(tiles.pairs.size(), opts.threads, [&](std::size_t t) {
        const auto [bi, bj] = tiles.pairs[t];
        const std::size_t i0 = bi * tiles.block, i1 = std::min(n, i0 + tiles.block);
        const std::size_t j0 = bj * tiles.block, j1 = std::min(n, j0 + tiles.block);
        for (std::size_t i = i0; i < i1; ++i) {
            for (std::size_t j = (bi == bj ? i : j0); j < j1; ++j) {
                const double v = cell(i, j);
                out[j * n + i] = v;
                out[i * n + j] = v;
            }
        }
    });
    return g;
}

/// H g H with H = I - 11^T/n, as g - row_means - col_means + grand_mean.
/// Takes its argument by value so callers can move a large Gram in and have
/// it centered in place.
inline GramMatrix center(GramMatrix g, const ComputeOptions& opts = {}) {
    if (g.centered) {
        throw Error(ErrorKind::AlreadyCentered, "gram matrix is already centered");
    }
    const std::size_t n = g.size();
    double* data = g.values.data();
    // Column means; equal to row means for a symmetric matrix.
    std::vector<double> means(n);
    parallel_for(n, opts.threads, [&](std::size_t c) {
        means[c] = pairwise_sum(std::span<const double>(data + c * n, n)) / static_cast<double>(n);
    });
    const double grand = pairwise_sum(means) / static_cast<double>(n);

    parallel_for(n, opts.threads, [&](std::size_t c) {
        for (std::size_t r = 0; r < n; ++r) {
            data[c * n + r] = (data[c * n + r] - (means[r] + means[c])) + grand;
        }
    });
    g.centered = true;
    return g;
}

} // namespace featdist
