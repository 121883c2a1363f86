#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "featdist/error.hpp"
#include "featdist/random.hpp"

namespace featdist {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x d block of finite float64 feature activations, one row per sample.
/// Immutable once built; copies share storage.
class FeatureMatrix {
public:
    explicit FeatureMatrix(RowMatrix values)
        : values_(std::make_shared<const RowMatrix>(validated(std::move(values)))) {}

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values_->rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values_->cols()); }

    const RowMatrix& values() const noexcept { return *values_; }

    std::span<const double> row(std::size_t i) const noexcept {
        return {values_->data() + i * cols(), cols()};
    }

    double operator()(std::size_t i, std::size_t j) const noexcept {
        return (*values_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    /// Rows at the given indices, in the given order.
    FeatureMatrix take_rows(std::span<const std::size_t> indices) const {
        RowMatrix out(static_cast<Eigen::Index>(indices.size()), values_->cols());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            out.row(static_cast<Eigen::Index>(r)) = values_->row(static_cast<Eigen::Index>(indices[r]));
        }
        return FeatureMatrix(std::move(out));
    }

private:
    static RowMatrix validated(RowMatrix values) {
        if (values.rows() < 2) {
            throw Error(ErrorKind::InsufficientSamples,
                        "feature matrix needs at least 2 rows, got " + std::to_string(values.rows()));
        }
        if (values.cols() < 1) {
            throw Error(ErrorKind::ShapeMismatch, "feature matrix needs at least 1 column");
        }
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            if (!values.row(i).allFinite()) {
                throw Error(ErrorKind::NonFiniteValue,
                            "non-finite value in row " + std::to_string(i),
                            static_cast<std::size_t>(i));
            }
        }
        return values;
    }

    std::shared_ptr<const RowMatrix> values_;
};

enum class Normalization { none, softmax, l1, l2 };

struct NormalizationSpec {
    Normalization kind = Normalization::none;

    friend bool operator==(const NormalizationSpec&, const NormalizationSpec&) = default;
};

inline std::string_view to_string(Normalization kind) {
    switch (kind) {
    case Normalization::none: return "none";
    case Normalization::softmax: return "softmax";
    case Normalization::l1: return "l1";
    case Normalization::l2: return "l2";
    }
    return "none";
}

inline Normalization parse_normalization(std::string_view name) {
    if (name == "none") return Normalization::none;
    if (name == "softmax") return Normalization::softmax;
    if (name == "l1") return Normalization::l1;
    if (name == "l2") return Normalization::l2;
    throw Error(ErrorKind::InvalidRecipe, "unknown normalization '" + std::string(name) + "'");
}

/// Row-wise normalization. Softmax subtracts the row max before
/// exponentiating; l1/l2 reject all-zero rows.
inline FeatureMatrix normalize(const FeatureMatrix& x, NormalizationSpec spec) {
    if (spec.kind == Normalization::none) {
        return x;
    }
    RowMatrix out = x.values();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        switch (spec.kind) {
        case Normalization::softmax: {
            const double peak = r.maxCoeff();
            double total = 0.0;
            for (Eigen::Index j = 0; j < r.size(); ++j) {
                r(j) = std::exp(r(j) - peak);
                total += r(j);
            }
            r /= total;
            break;
        }
        case Normalization::l1: {
            double total = 0.0;
            for (Eigen::Index j = 0; j < r.size(); ++j) {
                total += std::abs(r(j));
            }
            if (total == 0.0) {
                throw Error(ErrorKind::DegenerateRow, "all-zero row " + std::to_string(i) + " under l1",
                            static_cast<std::size_t>(i));
            }
            r /= total;
            break;
        }
        case Normalization::l2: {
            double total = 0.0;
            for (Eigen::Index j = 0; j < r.size(); ++j) {
                total += r(j) * r(j);
            }
            if (total == 0.0) {
                throw Error(ErrorKind::DegenerateRow, "all-zero row " + std::to_string(i) + " under l2",
                            static_cast<std::size_t>(i));
            }
            r /= std::sqrt(total);
            break;
        }
        case Normalization::none:
            break;
        }
    }
    return FeatureMatrix(std::move(out));
}

/// Row indices chosen by subsample(); exposed so harnesses can reuse the
/// exact selection.
inline std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (m < 2 || m > n) {
        throw Error(ErrorKind::SampleCountOutOfRange,
                    "subsample size " + std::to_string(m) + " outside [2, " + std::to_string(n) + "]");
    }
    return select_indices(n, m, seed);
}

/// m rows drawn uniformly without replacement, kept in their original order.
inline FeatureMatrix subsample(const FeatureMatrix& x, std::size_t m, std::uint64_t seed) {
    if (m == x.rows()) {
        return x;
    }
    const auto idx = subsample_indices(x.rows(), m, seed);
    return x.take_rows(idx);
}

} // namespace featdist
