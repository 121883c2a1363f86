#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace featdist {

enum class ErrorKind {
    // ingestion
    MissingFile,
    ShapeMismatch,
    NonFiniteValue,
    DegenerateRow,
    SampleCountOutOfRange,
    InsufficientSamples,
    InvalidManifest,
    // metric engine
    DimensionMismatch,
    NotSymmetric,
    NumericalFailure,
    ZeroMedian,
    MissingBandwidth,
    AlreadyCentered,
    SizeMismatch,
    DegenerateInput,
    InvalidKernel,
    // aggregation
    MixedMetrics,
    EmptyInput,
    SampleCountMismatch,
    InvalidReport,
    // robustness
    LabelOutOfRange,
    PoolTooSmall,
    SizeExceedsPool,
    // recipe / cli
    InvalidRecipe,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DegenerateRow: return "DegenerateRow";
    case ErrorKind::SampleCountOutOfRange: return "SampleCountOutOfRange";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::InvalidManifest: return "InvalidManifest";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::ZeroMedian: return "ZeroMedian";
    case ErrorKind::MissingBandwidth: return "MissingBandwidth";
    case ErrorKind::AlreadyCentered: return "AlreadyCentered";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::InvalidKernel: return "InvalidKernel";
    case ErrorKind::MixedMetrics: return "MixedMetrics";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SampleCountMismatch: return "SampleCountMismatch";
    case ErrorKind::InvalidReport: return "InvalidReport";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::PoolTooSmall: return "PoolTooSmall";
    case ErrorKind::SizeExceedsPool: return "SizeExceedsPool";
    case ErrorKind::InvalidRecipe: return "InvalidRecipe";
    }
    return "Unknown";
}

/// True for failures that come out of the numerics rather than from
/// malformed inputs or configuration. The CLI maps these to exit code 2.
inline bool is_numerical(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NotSymmetric:
    case ErrorKind::NumericalFailure:
    case ErrorKind::ZeroMedian:
    case ErrorKind::DegenerateInput:
    case ErrorKind::DegenerateRow:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> row = std::nullopt)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), row_(row) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Offending row for row-scoped errors (NonFiniteValue, DegenerateRow).
    std::optional<std::size_t> row() const noexcept { return row_; }

private:
    ErrorKind kind_;
    std::optional<std::size_t> row_;
};

} // namespace featdist
