#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "featdist/error.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/kernel.hpp"

namespace featdist {

enum class MetricKind { fd, cka };

inline std::string_view to_string(MetricKind kind) { return kind == MetricKind::fd ? "fd" : "cka"; }

inline MetricKind parse_metric(std::string_view name) {
    if (name == "fd") return MetricKind::fd;
    if (name == "cka") return MetricKind::cka;
    throw Error(ErrorKind::InvalidRecipe, "unknown metric '" + std::string(name) + "'");
}

/// One distance or similarity value together with how it was produced.
/// n_real / n_syn are the sample counts that entered the computation.
struct MetricResult {
    MetricKind metric = MetricKind::fd;
    double value = 0.0;
    std::string extractor_id;
    std::string layer_id;
    std::optional<KernelSpec> kernel;
    NormalizationSpec normalization;
    std::size_t n_real = 0;
    std::size_t n_syn = 0;
    std::optional<std::uint64_t> seed;
    std::optional<double> bandwidth_used;
    std::vector<std::string> warnings;

    friend bool operator==(const MetricResult&, const MetricResult&) = default;
};

} // namespace featdist
