#pragma once

#include <cstdint>
#include <string>

#include "featdist/cka.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/frechet.hpp"
#include "featdist/metric_result.hpp"

namespace featdist {

/// One configured metric: which distance, and everything it needs.
struct MetricConfig {
    MetricKind metric = MetricKind::cka;
    KernelSpec kernel;
    NormalizationSpec normalization;
    CkaOptions cka;
    double fd_epsilon = 0.0;

    std::string label() const { return std::string(to_string(metric)); }
};

inline MetricResult compute_metric(const FeatureMatrix& real, const FeatureMatrix& syn, const MetricConfig& cfg,
                                   std::uint64_t seed) {
    if (cfg.metric == MetricKind::fd) {
        return frechet_from_features(real, syn, cfg.normalization, cfg.fd_epsilon);
    }
    return cka(real, syn, cfg.kernel, cfg.normalization, seed, cfg.cka);
}

} // namespace featdist
