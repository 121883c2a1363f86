#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featdist/error.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/metric.hpp"
#include "featdist/parallel.hpp"
#include "featdist/random.hpp"

namespace featdist {

using ClassId = std::int64_t;

struct ClassHistogram {
    std::map<ClassId, std::size_t> counts;
    std::size_t total = 0;
};

inline ClassHistogram class_histogram(std::span<const ClassId> labels, std::size_t num_classes) {
    ClassHistogram h;
    for (std::size_t c = 0; c < num_classes; ++c) {
        h.counts[static_cast<ClassId>(c)] = 0;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const ClassId c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
            throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(c) + " at index " + std::to_string(i) +
                                                        " outside [0, " + std::to_string(num_classes) + ")");
        }
        ++h.counts[c];
    }
    h.total = labels.size();
    return h;
}

/// Candidate superset with one predicted class per row.
struct LabeledPool {
    FeatureMatrix features;
    std::vector<ClassId> labels;
    std::size_t num_classes = 0;
    std::optional<RowMatrix> probabilities; // n x C, rows summing to 1

    void validate() const {
        if (labels.size() != features.rows()) {
            throw Error(ErrorKind::ShapeMismatch, "pool has " + std::to_string(features.rows()) + " rows but " +
                                                      std::to_string(labels.size()) + " labels");
        }
        class_histogram(labels, num_classes);
        if (probabilities) {
            if (static_cast<std::size_t>(probabilities->rows()) != features.rows() ||
                static_cast<std::size_t>(probabilities->cols()) != num_classes) {
                throw Error(ErrorKind::ShapeMismatch, "probability matrix shape does not match pool");
            }
            for (Eigen::Index i = 0; i < probabilities->rows(); ++i) {
                if (std::abs(probabilities->row(i).sum() - 1.0) > 1e-6) {
                    throw Error(ErrorKind::ShapeMismatch, "probability row " + std::to_string(i) + " does not sum to 1",
                                static_cast<std::size_t>(i));
                }
            }
        }
    }
};

/// Largest-remainder apportionment of m over the target counts; ties in the
/// remainder go to the smaller class id.
inline std::map<ClassId, std::size_t> largest_remainder_quotas(const ClassHistogram& target, std::size_t m) {
    if (target.total == 0) {
        throw Error(ErrorKind::EmptyInput, "target histogram is empty");
    }
    std::map<ClassId, std::size_t> quotas;
    std::vector<std::pair<std::size_t, ClassId>> remainders;
    std::size_t assigned = 0;
    for (const auto& [c, count] : target.counts) {
        const auto scaled = static_cast<unsigned __int128>(m) * count;
        quotas[c] = static_cast<std::size_t>(scaled / target.total);
        assigned += quotas[c];
        remainders.emplace_back(static_cast<std::size_t>(scaled % target.total), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; assigned < m; ++i, ++assigned) {
        ++quotas[remainders[i].second];
    }
    return quotas;
}

struct HistogramMatch {
    std::vector<std::size_t> indices; // sorted, unique
    std::map<ClassId, std::size_t> quotas;
    std::size_t shortage = 0;         // quota rows that had to be backfilled
};

/// Picks m pool rows whose label histogram follows `target`.
///
/// Each class fills its quota by a seeded draw among its members (stream
/// derive_seed(seed, class)). Unfilled quota is backfilled from the remaining
/// rows with stream derive_seed(seed, ~0).
inline HistogramMatch match_histogram(const LabeledPool& pool, const ClassHistogram& target, std::size_t m,
                                      std::uint64_t seed) {
    pool.validate();
    const std::size_t n = pool.features.rows();
    if (m > n) {
        throw Error(ErrorKind::PoolTooSmall,
                    "requested " + std::to_string(m) + " rows from a pool of " + std::to_string(n));
    }
    HistogramMatch out;
    out.quotas = largest_remainder_quotas(target, m);

    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
        members[pool.labels[i]].push_back(i);
    }
    std::vector<bool> taken(n, false);
    for (const auto& [c, quota] : out.quotas) {
        if (quota == 0) {
            continue;
        }
        const auto it = members.find(c);
        const std::size_t available = it == members.end() ? 0 : it->second.size();
        const std::size_t take = std::min(quota, available);
        out.shortage += quota - take;
        if (take == 0) {
            continue;
        }
        for (auto k : select_indices(available, take, derive_seed(seed, static_cast<std::uint64_t>(c)))) {
            const std::size_t row = it->second[k];
            taken[row] = true;
            out.indices.push_back(row);
        }
    }
    if (out.shortage > 0) {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i) {
            if (!taken[i]) {
                rest.push_back(i);
            }
        }
        for (auto k : select_indices(rest.size(), out.shortage, derive_seed(seed, ~std::uint64_t{0}))) {
            out.indices.push_back(rest[k]);
        }
    }
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

struct AttackCell {
    MetricResult random;
    MetricResult chosen;
    double gap = 0.0; // chosen - random
};

struct AttackResult {
    std::vector<AttackCell> cells; // one per metric config, in config order
    std::vector<std::size_t> random_indices;
    HistogramMatch match;
};

/// Scores a uniformly drawn subset and a histogram-matched subset of the
/// pool against the same real features. The generator and the real set are
/// untouched, so the gap only reflects the extractor's sensitivity to the
/// class mix.
inline AttackResult attack_experiment(const FeatureMatrix& real, const LabeledPool& pool,
                                      std::span<const ClassId> real_labels, std::size_t m,
                                      std::span<const MetricConfig> configs, std::uint64_t seed) {
    pool.validate();
    if (m > pool.features.rows()) {
        throw Error(ErrorKind::PoolTooSmall, "requested " + std::to_string(m) + " rows from a pool of " +
                                                 std::to_string(pool.features.rows()));
    }
    const ClassHistogram target = class_histogram(real_labels, pool.num_classes);

    AttackResult out;
    out.random_indices = subsample_indices(pool.features.rows(), m, seed);
    out.match = match_histogram(pool, target, m, seed);
    const FeatureMatrix random_subset = pool.features.take_rows(out.random_indices);
    const FeatureMatrix chosen_subset = pool.features.take_rows(out.match.indices);
    for (const auto& cfg : configs) {
        AttackCell cell;
        cell.random = compute_metric(real, random_subset, cfg, seed);
        cell.chosen = compute_metric(real, chosen_subset, cfg, seed);
        cell.random.seed = seed;
        cell.chosen.seed = seed;
        cell.gap = cell.chosen.value - cell.random.value;
        out.cells.push_back(std::move(cell));
    }
    return out;
}

/// Spread of the metric over uniformly resampled subsets, one per seed.
struct NoiseBand {
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation
    double range = 0.0;
};

inline NoiseBand resampling_noise(const FeatureMatrix& real, const FeatureMatrix& pool, std::size_t m,
                                  const MetricConfig& cfg, std::span<const std::uint64_t> seeds) {
    NoiseBand band;
    for (auto s : seeds) {
        band.values.push_back(compute_metric(real, subsample(pool, m, s), cfg, s).value);
    }
    if (band.values.empty()) {
        return band;
    }
    band.mean = pairwise_sum(band.values) / static_cast<double>(band.values.size());
    if (band.values.size() > 1) {
        double ss = 0.0;
        for (double v : band.values) {
            ss += (v - band.mean) * (v - band.mean);
        }
        band.stddev = std::sqrt(ss / static_cast<double>(band.values.size() - 1));
    }
    const auto [lo, hi] = std::minmax_element(band.values.begin(), band.values.end());
    band.range = *hi - *lo;
    return band;
}

/// Relative range anchored at the largest size: (max - min) / |last|.
inline double relative_range(std::span<const double> values) {
    if (values.size() < 2) {
        return 0.0;
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double spread = *hi - *lo;
    const double anchor = std::abs(values.back());
    if (spread == 0.0) {
        return 0.0;
    }
    if (anchor == 0.0) {
        throw Error(ErrorKind::NumericalFailure, "relative range undefined: value at the largest size is zero");
    }
    return spread / anchor;
}

struct SweepResult {
    std::vector<std::size_t> sizes;
    std::map<std::string, std::vector<double>> values;
    std::map<std::string, double> variation;
    std::map<std::string, std::vector<MetricResult>> results;
    static constexpr std::string_view variation_definition = "(max - min) / |value at largest size|";
};

/// Scores seeded subsamples of increasing size from `syn_pool` against the
/// fixed real set.
inline SweepResult sample_sweep(const FeatureMatrix& real, const FeatureMatrix& syn_pool,
                                std::span<const std::size_t> sizes, std::span<const MetricConfig> configs,
                                std::uint64_t seed, unsigned threads = 1) {
    if (sizes.empty()) {
        throw Error(ErrorKind::SizeExceedsPool, "sweep needs at least one size");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 2) {
            throw Error(ErrorKind::SampleCountOutOfRange, "sweep size must be >= 2");
        }
        if (i > 0 && sizes[i] <= sizes[i - 1]) {
            throw Error(ErrorKind::SizeExceedsPool, "sweep sizes must be strictly increasing");
        }
    }
    if (sizes.back() > syn_pool.rows()) {
        throw Error(ErrorKind::SizeExceedsPool, "sweep size " + std::to_string(sizes.back()) +
                                                    " exceeds the synthesized pool of " +
                                                    std::to_string(syn_pool.rows()));
    }
    std::map<std::string, bool> seen;
    for (const auto& cfg : configs) {
        if (!seen.emplace(cfg.label(), true).second) {
            throw Error(ErrorKind::InvalidRecipe, "duplicate sweep metric '" + cfg.label() + "'");
        }
    }

    SweepResult out;
    out.sizes.assign(sizes.begin(), sizes.end());
    const std::size_t cells = sizes.size() * configs.size();
    std::vector<MetricResult> grid(cells);
    parallel_for(cells, threads, [&](std::size_t c) {
        const std::size_t s = c / configs.size();
        const auto& cfg = configs[c % configs.size()];
        grid[c] = compute_metric(real, subsample(syn_pool, sizes[s], seed), cfg, seed);
        grid[c].seed = seed;
    });
    for (std::size_t k = 0; k < configs.size(); ++k) {
        const auto label = configs[k].label();
        for (std::size_t s = 0; s < sizes.size(); ++s) {
            out.results[label].push_back(grid[s * configs.size() + k]);
            out.values[label].push_back(grid[s * configs.size() + k].value);
        }
        out.variation[label] = relative_range(out.values[label]);
    }
    return out;
}

} // namespace featdist
