#pragma once

// Declarative evaluation recipes and the three experiment drivers
// (evaluate, attack, sweep) that turn a recipe into an EvaluationReport.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "featdist/error.hpp"
#include "featdist/manifest.hpp"
#include "featdist/metric.hpp"
#include "featdist/parallel.hpp"
#include "featdist/report.hpp"
#include "featdist/robustness.hpp"

namespace featdist {

inline const std::vector<std::size_t> kDefaultSweepSizes = {5000, 10000, 50000, 100000, 250000, 500000};

struct Recipe {
    std::string model_id;
    std::vector<FeatureManifest> real;
    std::vector<FeatureManifest> syn;
    std::vector<MetricKind> metrics;
    KernelSpec kernel;
    NormalizationSpec normalization;
    std::uint64_t seed = 0;
    std::size_t cka_max_samples = 20000;
    std::size_t median_cap = 4096;
    std::size_t block_size = 256;
    double fd_epsilon = 0.0;
    std::optional<std::filesystem::path> output;
    ReportFormat format = ReportFormat::json;
    std::map<std::string, std::vector<std::string>> overall_layers;
    // attack
    std::optional<std::size_t> attack_m;
    std::optional<std::size_t> num_classes;
    std::size_t noise_repeats = 0;
    // sweep
    std::vector<std::size_t> sweep_sizes;
};

/// A real/syn manifest pair sharing (extractor_id, layer_id).
struct Cell {
    const FeatureManifest* real = nullptr;
    const FeatureManifest* syn = nullptr;

    std::string name() const { return "(" + real->extractor_id + ", " + real->layer_id + ")"; }
};

namespace detail {

inline std::string format_name(ReportFormat f) {
    switch (f) {
    case ReportFormat::json: return "json";
    case ReportFormat::csv: return "csv";
    case ReportFormat::table: return "table";
    }
    return "json";
}

template <typename J>
std::vector<FeatureManifest> manifests_from_json(const J& list, const std::filesystem::path& base_dir,
                                                 const char* field) {
    if (!list.is_array()) {
        throw Error(ErrorKind::InvalidRecipe, std::string("recipe: '") + field + "' must be an array");
    }
    std::vector<FeatureManifest> out;
    for (const auto& entry : list) {
        if (entry.is_string()) {
            const std::filesystem::path p = entry.template get<std::string>();
            out.push_back(read_manifest(p.is_absolute() ? p : base_dir / p));
        } else {
            out.push_back(manifest_from_json(entry, base_dir));
        }
    }
    check_unique(out);
    return out;
}

} // namespace detail

template <typename J>
Recipe recipe_from_json(const J& j, const std::filesystem::path& base_dir = {}) {
    constexpr auto kind = ErrorKind::InvalidRecipe;
    const std::string what = "recipe";
    detail::reject_unknown_fields(j, {"model_id", "real", "syn", "metrics", "kernel", "normalization", "seed", "caps",
                                      "block_size", "fd_epsilon", "output", "format", "overall_layers", "attack",
                                      "sweep"},
                                  kind, what);
    Recipe r;
    r.model_id = detail::required<std::string>(j, "model_id", kind, what);
    if (!j.contains("real") || !j.contains("syn")) {
        throw Error(kind, "recipe: 'real' and 'syn' manifest lists are required");
    }
    r.real = detail::manifests_from_json(j.at("real"), base_dir, "real");
    r.syn = detail::manifests_from_json(j.at("syn"), base_dir, "syn");
    for (const auto& name : detail::required<std::vector<std::string>>(j, "metrics", kind, what)) {
        r.metrics.push_back(parse_metric(name));
    }
    if (r.metrics.empty()) {
        throw Error(kind, "recipe: 'metrics' must not be empty");
    }
    if (std::set<MetricKind>(r.metrics.begin(), r.metrics.end()).size() != r.metrics.size()) {
        throw Error(kind, "recipe: 'metrics' lists a metric twice");
    }
    if (j.contains("kernel")) {
        r.kernel = kernel_from_json(j.at("kernel"), kind);
    }
    if (j.contains("normalization")) {
        r.normalization.kind = parse_normalization(detail::required<std::string>(j, "normalization", kind, what));
    }
    if (j.contains("seed")) r.seed = detail::required<std::uint64_t>(j, "seed", kind, what);
    if (j.contains("caps")) {
        const auto& caps = j.at("caps");
        detail::reject_unknown_fields(caps, {"cka_max_samples", "median_cap"}, kind, "recipe caps");
        if (caps.contains("cka_max_samples")) {
            r.cka_max_samples = detail::required<std::size_t>(caps, "cka_max_samples", kind, "recipe caps");
        }
        if (caps.contains("median_cap")) {
            r.median_cap = detail::required<std::size_t>(caps, "median_cap", kind, "recipe caps");
        }
        if (r.cka_max_samples < 2 || r.median_cap < 2) {
            throw Error(kind, "recipe caps must be >= 2");
        }
    }
    if (j.contains("block_size")) {
        r.block_size = detail::required<std::size_t>(j, "block_size", kind, what);
        if (r.block_size == 0) {
            throw Error(kind, "recipe: 'block_size' must be positive");
        }
    }
    if (j.contains("fd_epsilon")) r.fd_epsilon = detail::required<double>(j, "fd_epsilon", kind, what);
    if (j.contains("output")) {
        const std::filesystem::path p = detail::required<std::string>(j, "output", kind, what);
        r.output = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("format")) r.format = parse_format(detail::required<std::string>(j, "format", kind, what));
    if (j.contains("overall_layers")) {
        r.overall_layers =
            detail::required<std::map<std::string, std::vector<std::string>>>(j, "overall_layers", kind, what);
    }
    if (j.contains("attack")) {
        const auto& a = j.at("attack");
        detail::reject_unknown_fields(a, {"m", "num_classes", "noise_repeats"}, kind, "recipe attack");
        if (a.contains("m")) r.attack_m = detail::required<std::size_t>(a, "m", kind, "recipe attack");
        if (a.contains("num_classes")) {
            r.num_classes = detail::required<std::size_t>(a, "num_classes", kind, "recipe attack");
        }
        if (a.contains("noise_repeats")) {
            r.noise_repeats = detail::required<std::size_t>(a, "noise_repeats", kind, "recipe attack");
        }
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::reject_unknown_fields(s, {"sizes"}, kind, "recipe sweep");
        r.sweep_sizes = detail::required<std::vector<std::size_t>>(s, "sizes", kind, "recipe sweep");
    }
    return r;
}

inline Recipe read_recipe(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open recipe " + file.string());
    }
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidRecipe, file.string() + ": " + e.what());
    }
    return recipe_from_json(j, file.parent_path());
}

/// Pairs real and syn manifests by (extractor_id, layer_id), in real-list
/// order. Every entry on either side must find a partner.
inline std::vector<Cell> resolve_cells(const Recipe& r) {
    std::vector<Cell> cells;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& real : r.real) {
        if (!seen.emplace(real.extractor_id, real.layer_id).second) {
            throw Error(ErrorKind::InvalidRecipe, "real manifests list (" + real.extractor_id + ", " + real.layer_id +
                                                      ") twice");
        }
        const auto it = std::find_if(r.syn.begin(), r.syn.end(), [&](const FeatureManifest& s) {
            return s.extractor_id == real.extractor_id && s.layer_id == real.layer_id;
        });
        if (it == r.syn.end()) {
            throw Error(ErrorKind::InvalidRecipe, "no syn manifest for (" + real.extractor_id + ", " + real.layer_id + ")");
        }
        cells.push_back({&real, &*it});
    }
    for (const auto& syn : r.syn) {
        if (!seen.contains({syn.extractor_id, syn.layer_id})) {
            throw Error(ErrorKind::InvalidRecipe, "no real manifest for (" + syn.extractor_id + ", " + syn.layer_id + ")");
        }
    }
    for (const auto& [extractor, layers] : r.overall_layers) {
        for (const auto& layer : layers) {
            if (!seen.contains({extractor, layer})) {
                throw Error(ErrorKind::InvalidRecipe,
                            "overall_layers names (" + extractor + ", " + layer + ") which has no manifests");
            }
        }
    }
    return cells;
}

inline nlohmann::ordered_json resolved_json(const Recipe& r) {
    nlohmann::ordered_json j;
    j["model_id"] = r.model_id;
    j["real"] = nlohmann::ordered_json::array();
    for (const auto& m : r.real) j["real"].push_back(to_json(m));
    j["syn"] = nlohmann::ordered_json::array();
    for (const auto& m : r.syn) j["syn"].push_back(to_json(m));
    j["metrics"] = nlohmann::ordered_json::array();
    for (auto m : r.metrics) j["metrics"].push_back(to_string(m));
    j["kernel"] = kernel_to_json(r.kernel);
    j["normalization"] = to_string(r.normalization.kind);
    j["seed"] = r.seed;
    j["caps"] = {{"cka_max_samples", r.cka_max_samples}, {"median_cap", r.median_cap}};
    j["block_size"] = r.block_size;
    j["fd_epsilon"] = r.fd_epsilon;
    j["overall_layers"] = r.overall_layers;
    return j;
}

/// FNV-1a over the canonical JSON of the resolved recipe plus any
/// command-specific parameters. Output paths, format, threads and verbosity
/// do not enter the digest.
inline std::string config_digest(const Recipe& r, const nlohmann::ordered_json& command_parameters = {}) {
    nlohmann::ordered_json j = resolved_json(r);
    if (!command_parameters.is_null()) {
        j["command"] = command_parameters;
    }
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct RunOptions {
    unsigned threads = 1;
    bool verbose = false;
    std::ostream* log = &std::cerr;
};

namespace detail {

inline MetricConfig metric_config(const Recipe& r, MetricKind kind, unsigned inner_threads) {
    MetricConfig cfg;
    cfg.metric = kind;
    cfg.kernel = r.kernel;
    cfg.normalization = r.normalization;
    cfg.cka.max_samples = r.cka_max_samples;
    cfg.cka.median_cap = r.median_cap;
    cfg.cka.compute.block_size = r.block_size;
    cfg.cka.compute.threads = inner_threads;
    cfg.fd_epsilon = r.fd_epsilon;
    return cfg;
}

struct LoadedCell {
    Cell cell;
    FeatureMatrix real;
    FeatureMatrix syn;
};

inline FeatureMatrix load_for(const FeatureManifest& m, const char* side) {
    try {
        return load_features(m);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(side) + " features for (" + m.extractor_id + ", " + m.layer_id + "): " +
                                  e.what(),
                    e.row());
    }
}

inline std::vector<LoadedCell> load_cells(const Recipe& r) {
    std::vector<LoadedCell> out;
    for (const auto& c : resolve_cells(r)) {
        out.push_back({c, load_for(*c.real, "real"), load_for(*c.syn, "syn")});
    }
    return out;
}

/// Splits the thread budget between concurrent cells and the kernels inside
/// each cell. Neither choice affects results.
inline std::pair<unsigned, unsigned> split_threads(unsigned threads, std::size_t cells) {
    threads = std::max(1u, threads);
    const auto outer = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, cells)));
    return {outer, std::max(1u, threads / outer)};
}

template <typename F>
auto in_cell(const Cell& cell, std::string_view metric, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), "cell " + cell.name() + " metric " + std::string(metric) + ": " + e.what(), e.row());
    }
}

inline void log_line(const RunOptions& opts, const std::string& line) {
    if (opts.verbose && opts.log) {
        *opts.log << line << '\n';
    }
}

inline void warn_results(const RunOptions& opts, const std::vector<MetricResult>& results) {
    if (!opts.log) {
        return;
    }
    for (const auto& r : results) {
        for (const auto& w : r.warnings) {
            *opts.log << r.extractor_id << '/' << r.layer_id << ": " << w << '\n';
        }
    }
}

} // namespace detail

/// Every configured metric on every real/syn cell, plus the overall scores.
inline EvaluationReport run_evaluate(const Recipe& r, const RunOptions& opts = {}) {
    const auto cells = detail::load_cells(r);
    const std::size_t jobs = cells.size() * r.metrics.size();
    const auto [outer, inner] = detail::split_threads(opts.threads, jobs);

    std::vector<MetricResult> grid(jobs);
    parallel_for(jobs, outer, [&](std::size_t job) {
        const auto& lc = cells[job / r.metrics.size()];
        const MetricKind kind = r.metrics[job % r.metrics.size()];
        const auto cfg = detail::metric_config(r, kind, inner);
        grid[job] = detail::in_cell(lc.cell, to_string(kind), [&] { return compute_metric(lc.real, lc.syn, cfg, r.seed); });
        grid[job].extractor_id = lc.cell.real->extractor_id;
        grid[job].layer_id = lc.cell.real->layer_id;
        grid[job].seed = r.seed;
    });
    for (const auto& res : grid) {
        detail::log_line(opts, res.extractor_id + "/" + res.layer_id + " " + std::string(to_string(res.metric)) + " = " +
                                   std::to_string(res.value));
    }
    detail::warn_results(opts, grid);

    EvaluationReport report;
    report.model_id = r.model_id;
    report.config_digest = config_digest(r, {{"command", "evaluate"}});
    report.results = std::move(grid);
    compute_overall(report, r.overall_layers);
    return report;
}

/// Histogram-matching attack on every cell. The syn manifest of a cell is the
/// candidate pool; labels come from "<features>.labels.npy" next to the real
/// and pool feature files.
inline EvaluationReport run_attack(const Recipe& r, const RunOptions& opts = {}) {
    if (!r.attack_m) {
        throw Error(ErrorKind::InvalidRecipe, "attack needs a subset size (recipe attack.m or --m)");
    }
    const std::size_t m = *r.attack_m;
    const auto cells = detail::load_cells(r);

    struct Labels {
        std::vector<ClassId> real;
        std::vector<ClassId> pool;
    };
    std::vector<Labels> labels;
    std::size_t num_classes = r.num_classes.value_or(0);
    for (const auto& lc : cells) {
        Labels l{load_labels(labels_path_for(lc.cell.real->resolved_path())),
                 load_labels(labels_path_for(lc.cell.syn->resolved_path()))};
        if (l.real.size() != lc.real.rows() || l.pool.size() != lc.syn.rows()) {
            throw Error(ErrorKind::ShapeMismatch, "label count does not match feature rows for " + lc.cell.name());
        }
        if (!r.num_classes) {
            for (auto v : l.real) num_classes = std::max<std::size_t>(num_classes, static_cast<std::size_t>(std::max<ClassId>(v, 0)) + 1);
            for (auto v : l.pool) num_classes = std::max<std::size_t>(num_classes, static_cast<std::size_t>(std::max<ClassId>(v, 0)) + 1);
        }
        if (m > lc.syn.rows()) {
            throw Error(ErrorKind::PoolTooSmall, "attack subset size " + std::to_string(m) + " exceeds pool of " +
                                                     std::to_string(lc.syn.rows()) + " for " + lc.cell.name());
        }
        labels.push_back(std::move(l));
    }

    const auto [outer, inner] = detail::split_threads(opts.threads, cells.size());
    std::vector<AttackResult> outcomes(cells.size());
    std::vector<std::vector<NoiseBand>> bands(cells.size());
    parallel_for(cells.size(), outer, [&](std::size_t c) {
        const auto& lc = cells[c];
        std::vector<MetricConfig> configs;
        for (auto kind : r.metrics) configs.push_back(detail::metric_config(r, kind, inner));
        const LabeledPool pool{lc.syn, labels[c].pool, num_classes, std::nullopt};
        outcomes[c] = detail::in_cell(lc.cell, "attack", [&] {
            return attack_experiment(lc.real, pool, labels[c].real, m, configs, r.seed);
        });
        if (r.noise_repeats >= 2) {
            std::vector<std::uint64_t> seeds;
            for (std::size_t k = 0; k < r.noise_repeats; ++k) seeds.push_back(derive_seed(r.seed, k));
            for (const auto& cfg : configs) {
                bands[c].push_back(detail::in_cell(lc.cell, "noise", [&] {
                    return resampling_noise(lc.real, lc.syn, m, cfg, seeds);
                }));
            }
        }
    });

    EvaluationReport report;
    report.model_id = r.model_id;
    nlohmann::ordered_json params = {{"m", m}, {"seed", r.seed}, {"num_classes", num_classes},
                                     {"noise_repeats", r.noise_repeats}};
    report.config_digest = config_digest(r, {{"command", "attack"}, {"parameters", params}});

    Json experiment;
    experiment["kind"] = "attack";
    experiment["parameters"] = params;
    experiment["shortages"] = Json::object();
    experiment["cells"] = Json::array();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c].cell;
        const std::string key = cell.real->extractor_id + "/" + cell.real->layer_id;
        experiment["shortages"][key] = outcomes[c].match.shortage;
        for (std::size_t k = 0; k < outcomes[c].cells.size(); ++k) {
            auto ac = outcomes[c].cells[k];
            for (auto* res : {&ac.random, &ac.chosen}) {
                res->extractor_id = cell.real->extractor_id;
                res->layer_id = cell.real->layer_id;
            }
            Json entry;
            entry["extractor_id"] = cell.real->extractor_id;
            entry["layer_id"] = cell.real->layer_id;
            entry["metric"] = to_string(ac.random.metric);
            entry["random"] = ac.random.value;
            entry["chosen"] = ac.chosen.value;
            entry["gap"] = ac.gap;
            if (!bands[c].empty()) {
                entry["noise_stddev"] = bands[c][k].stddev;
                entry["noise_range"] = bands[c][k].range;
            }
            experiment["cells"].push_back(entry);
            detail::log_line(opts, key + " " + std::string(to_string(ac.random.metric)) + ": random " +
                                       std::to_string(ac.random.value) + ", chosen " + std::to_string(ac.chosen.value));
            report.results.push_back(std::move(ac.random));
        }
    }
    report.experiment = std::move(experiment);
    detail::warn_results(opts, report.results);
    compute_overall(report, r.overall_layers);
    return report;
}

/// Sample-count sweep on every cell: the syn manifest is the candidate pool.
inline EvaluationReport run_sweep(const Recipe& r, const RunOptions& opts = {}) {
    const std::vector<std::size_t> sizes = r.sweep_sizes.empty() ? kDefaultSweepSizes : r.sweep_sizes;
    const auto cells = detail::load_cells(r);
    for (const auto& lc : cells) {
        if (!sizes.empty() && sizes.back() > lc.syn.rows()) {
            throw Error(ErrorKind::SizeExceedsPool, "sweep size " + std::to_string(sizes.back()) +
                                                        " exceeds the pool of " + std::to_string(lc.syn.rows()) +
                                                        " rows for " + lc.cell.name());
        }
    }

    const auto [outer, inner] = detail::split_threads(opts.threads, cells.size());
    std::vector<SweepResult> outcomes(cells.size());
    parallel_for(cells.size(), outer, [&](std::size_t c) {
        const auto& lc = cells[c];
        std::vector<MetricConfig> configs;
        for (auto kind : r.metrics) configs.push_back(detail::metric_config(r, kind, 1));
        outcomes[c] = detail::in_cell(lc.cell, "sweep", [&] {
            return sample_sweep(lc.real, lc.syn, sizes, configs, r.seed, inner);
        });
    });

    EvaluationReport report;
    report.model_id = r.model_id;
    nlohmann::ordered_json params = {{"sizes", sizes},
                                     {"seed", r.seed},
                                     {"variation_definition", std::string(SweepResult::variation_definition)}};
    report.config_digest = config_digest(r, {{"command", "sweep"}, {"parameters", params}});

    Json experiment;
    experiment["kind"] = "sweep";
    experiment["parameters"] = params;
    experiment["variation"] = Json::object();
    experiment["cells"] = Json::array();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c].cell;
        for (auto kind : r.metrics) {
            const std::string label(to_string(kind));
            const auto& sweep = outcomes[c];
            const std::string key = cell.real->extractor_id + "/" + cell.real->layer_id + "/" + label;
            experiment["variation"][key] = sweep.variation.at(label);
            Json entry;
            entry["extractor_id"] = cell.real->extractor_id;
            entry["layer_id"] = cell.real->layer_id;
            entry["metric"] = label;
            entry["values"] = sweep.values.at(label);
            entry["variation"] = sweep.variation.at(label);
            experiment["cells"].push_back(entry);

            MetricResult last = sweep.results.at(label).back();
            last.extractor_id = cell.real->extractor_id;
            last.layer_id = cell.real->layer_id;
            detail::log_line(opts, key + " variation " + std::to_string(sweep.variation.at(label)));
            report.results.push_back(std::move(last));
        }
    }
    report.experiment = std::move(experiment);
    detail::warn_results(opts, report.results);
    compute_overall(report, r.overall_layers);
    return report;
}

} // namespace featdist
