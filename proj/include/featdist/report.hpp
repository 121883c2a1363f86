#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "featdist/cka.hpp"
#include "featdist/error.hpp"
#include "featdist/manifest.hpp"
#include "featdist/metric_result.hpp"

namespace featdist {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Aggregation

namespace detail {

/// Mean with ascending-order summation: the result does not depend on the
/// order of `values`.
inline double sorted_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    return total / static_cast<double>(values.size());
}

} // namespace detail

/// Unweighted mean of CKA results. FD values are never averaged.
inline double overall_score(std::span<const MetricResult> results) {
    if (results.empty()) {
        throw Error(ErrorKind::EmptyInput, "overall score of an empty result list");
    }
    std::vector<double> values;
    values.reserve(results.size());
    for (const auto& r : results) {
        if (r.metric != MetricKind::cka) {
            throw Error(ErrorKind::MixedMetrics, "FD results cannot be averaged into an overall score (" +
                                                     r.extractor_id + "/" + r.layer_id + ")");
        }
        values.push_back(r.value);
    }
    return detail::sorted_mean(std::move(values));
}

struct EvaluationReport {
    std::string model_id;
    std::string config_digest;
    std::vector<MetricResult> results;
    std::optional<double> overall_by_extractor;
    std::map<std::string, double> overall_by_layer;
    std::optional<Json> experiment; // attack / sweep block

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Fills the overall fields from the report's CKA results.
///
/// overall_by_layer[e] averages extractor e's layers (restricted to
/// `layer_inclusion[e]` when given) and exists when there are at least two.
/// Each extractor then contributes one score, its layer overall or its single
/// result, and overall_by_extractor averages those when there are at least two.
inline void compute_overall(EvaluationReport& report,
                            const std::map<std::string, std::vector<std::string>>& layer_inclusion = {}) {
    report.overall_by_extractor.reset();
    report.overall_by_layer.clear();

    std::map<std::string, std::vector<MetricResult>> by_extractor;
    for (const auto& r : report.results) {
        if (r.metric != MetricKind::cka) {
            continue;
        }
        if (auto it = layer_inclusion.find(r.extractor_id); it != layer_inclusion.end()) {
            if (std::find(it->second.begin(), it->second.end(), r.layer_id) == it->second.end()) {
                continue;
            }
        }
        by_extractor[r.extractor_id].push_back(r);
    }

    std::vector<MetricResult> per_extractor;
    for (const auto& [extractor, layers] : by_extractor) {
        MetricResult summary;
        summary.metric = MetricKind::cka;
        summary.extractor_id = extractor;
        if (layers.size() >= 2) {
            summary.value = overall_score(layers);
            report.overall_by_layer[extractor] = summary.value;
        } else {
            summary.value = layers.front().value;
        }
        per_extractor.push_back(summary);
    }
    if (per_extractor.size() >= 2) {
        report.overall_by_extractor = overall_score(per_extractor);
    }
}

/// Pairwise CKA between feature sets of the same probe images under
/// different extractors (rows aligned by index).
struct SimilarityMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
};

/// Each extractor's RBF bandwidth comes from its own features (the spaces
/// differ in dimension and scale), so an entry does not depend on which
/// other extractors are present.
inline SimilarityMatrix cross_extractor_similarity(const std::map<std::string, FeatureMatrix>& features,
                                                   const KernelSpec& k, NormalizationSpec norm = {},
                                                   std::uint64_t seed = 0, const CkaOptions& opts = {}) {
    k.validate();
    if (features.size() < 2) {
        throw Error(ErrorKind::EmptyInput, "cross-extractor similarity needs at least two extractors");
    }
    const std::size_t n = features.begin()->second.rows();
    for (const auto& [id, f] : features) {
        if (f.rows() != n) {
            throw Error(ErrorKind::SampleCountMismatch, "extractor '" + id + "' has " + std::to_string(f.rows()) +
                                                            " samples, expected " + std::to_string(n));
        }
    }
    // Same (n, m, seed) selects the same rows everywhere, so capping keeps
    // the sets aligned.
    const std::size_t m = (k.kind != KernelKind::linear && n > opts.max_samples) ? opts.max_samples : n;

    SimilarityMatrix out;
    std::vector<FeatureMatrix> prepared;
    std::vector<std::optional<double>> sigmas;
    for (const auto& [id, f] : features) {
        out.ids.push_back(id);
        FeatureMatrix z = normalize(f, norm);
        if (m != n) {
            z = subsample(z, m, seed);
        }
        std::optional<double> sigma;
        if (k.kind == KernelKind::rbf) {
            sigma = k.bandwidth_override ? *k.bandwidth_override
                                         : k.bandwidth_fraction * median_heuristic(z, opts.median_cap, seed, opts.compute);
        }
        prepared.push_back(std::move(z));
        sigmas.push_back(sigma);
    }

    const std::size_t e = prepared.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < e; ++i) {
        for (std::size_t j = i; j < e; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(e));
    ComputeOptions inner = opts.compute;
    inner.threads = 1;
    parallel_for(pairs.size(), opts.compute.threads, [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        const auto t = k.kind == KernelKind::linear
                           ? detail::hsic_triple_linear(prepared[i], prepared[j])
                           : detail::hsic_triple_gram(prepared[i], prepared[j], k, sigmas[i], sigmas[j], inner);
        const double v = detail::cka_from_triple(t);
        out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Display

/// Rounds a decimal rendering of `value` to two places, ties away from zero.
/// The value is first printed with 10 decimals so binary noise such as
/// 81.36499999999998 rounds like the decimal 81.365 it stands for.
inline std::string format_fixed2(double value) {
    if (!std::isfinite(value)) {
        return value != value ? "nan" : (value > 0 ? "inf" : "-inf");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", std::abs(value));
    std::string digits(buf);
    const auto dot = digits.find('.');
    std::string kept = digits.substr(0, dot) + digits.substr(dot + 1, 2);
    const bool round_up = digits[dot + 3] >= '5';
    if (round_up) {
        int i = static_cast<int>(kept.size()) - 1;
        while (i >= 0) {
            if (kept[static_cast<std::size_t>(i)] == '9') {
                kept[static_cast<std::size_t>(i)] = '0';
                --i;
            } else {
                ++kept[static_cast<std::size_t>(i)];
                break;
            }
        }
        if (i < 0) {
            kept.insert(kept.begin(), '1');
        }
    }
    std::string out = kept.substr(0, kept.size() - 2) + "." + kept.substr(kept.size() - 2);
    const bool is_zero = out.find_first_not_of("0.") == std::string::npos;
    if (value < 0 && !is_zero) {
        out.insert(out.begin(), '-');
    }
    return out;
}

/// CKA on the 0-100 scale used in printed tables.
inline std::string format_percent(double cka_value) { return format_fixed2(cka_value * 100.0); }

inline std::string format_value(const MetricResult& r) {
    return r.metric == MetricKind::cka ? format_percent(r.value) : format_fixed2(r.value);
}

// ---------------------------------------------------------------------------
// JSON

inline Json kernel_to_json(const KernelSpec& k) {
    Json j;
    j["kind"] = to_string(k.kind);
    j["degree"] = k.degree;
    j["coef"] = k.coef;
    j["bandwidth_fraction"] = k.bandwidth_fraction;
    j["bandwidth_override"] = k.bandwidth_override ? Json(*k.bandwidth_override) : Json(nullptr);
    return j;
}

template <typename J>
KernelSpec kernel_from_json(const J& j, ErrorKind kind = ErrorKind::InvalidReport) {
    detail::reject_unknown_fields(j, {"kind", "degree", "coef", "bandwidth_fraction", "bandwidth_override"}, kind,
                                  "kernel");
    KernelSpec k;
    try {
        k.kind = parse_kernel_kind(detail::required<std::string>(j, "kind", kind, "kernel"));
    } catch (const Error& e) {
        throw Error(kind, e.what());
    }
    if (j.contains("degree")) k.degree = detail::required<int>(j, "degree", kind, "kernel");
    if (j.contains("coef")) k.coef = detail::required<double>(j, "coef", kind, "kernel");
    if (j.contains("bandwidth_fraction")) {
        k.bandwidth_fraction = detail::required<double>(j, "bandwidth_fraction", kind, "kernel");
    }
    if (j.contains("bandwidth_override") && !j.at("bandwidth_override").is_null()) {
        k.bandwidth_override = detail::required<double>(j, "bandwidth_override", kind, "kernel");
    }
    try {
        k.validate();
    } catch (const Error& e) {
        throw Error(kind, e.what());
    }
    return k;
}

inline Json to_json(const MetricResult& r) {
    Json j;
    j["metric"] = to_string(r.metric);
    j["value"] = r.value;
    j["extractor_id"] = r.extractor_id;
    j["layer_id"] = r.layer_id;
    j["kernel"] = r.kernel ? kernel_to_json(*r.kernel) : Json(nullptr);
    j["normalization"] = to_string(r.normalization.kind);
    j["n_real"] = r.n_real;
    j["n_syn"] = r.n_syn;
    j["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
    j["bandwidth_used"] = r.bandwidth_used ? Json(*r.bandwidth_used) : Json(nullptr);
    j["warnings"] = r.warnings;
    return j;
}

template <typename J>
MetricResult metric_result_from_json(const J& j) {
    constexpr auto kind = ErrorKind::InvalidReport;
    const std::string what = "result";
    detail::reject_unknown_fields(j, {"metric", "value", "extractor_id", "layer_id", "kernel", "normalization", "n_real",
                                      "n_syn", "seed", "bandwidth_used", "warnings"},
                                  kind, what);
    MetricResult r;
    try {
        r.metric = parse_metric(detail::required<std::string>(j, "metric", kind, what));
        r.normalization.kind = parse_normalization(detail::required<std::string>(j, "normalization", kind, what));
    } catch (const Error& e) {
        throw Error(kind, e.what());
    }
    r.value = detail::required<double>(j, "value", kind, what);
    r.extractor_id = detail::required<std::string>(j, "extractor_id", kind, what);
    r.layer_id = detail::required<std::string>(j, "layer_id", kind, what);
    if (j.contains("kernel") && !j.at("kernel").is_null()) {
        r.kernel = kernel_from_json(j.at("kernel"));
    }
    r.n_real = detail::required<std::size_t>(j, "n_real", kind, what);
    r.n_syn = detail::required<std::size_t>(j, "n_syn", kind, what);
    if (j.contains("seed") && !j.at("seed").is_null()) {
        r.seed = detail::required<std::uint64_t>(j, "seed", kind, what);
    }
    if (j.contains("bandwidth_used") && !j.at("bandwidth_used").is_null()) {
        r.bandwidth_used = detail::required<double>(j, "bandwidth_used", kind, what);
    }
    if (j.contains("warnings")) {
        r.warnings = detail::required<std::vector<std::string>>(j, "warnings", kind, what);
    }
    if (r.metric == MetricKind::fd && r.value < 0.0) {
        throw Error(kind, "fd value must be >= 0");
    }
    if (r.metric == MetricKind::cka && (r.value < 0.0 || r.value > 1.0 + 1e-9)) {
        throw Error(kind, "cka value must lie in [0, 1]");
    }
    return r;
}

inline Json to_json(const EvaluationReport& report) {
    Json j;
    j["model_id"] = report.model_id;
    j["config_digest"] = report.config_digest;
    j["results"] = Json::array();
    for (const auto& r : report.results) {
        j["results"].push_back(to_json(r));
    }
    Json overall;
    overall["by_extractor"] = report.overall_by_extractor ? Json(*report.overall_by_extractor) : Json(nullptr);
    overall["by_layer"] = Json::object();
    for (const auto& [extractor, value] : report.overall_by_layer) {
        overall["by_layer"][extractor] = value;
    }
    j["overall"] = overall;
    if (report.experiment) {
        j["experiment"] = *report.experiment;
    }
    return j;
}

inline EvaluationReport report_from_json(const Json& j) {
    constexpr auto kind = ErrorKind::InvalidReport;
    detail::reject_unknown_fields(j, {"model_id", "config_digest", "results", "overall", "experiment"}, kind, "report");
    EvaluationReport report;
    report.model_id = detail::required<std::string>(j, "model_id", kind, "report");
    report.config_digest = detail::required<std::string>(j, "config_digest", kind, "report");
    if (!j.contains("results") || !j.at("results").is_array()) {
        throw Error(kind, "report: 'results' must be an array");
    }
    for (const auto& r : j.at("results")) {
        report.results.push_back(metric_result_from_json(r));
    }
    if (!j.contains("overall")) {
        throw Error(kind, "report: missing field 'overall'");
    }
    const auto& overall = j.at("overall");
    detail::reject_unknown_fields(overall, {"by_extractor", "by_layer"}, kind, "overall");
    if (overall.contains("by_extractor") && !overall.at("by_extractor").is_null()) {
        report.overall_by_extractor = detail::required<double>(overall, "by_extractor", kind, "overall");
    }
    if (overall.contains("by_layer")) {
        report.overall_by_layer = detail::required<std::map<std::string, double>>(overall, "by_layer", kind, "overall");
    }
    if (j.contains("experiment")) {
        const auto& exp = j.at("experiment");
        detail::reject_unknown_fields(exp, {"kind", "parameters", "shortages", "variation", "cells"}, kind,
                                      "experiment");
        report.experiment = exp;
    }
    return report;
}

inline EvaluationReport parse_report(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidReport, e.what());
    }
    return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Rendering

enum class ReportFormat { json, csv, table };

inline ReportFormat parse_format(std::string_view name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    if (name == "table") return ReportFormat::table;
    throw Error(ErrorKind::InvalidRecipe, "unknown report format '" + std::string(name) + "'");
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

inline std::string format_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace detail

inline std::string render_json(const EvaluationReport& report) { return to_json(report).dump(2) + "\n"; }

inline std::string render_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "model_id,extractor_id,layer_id,metric,value,n_real,n_syn,kernel,bandwidth,normalization,seed\n";
    for (const auto& r : report.results) {
        out << detail::csv_field(report.model_id) << ',' << detail::csv_field(r.extractor_id) << ','
            << detail::csv_field(r.layer_id) << ',' << to_string(r.metric) << ',' << format_value(r) << ','
            << r.n_real << ',' << r.n_syn << ',' << (r.kernel ? detail::csv_field(describe(*r.kernel)) : "") << ','
            << (r.bandwidth_used ? detail::format_g(*r.bandwidth_used) : "") << ','
            << to_string(r.normalization.kind) << ',' << (r.seed ? std::to_string(*r.seed) : "") << '\n';
    }
    return out.str();
}

inline std::string render_table(const EvaluationReport& report) {
    std::vector<std::array<std::string, 4>> rows;
    rows.push_back({"extractor", "layer", "metric", "value"});
    for (const auto& r : report.results) {
        rows.push_back({r.extractor_id, r.layer_id, std::string(r.metric == MetricKind::cka ? "CKA" : "FD"),
                        format_value(r)});
    }
    for (const auto& [extractor, value] : report.overall_by_layer) {
        rows.push_back({extractor, "Overall", "CKA", format_percent(value)});
    }
    if (report.overall_by_extractor) {
        rows.push_back({"Overall", "", "CKA", format_percent(*report.overall_by_extractor)});
    }
    std::array<std::size_t, 4> width{};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < 4; ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    std::ostringstream out;
    out << "model: " << report.model_id << "  (config " << report.config_digest << ")\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::string line;
        for (std::size_t c = 0; c < 4; ++c) {
            const auto& cell = rows[i][c];
            const std::string pad(width[c] - cell.size(), ' ');
            line += c == 3 ? pad + cell : cell + pad + "  ";
        }
        out << line << '\n';
        if (i == 0) {
            out << std::string(line.size(), '-') << '\n';
        }
    }
    for (const auto& r : report.results) {
        for (const auto& w : r.warnings) {
            out << r.extractor_id << '/' << r.layer_id << ": " << w << '\n';
        }
    }
    if (report.experiment && report.experiment->contains("cells")) {
        const auto& exp = *report.experiment;
        out << '\n' << exp.value("kind", std::string("experiment")) << ":\n";
        for (const auto& cell : exp.at("cells")) {
            out << "  " << cell.value("extractor_id", std::string()) << '/' << cell.value("layer_id", std::string())
                << ' ' << cell.value("metric", std::string());
            for (const auto& [key, v] : cell.items()) {
                if (v.is_number()) {
                    out << "  " << key << '=' << detail::format_g(v.template get<double>());
                } else if (v.is_array()) {
                    out << "  " << key << '=';
                    for (std::size_t i = 0; i < v.size(); ++i) {
                        out << (i ? "," : "") << detail::format_g(v[i].template get<double>());
                    }
                }
            }
            out << '\n';
        }
    }
    return out.str();
}

inline std::string render_report(const EvaluationReport& report, ReportFormat format) {
    switch (format) {
    case ReportFormat::json: return render_json(report);
    case ReportFormat::csv: return render_csv(report);
    case ReportFormat::table: return render_table(report);
    }
    return render_json(report);
}

} // namespace featdist
