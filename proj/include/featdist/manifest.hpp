#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "featdist/error.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/npy.hpp"

namespace featdist {

enum class FeatureDType { float32, float64 };

/// Describes one (dataset, extractor, layer) feature file on disk.
struct FeatureManifest {
    std::string dataset_id;
    std::string extractor_id;
    std::string layer_id;
    std::size_t n = 0;
    std::size_t d = 0;
    FeatureDType dtype = FeatureDType::float64;
    std::filesystem::path path;             // as written in the manifest
    std::optional<std::int64_t> source_seed;
    std::filesystem::path base_dir;         // directory of the manifest file; not serialized

    std::filesystem::path resolved_path() const {
        return path.is_absolute() ? path : base_dir / path;
    }

    auto key() const { return std::tie(dataset_id, extractor_id, layer_id); }
};

inline std::string_view to_string(FeatureDType t) {
    return t == FeatureDType::float32 ? "float32" : "float64";
}

inline nlohmann::ordered_json to_json(const FeatureManifest& m) {
    nlohmann::ordered_json j;
    j["dataset_id"] = m.dataset_id;
    j["extractor_id"] = m.extractor_id;
    j["layer_id"] = m.layer_id;
    j["n"] = m.n;
    j["d"] = m.d;
    j["dtype"] = to_string(m.dtype);
    j["path"] = m.path.generic_string();
    if (m.source_seed) {
        j["source_seed"] = *m.source_seed;
    }
    return j;
}

namespace detail {

template <typename Json>
void reject_unknown_fields(const Json& j, std::initializer_list<std::string_view> allowed, ErrorKind kind,
                           const std::string& what) {
    if (!j.is_object()) {
        throw Error(kind, what + " must be a JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (auto a : allowed) {
            known = known || it.key() == a;
        }
        if (!known) {
            throw Error(kind, what + ": unknown field '" + it.key() + "'");
        }
    }
}

template <typename T, typename Json>
T required(const Json& j, const char* field, ErrorKind kind, const std::string& what) {
    if (!j.contains(field)) {
        throw Error(kind, what + ": missing field '" + field + "'");
    }
    try {
        return j.at(field).template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(kind, what + ": field '" + std::string(field) + "' has the wrong type");
    }
}

} // namespace detail

template <typename J>
FeatureManifest manifest_from_json(const J& j, const std::filesystem::path& base_dir = {}) {
    const std::string what = "manifest";
    constexpr auto kind = ErrorKind::InvalidManifest;
    detail::reject_unknown_fields(j, {"dataset_id", "extractor_id", "layer_id", "n", "d", "dtype", "path", "source_seed"},
                                  kind, what);
    FeatureManifest m;
    m.dataset_id = detail::required<std::string>(j, "dataset_id", kind, what);
    m.extractor_id = detail::required<std::string>(j, "extractor_id", kind, what);
    m.layer_id = detail::required<std::string>(j, "layer_id", kind, what);
    m.n = detail::required<std::size_t>(j, "n", kind, what);
    m.d = detail::required<std::size_t>(j, "d", kind, what);
    const auto dtype = detail::required<std::string>(j, "dtype", kind, what);
    if (dtype == "float32") {
        m.dtype = FeatureDType::float32;
    } else if (dtype == "float64") {
        m.dtype = FeatureDType::float64;
    } else {
        throw Error(kind, what + ": dtype must be float32 or float64, got '" + dtype + "'");
    }
    m.path = detail::required<std::string>(j, "path", kind, what);
    if (j.contains("source_seed") && !j.at("source_seed").is_null()) {
        m.source_seed = detail::required<std::int64_t>(j, "source_seed", kind, what);
    }
    m.base_dir = base_dir;
    return m;
}

inline FeatureManifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open manifest " + file.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidManifest, file.string() + ": " + e.what());
    }
    return manifest_from_json(j, file.parent_path());
}

inline void write_manifest(const FeatureManifest& m, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::MissingFile, "cannot write manifest " + file.string());
    }
    out << to_json(m).dump(2) << '\n';
}

/// Throws InvalidManifest if two manifests share a (dataset, extractor, layer).
inline void check_unique(const std::vector<FeatureManifest>& manifests) {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& m : manifests) {
        if (!seen.emplace(m.dataset_id, m.extractor_id, m.layer_id).second) {
            throw Error(ErrorKind::InvalidManifest, "duplicate manifest for (" + m.dataset_id + ", " +
                                                        m.extractor_id + ", " + m.layer_id + ")");
        }
    }
}

inline FeatureMatrix load_features(const FeatureManifest& manifest) {
    const auto file = manifest.resolved_path();
    const npy::Header header = npy::read_header(file);
    const auto expected_dtype = manifest.dtype == FeatureDType::float32 ? npy::DType::float32 : npy::DType::float64;
    if (header.shape.size() != 2 || header.shape[0] != manifest.n || header.shape[1] != manifest.d ||
        header.dtype != expected_dtype) {
        std::ostringstream msg;
        msg << file.string() << ": header (";
        for (std::size_t i = 0; i < header.shape.size(); ++i) {
            msg << (i ? ", " : "") << header.shape[i];
        }
        msg << ") " << npy::descr(header.dtype) << " does not match manifest (" << manifest.n << ", " << manifest.d
            << ") " << to_string(manifest.dtype);
        throw Error(ErrorKind::ShapeMismatch, msg.str());
    }
    const auto array = npy::load<double>(file);
    RowMatrix values(static_cast<Eigen::Index>(manifest.n), static_cast<Eigen::Index>(manifest.d));
    for (std::size_t i = 0; i < manifest.n; ++i) {
        for (std::size_t j = 0; j < manifest.d; ++j) {
            const double v = array.data[i * manifest.d + j];
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::NonFiniteValue, file.string() + ": non-finite value in row " + std::to_string(i),
                            i);
            }
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return FeatureMatrix(std::move(values));
}

/// Writes x as a float64 NPY file next to a manifest describing it.
inline FeatureManifest save_features(const FeatureMatrix& x, const std::filesystem::path& npy_file,
                                     const std::string& dataset_id, const std::string& extractor_id,
                                     const std::string& layer_id, std::optional<std::int64_t> source_seed = {}) {
    const auto& v = x.values();
    std::vector<double> flat(v.data(), v.data() + v.size());
    npy::save(npy_file, npy::DType::float64, {x.rows(), x.cols()}, flat);
    FeatureManifest m;
    m.dataset_id = dataset_id;
    m.extractor_id = extractor_id;
    m.layer_id = layer_id;
    m.n = x.rows();
    m.d = x.cols();
    m.dtype = FeatureDType::float64;
    m.path = npy_file.filename();
    m.source_seed = source_seed;
    m.base_dir = npy_file.parent_path();
    return m;
}

/// Label file paired with a feature file: "<features>.labels.npy".
inline std::filesystem::path labels_path_for(const std::filesystem::path& features_file) {
    return std::filesystem::path(features_file.string() + ".labels.npy");
}

inline std::vector<std::int64_t> load_labels(const std::filesystem::path& file) {
    const auto array = npy::load<std::int64_t>(file);
    if (array.shape.size() != 1) {
        throw Error(ErrorKind::ShapeMismatch, file.string() + ": label file must be one-dimensional");
    }
    if (array.stored == npy::DType::float32 || array.stored == npy::DType::float64) {
        throw Error(ErrorKind::ShapeMismatch, file.string() + ": label file must hold integers");
    }
    return array.data;
}

inline void save_labels(const std::filesystem::path& file, const std::vector<std::int64_t>& labels) {
    npy::save(file, npy::DType::int64, {labels.size()}, labels);
}

} // namespace featdist
