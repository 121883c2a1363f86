#pragma once

// Minimal NPY reader/writer: little-endian, C-order, 1-D or 2-D arrays of
// float32/float64/int32/int64. Writes format version 1.0.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "featdist/error.hpp"

namespace featdist::npy {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

enum class DType { float32, float64, int32, int64 };

inline std::string descr(DType t) {
    switch (t) {
    case DType::float32: return "<f4";
    case DType::float64: return "<f8";
    case DType::int32: return "<i4";
    case DType::int64: return "<i8";
    }
    return "<f8";
}

inline std::size_t item_size(DType t) {
    return (t == DType::float32 || t == DType::int32) ? 4 : 8;
}

struct Header {
    DType dtype = DType::float64;
    std::vector<std::size_t> shape;
    std::size_t data_offset = 0;
};

namespace detail {

inline DType parse_descr(const std::string& d, const std::filesystem::path& path) {
    if (d == "<f4") return DType::float32;
    if (d == "<f8") return DType::float64;
    if (d == "<i4") return DType::int32;
    if (d == "<i8") return DType::int64;
    throw Error(ErrorKind::ShapeMismatch, path.string() + ": unsupported dtype '" + d + "'");
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace detail

inline Header parse_header(const std::vector<char>& bytes, const std::filesystem::path& path) {
    static constexpr char kMagic[] = "\x93NUMPY";
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": not an NPY file");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t prefix = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
        prefix = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) {
            throw Error(ErrorKind::ShapeMismatch, path.string() + ": truncated NPY header");
        }
        std::uint32_t len = 0;
        std::memcpy(&len, bytes.data() + 8, 4);
        header_len = len;
        prefix = 12;
    } else {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": unsupported NPY version");
    }
    if (bytes.size() < prefix + header_len) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": truncated NPY header");
    }
    const std::string dict(bytes.data() + prefix, header_len);

    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch m;
    Header h;
    if (!std::regex_search(dict, m, descr_re)) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": NPY header lacks descr");
    }
    h.dtype = detail::parse_descr(m[1].str(), path);
    if (!std::regex_search(dict, m, order_re)) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": NPY header lacks fortran_order");
    }
    if (m[1].str() == "True") {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": Fortran-ordered arrays are not supported");
    }
    if (!std::regex_search(dict, m, shape_re)) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": NPY header lacks shape");
    }
    static const std::regex dim_re(R"(\d+)");
    const std::string dims = m[1].str();
    for (auto it = std::sregex_iterator(dims.begin(), dims.end(), dim_re); it != std::sregex_iterator(); ++it) {
        h.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
    }
    h.data_offset = prefix + header_len;

    std::size_t count = 1;
    for (auto s : h.shape) {
        count *= s;
    }
    if (bytes.size() < h.data_offset + count * item_size(h.dtype)) {
        throw Error(ErrorKind::ShapeMismatch, path.string() + ": data shorter than header shape");
    }
    return h;
}

template <typename T>
struct Array {
    std::vector<std::size_t> shape;
    DType stored = DType::float64;
    std::vector<T> data;
};

/// Reads an array and widens/converts every element to T.
template <typename T>
Array<T> load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::MissingFile, "no such file: " + path.string());
    }
    const auto bytes = detail::read_file(path);
    const Header h = parse_header(bytes, path);
    std::size_t count = 1;
    for (auto s : h.shape) {
        count *= s;
    }
    Array<T> out{h.shape, h.dtype, std::vector<T>(count)};
    const char* src = bytes.data() + h.data_offset;
    for (std::size_t i = 0; i < count; ++i) {
        switch (h.dtype) {
        case DType::float32: {
            float v;
            std::memcpy(&v, src + 4 * i, 4);
            out.data[i] = static_cast<T>(v);
            break;
        }
        case DType::float64: {
            double v;
            std::memcpy(&v, src + 8 * i, 8);
            out.data[i] = static_cast<T>(v);
            break;
        }
        case DType::int32: {
            std::int32_t v;
            std::memcpy(&v, src + 4 * i, 4);
            out.data[i] = static_cast<T>(v);
            break;
        }
        case DType::int64: {
            std::int64_t v;
            std::memcpy(&v, src + 8 * i, 8);
            out.data[i] = static_cast<T>(v);
            break;
        }
        }
    }
    return out;
}

inline Header read_header(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::MissingFile, "no such file: " + path.string());
    }
    return parse_header(detail::read_file(path), path);
}

/// Writes raw little-endian elements with a v1.0 header padded to 64 bytes.
template <typename T>
void save(const std::filesystem::path& path, DType dtype, const std::vector<std::size_t>& shape,
          const std::vector<T>& values) {
    static_assert(std::is_arithmetic_v<T>);
    std::string shape_str = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        shape_str += std::to_string(shape[i]);
        shape_str += (shape.size() == 1 || i + 1 < shape.size()) ? "," : "";
        if (i + 1 < shape.size()) {
            shape_str += " ";
        }
    }
    shape_str += ")";
    std::string dict = "{'descr': '" + descr(dtype) + "', 'fortran_order': False, 'shape': " + shape_str + ", }";
    const std::size_t unpadded = 10 + dict.size() + 1;
    dict.append((64 - unpadded % 64) % 64, ' ');
    dict.push_back('\n');

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::MissingFile, "cannot write " + path.string());
    }
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(dict.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    for (const T& v : values) {
        switch (dtype) {
        case DType::float32: {
            const auto f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
            break;
        }
        case DType::float64: {
            const auto f = static_cast<double>(v);
            out.write(reinterpret_cast<const char*>(&f), 8);
            break;
        }
        case DType::int32: {
            const auto f = static_cast<std::int32_t>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
            break;
        }
        case DType::int64: {
            const auto f = static_cast<std::int64_t>(v);
            out.write(reinterpret_cast<const char*>(&f), 8);
            break;
        }
        }
    }
    if (!out) {
        throw Error(ErrorKind::MissingFile, "failed writing " + path.string());
    }
}

} // namespace featdist::npy
