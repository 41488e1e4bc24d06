#pragma once

#include "binn/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

namespace binn::io {

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
}

}  // namespace detail

// Raw little-endian f64 stream.
inline void write_f64(std::ostream& os, const double* data, std::size_t count) {
    std::vector<char> buf(count * 8);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t u = detail::to_le(std::bit_cast<std::uint64_t>(data[i]));
        std::memcpy(buf.data() + 8 * i, &u, 8);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!os) throw Error("write failed");
}

inline void read_f64(std::istream& is, double* data, std::size_t count) {
    std::vector<char> buf(count * 8);
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw Error("binary file truncated");
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t u;
        std::memcpy(&u, buf.data() + 8 * i, 8);
        data[i] = std::bit_cast<double>(detail::to_le(u));
    }
}

inline void write_f64_file(const std::filesystem::path& p, const std::vector<double>& v) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    write_f64(os, v.data(), v.size());
}

inline std::vector<double> read_f64_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary | std::ios::ate);
    if (!is) throw Error("cannot open " + p.string());
    auto size = static_cast<std::size_t>(is.tellg());
    if (size % 8 != 0) throw Error(p.string() + ": size is not a multiple of 8 bytes");
    is.seekg(0);
    std::vector<double> v(size / 8);
    read_f64(is, v.data(), v.size());
    return v;
}

// Row-major matrix blob.
inline std::vector<double> row_major(const Mat& M) {
    std::vector<double> v(static_cast<std::size_t>(M.size()));
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) v[static_cast<std::size_t>(i * M.cols() + j)] = M(i, j);
    return v;
}

inline Mat from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    require(static_cast<Eigen::Index>(v.size()) == rows * cols, "matrix blob has wrong size");
    Mat M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    return M;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw Error("cannot open " + p.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw Error(p.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream os(p);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    os << j.dump(2) << '\n';
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    os << s;
}

// Sibling path for the binary half of a manifest pair: foo.json -> foo.bin
inline std::filesystem::path blob_path(const std::filesystem::path& manifest) {
    auto p = manifest;
    p.replace_extension(".bin");
    return p;
}

}  // namespace binn::io
