#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/fileio.hpp"
#include "kgqa/model.hpp"

namespace kgqa::nn {

inline constexpr char kArchiveMagic[4] = {'K', 'G', 'Q', 'A'};
inline constexpr std::uint32_t kArchiveVersion = 1;

/// One named fp32 tensor, row-major.
struct Tensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

template <typename U>
void put_le(std::ostream& out, U value) {
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) fail(ErrorKind::format, "truncated archive while reading {}", what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
    return value;
}

}  // namespace detail

inline void write_tensors(std::ostream& out, const std::vector<Tensor>& tensors) {
    out.write(kArchiveMagic, 4);
    detail::put_le<std::uint32_t>(out, kArchiveVersion);
    detail::put_le<std::uint64_t>(out, tensors.size());
    for (const auto& t : tensors) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) detail::put_le<std::uint64_t>(out, d);
        for (float v : t.data) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
}

inline std::vector<Tensor> read_tensors(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4)) fail(ErrorKind::format, "truncated archive: missing magic");
    if (std::memcmp(magic, kArchiveMagic, 4) != 0) fail(ErrorKind::format, "bad archive magic (expected KGQA)");
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != kArchiveVersion) fail(ErrorKind::format, "unsupported archive version {}", version);
    const auto count = detail::get_le<std::uint64_t>(in, "tensor count");
    std::vector<Tensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        Tensor t;
        const auto name_len = detail::get_le<std::uint32_t>(in, "name length");
        t.name.resize(name_len);
        if (!in.read(t.name.data(), name_len)) fail(ErrorKind::format, "truncated archive in tensor name");
        const auto rank = detail::get_le<std::uint32_t>(in, "rank");
        if (rank > 8) fail(ErrorKind::format, "tensor '{}' has implausible rank {}", t.name, rank);
        for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(detail::get_le<std::uint64_t>(in, "dims"));
        const auto n = t.element_count();
        if (n > (std::uint64_t{1} << 34)) fail(ErrorKind::format, "tensor '{}' too large", t.name);
        t.data.resize(n);
        for (std::uint64_t k = 0; k < n; ++k) {
            t.data[k] = std::bit_cast<float>(detail::get_le<std::uint32_t>(in, t.name.c_str()));
        }
        out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
std::vector<Tensor> to_tensors(const Model<T>& model, const std::string& prefix = "") {
    std::vector<Tensor> out;
    model.for_each_tensor([&](const std::string& name, const Mat<T>& m, int rank) {
        Tensor t;
        t.name = prefix + name;
        if (rank == 1) {
            t.dims = {static_cast<std::uint64_t>(m.size())};
        } else {
            t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
        }
        t.data.resize(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
        out.push_back(std::move(t));
    });
    return out;
}

/// Fills a config-shaped model from tensors. Rejects unknown names, missing
/// names and shape mismatches, naming the offending tensors.
template <typename T>
Model<T> from_tensors(const std::vector<Tensor>& tensors, const ModelConfig& config, const std::string& prefix = "") {
    Model<T> model = Model<T>::zeros(config);
    std::map<std::string, const Tensor*> by_name;
    for (const auto& t : tensors) {
        if (!by_name.emplace(t.name, &t).second) fail(ErrorKind::format, "duplicate tensor '{}'", t.name);
    }
    std::vector<std::string> missing;
    model.for_each_tensor([&](const std::string& name, Mat<T>& m, int rank) {
        auto it = by_name.find(prefix + name);
        if (it == by_name.end()) {
            missing.push_back(prefix + name);
            return;
        }
        const Tensor& t = *it->second;
        std::vector<std::uint64_t> expected;
        if (rank == 1) {
            expected = {static_cast<std::uint64_t>(m.size())};
        } else {
            expected = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
        }
        if (t.dims != expected) {
            std::string got, want;
            for (auto d : t.dims) got += (got.empty() ? "" : "x") + std::to_string(d);
            for (auto d : expected) want += (want.empty() ? "" : "x") + std::to_string(d);
            fail(ErrorKind::dimension, "tensor '{}' has shape {} but the config expects {}", t.name, got, want);
        }
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(t.data[static_cast<std::size_t>(i)]);
        by_name.erase(it);
    });
    if (!missing.empty()) {
        std::string list;
        for (const auto& n : missing) list += (list.empty() ? "" : ", ") + n;
        fail(ErrorKind::format, "archive is missing tensors: {}", list);
    }
    if (!by_name.empty()) {
        std::string list;
        for (const auto& [n, _] : by_name) list += (list.empty() ? "" : ", ") + n;
        fail(ErrorKind::format, "archive has unknown tensors: {}", list);
    }
    return model;
}

template <typename T>
void save_weights(const Model<T>& model, const std::filesystem::path& path) {
    const auto tensors = to_tensors(model);
    write_file_atomic(path, [&](std::ostream& out) { write_tensors(out, tensors); });
}

template <typename T = float>
Model<T> load_weights(const std::filesystem::path& path, const ModelConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open weights {}", path.string());
    return from_tensors<T>(read_tensors(in), config);
}

}  // namespace kgqa::nn
