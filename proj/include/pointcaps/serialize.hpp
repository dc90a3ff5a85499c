#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pointcaps/errors.hpp"
#include "pointcaps/tensor.hpp"

// Binary tensor and checkpoint formats. All integers and floats are
// little-endian. A tensor blob is:
//
//   u64 rank, u64 extent[rank], f32 data[numel]
//
// Tensors are stored at 32-bit regardless of the in-memory precision. A
// checkpoint is a container of named blobs:
//
//   "PCHK" | u32 version=1 | u64 config_hash | u32 count
//   count * { u32 name_len | name bytes | tensor blob }

namespace pointcaps {

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::istream& is, const std::string& what) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw ParseError("unexpected end of file while reading " + what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace detail

// FNV-1a over bytes; used to fingerprint configs.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class S>
void write_tensor_blob(std::ostream& os, const Tensor<S>& t) {
    detail::write_le<std::uint64_t>(os, t.rank());
    for (std::size_t d : t.shape()) detail::write_le<std::uint64_t>(os, d);
    for (S v : t.data()) detail::write_le<float>(os, static_cast<float>(v));
}

template <class S>
Tensor<S> read_tensor_blob(std::istream& is) {
    const auto rank = detail::read_le<std::uint64_t>(is, "tensor rank");
    if (rank > 8) throw ParseError("tensor blob: implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = detail::read_le<std::uint64_t>(is, "tensor extent");
    std::vector<S> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<S>(detail::read_le<float>(is, "tensor data"));
    return Tensor<S>::from(std::move(shape), std::move(data));
}

struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::uint64_t config_hash = 0;
    std::vector<CheckpointEntry> entries;  // kept in write order

    const CheckpointEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

template <class S>
void checkpoint_add(Checkpoint& ck, const std::string& name, const Tensor<S>& t) {
    CheckpointEntry e;
    e.name = name;
    e.shape = t.shape();
    e.data.reserve(t.size());
    for (S v : t.data()) e.data.push_back(static_cast<float>(v));
    ck.entries.push_back(std::move(e));
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    os.write("PCHK", 4);
    detail::write_le<std::uint32_t>(os, 1);
    detail::write_le<std::uint64_t>(os, ck.config_hash);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ck.entries.size()));
    for (const auto& e : ck.entries) {
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::write_le<std::uint64_t>(os, e.shape.size());
        for (std::size_t d : e.shape) detail::write_le<std::uint64_t>(os, d);
        for (float v : e.data) detail::write_le<float>(os, v);
    }
    if (!os) throw Error("write failure on " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open checkpoint " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "PCHK")
        throw LoadError(path + ": not a checkpoint file (bad magic)");
    const auto version = detail::read_le<std::uint32_t>(is, "checkpoint version");
    if (version != 1) throw LoadError(path + ": unsupported checkpoint version");
    Checkpoint ck;
    ck.config_hash = detail::read_le<std::uint64_t>(is, "config hash");
    const auto count = detail::read_le<std::uint32_t>(is, "entry count");
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const auto name_len = detail::read_le<std::uint32_t>(is, "entry name length");
        e.name.resize(name_len);
        is.read(e.name.data(), name_len);
        if (!is) throw ParseError(path + ": truncated entry name");
        const auto rank = detail::read_le<std::uint64_t>(is, "entry rank");
        e.shape.resize(rank);
        for (auto& d : e.shape) d = detail::read_le<std::uint64_t>(is, "entry extent");
        e.data.resize(shape_numel(e.shape));
        for (auto& v : e.data) v = detail::read_le<float>(is, "entry data");
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

}  // namespace pointcaps
