#pragma once

#include <cstring>
#include <map>

#include <json.hpp>

#include "drcb/io.hpp"
#include "drcb/tensor.hpp"

namespace drcb {

using json = nlohmann::json;

// Checkpoint layout:
//   bytes 0..7   magic "DRCBv001"
//   bytes 8..15  little-endian u64: JSON header length in bytes
//   header       UTF-8 JSON {"tensors":[{name,shape,offset}...], "meta":{...}}
//                offset counts f64 elements from the start of the payload
//   payload      little-endian f64 values, in header order
//
// Written on little-endian hosts; the explicit byte packing below keeps the
// format well defined regardless.

inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'C', 'B', 'v', '0', '0', '1'};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline void put_f64_le(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64_le(out, bits);
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = get_u64_le(p);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void save_checkpoint(const std::string& path, const NamedTensors& tensors, const json& meta) {
    json header;
    header["tensors"] = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += t.numel();
    }
    header["meta"] = meta;
    std::string hj = header.dump();

    std::string blob;
    blob.reserve(16 + hj.size() + offset * 8);
    blob.append(kCheckpointMagic, 8);
    detail::put_u64_le(blob, hj.size());
    blob += hj;
    for (const auto& [name, t] : tensors)
        for (double v : t.data()) detail::put_f64_le(blob, v);
    write_file_atomic(path, blob);
}

struct Checkpoint {
    NamedTensors tensors;
    json meta;

    const Tensor& at(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return t;
        throw std::runtime_error("checkpoint: no tensor named '" + name + "'");
    }
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::string blob = read_file(path);
    if (blob.size() < 16 || std::memcmp(blob.data(), kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: " + path + " is not a DRCBv001 file");
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    std::uint64_t hlen = detail::get_u64_le(bytes + 8);
    if (16 + hlen > blob.size()) throw std::runtime_error("checkpoint: truncated header in " + path);
    json header = json::parse(blob.substr(16, hlen));
    std::size_t payload = 16 + hlen;

    Checkpoint ck;
    ck.meta = header.value("meta", json::object());
    for (const auto& e : header.at("tensors")) {
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        std::uint64_t off = e.at("offset").get<std::uint64_t>();
        Tensor t(shape);
        std::size_t start = payload + off * 8;
        if (start + t.numel() * 8 > blob.size())
            throw std::runtime_error("checkpoint: truncated payload in " + path);
        for (std::size_t i = 0; i < t.numel(); ++i)
            t.data()[i] = detail::get_f64_le(bytes + start + i * 8);
        ck.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    return ck;
}

}  // namespace drcb
