#pragma once

// Binary checkpoint container.
//
//   magic        8 bytes  "GNCKPT01"
//   n_entries    u32
//   entry*       u32 name_len, name bytes, u32 rank, u64 dims[rank], u64 byte_offset
//   payload_len  u64
//   payload      little-endian f32 data, entries back to back
//   checksum     u64 FNV-1a over the payload bytes
//
// Offsets are relative to the payload start. All integers little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "groupnet/io.hpp"
#include "groupnet/nn.hpp"

namespace groupnet {

struct NamedTensor {
    std::string name;
    Tensor<float> tensor;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'G', 'N', 'C', 'K', 'P', 'T', '0', '1'};

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

template <class U>
void put_le(std::string& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}
    template <class U>
    U get() {
        need(sizeof(U));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return static_cast<U>(v);
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw LoadError("checkpoint truncated");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<NamedTensor>& entries) {
    std::string header(detail::kCheckpointMagic, 8);
    detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(entries.size()));
    std::string payload;
    for (const auto& e : entries) {
        detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(e.name.size()));
        header += e.name;
        detail::put_le<std::uint32_t>(header, static_cast<std::uint32_t>(e.tensor.rank()));
        for (std::size_t d : e.tensor.shape()) detail::put_le<std::uint64_t>(header, d);
        detail::put_le<std::uint64_t>(header, payload.size());
        for (float f : e.tensor.data()) detail::put_le<std::uint32_t>(payload, std::bit_cast<std::uint32_t>(f));
    }
    detail::put_le<std::uint64_t>(header, payload.size());
    std::string out = header + payload;
    detail::put_le<std::uint64_t>(out, detail::fnv1a64(payload));
    return out;
}

inline std::vector<NamedTensor> decode_checkpoint(std::string_view bytes) {
    detail::Reader rd(bytes);
    if (rd.take(8) != std::string_view(detail::kCheckpointMagic, 8)) throw LoadError("not a checkpoint file");
    const auto n = rd.get<std::uint32_t>();
    struct Entry {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Entry> index;
    for (std::uint32_t i = 0; i < n; ++i) {
        Entry e;
        e.name = std::string(rd.take(rd.get<std::uint32_t>()));
        const auto rank = rd.get<std::uint32_t>();
        for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(static_cast<std::size_t>(rd.get<std::uint64_t>()));
        e.offset = rd.get<std::uint64_t>();
        index.push_back(std::move(e));
    }
    const auto payload_len = rd.get<std::uint64_t>();
    const std::string_view payload = rd.take(payload_len);
    if (rd.get<std::uint64_t>() != detail::fnv1a64(payload)) throw LoadError("checkpoint checksum mismatch");

    std::vector<NamedTensor> out;
    for (const auto& e : index) {
        const std::size_t count = shape_numel(e.shape);
        if (e.offset + 4 * count > payload.size()) throw LoadError("checkpoint entry out of bounds: " + e.name);
        detail::Reader prd(payload.substr(e.offset, 4 * count));
        std::vector<float> data(count);
        for (auto& f : data) f = std::bit_cast<float>(prd.get<std::uint32_t>());
        out.push_back({e.name, Tensor<float>(e.shape, std::move(data))});
    }
    return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
    write_file_atomic(path, encode_checkpoint(entries));
}

inline std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

template <class T>
std::vector<NamedTensor> parameters_to_entries(const ParameterStore<T>& store) {
    std::vector<NamedTensor> out;
    for (const auto& [name, p] : store.entries()) out.push_back({name, p.var.value().template cast<float>()});
    return out;
}

/// Adam moments as `adam.m.<name>` / `adam.v.<name>` entries.
template <class T>
std::vector<NamedTensor> optimizer_to_entries(const ParameterStore<T>& store) {
    std::vector<NamedTensor> out;
    for (const auto& [name, p] : store.entries()) {
        out.push_back({"adam.m." + name, Tensor<T>(p.var.shape(), p.m).template cast<float>()});
        out.push_back({"adam.v." + name, Tensor<T>(p.var.shape(), p.v).template cast<float>()});
    }
    return out;
}

/// Copy checkpoint values into an already-registered store. Every parameter
/// must be present with a matching shape; extra entries are an error too.
template <class T>
void load_parameters(ParameterStore<T>& store, const std::vector<NamedTensor>& entries) {
    std::size_t matched = 0;
    for (const auto& e : entries) {
        if (e.name.starts_with("adam.")) continue;
        if (!store.contains(e.name)) throw LoadError("checkpoint has unknown parameter: " + e.name);
        auto& var = store.get(e.name);
        if (var.shape() != e.tensor.shape())
            throw LoadError("shape mismatch for " + e.name + ": " + shape_str(e.tensor.shape()) + " vs " +
                            shape_str(var.shape()));
        auto& dst = var.mutable_value().storage();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.tensor[i]);
        ++matched;
    }
    if (matched != store.size()) throw LoadError("checkpoint is missing parameters");
}

template <class T>
void load_optimizer(ParameterStore<T>& store, const std::vector<NamedTensor>& entries) {
    for (const auto& e : entries) {
        for (const char* kind : {"adam.m.", "adam.v."}) {
            if (!e.name.starts_with(kind)) continue;
            const std::string name = e.name.substr(std::strlen(kind));
            if (!store.contains(name)) throw LoadError("optimizer state for unknown parameter: " + name);
            auto& p = store.entries().at(name);
            auto& buf = kind[5] == 'm' ? p.m : p.v;
            if (buf.size() != e.tensor.size()) throw LoadError("optimizer state shape mismatch: " + name);
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<T>(e.tensor[i]);
        }
    }
}

}  // namespace groupnet
