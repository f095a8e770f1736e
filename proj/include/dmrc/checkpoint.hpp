// Binary checkpoint for a ParamStore. Exact layout (all integers and doubles
// little-endian, no padding; see docs/checkpoint-format.md):
//
//   u32  format version (currently 1)
//   u64  store seed
//   u64  parameter count
//   then per parameter, in ascending name order:
//     u64       name length in bytes
//     bytes     name (UTF-8)
//     u32       rank
//     u64[rank] extents
//     f64[prod] values, row-major, IEEE-754 binary64
//
// Loading rejects unknown versions, truncated files, and trailing bytes.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmrc/param_store.hpp"

namespace dmrc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_le(std::ostream& os, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t read_le(std::istream& is, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        int c = is.get();
        if (c == EOF) throw std::runtime_error("truncated checkpoint: unexpected end of file");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    detail::write_le(os, kCheckpointVersion, 4);
    detail::write_le(os, params.seed(), 8);
    detail::write_le(os, params.num_params(), 8);
    for (const auto& [name, t] : params.entries()) {
        detail::write_le(os, name.size(), 8);
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le(os, t.shape().size(), 4);
        for (int e : t.shape()) detail::write_le(os, static_cast<std::uint64_t>(e), 8);
        for (double v : t.values()) detail::write_le(os, std::bit_cast<std::uint64_t>(v), 8);
    }
    if (!os) throw std::runtime_error("write failed for checkpoint: " + path);
}

inline ParamStore load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    const auto version = static_cast<std::uint32_t>(detail::read_le(is, 4));
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version) +
                                 " (expected " + std::to_string(kCheckpointVersion) + ")");
    const std::uint64_t seed = detail::read_le(is, 8);
    const std::uint64_t count = detail::read_le(is, 8);
    ParamStore store(seed);
    for (std::uint64_t p = 0; p < count; ++p) {
        const std::uint64_t name_len = detail::read_le(is, 8);
        if (name_len > (1u << 16)) throw std::runtime_error("corrupt checkpoint: implausible name length");
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        if (is.gcount() != static_cast<std::streamsize>(name_len))
            throw std::runtime_error("truncated checkpoint: unexpected end of file");
        const auto rank = static_cast<std::uint32_t>(detail::read_le(is, 4));
        if (rank > 8) throw std::runtime_error("corrupt checkpoint: implausible rank " + std::to_string(rank));
        Shape shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint64_t e = detail::read_le(is, 8);
            if (e == 0 || e > (1u << 30)) throw std::runtime_error("corrupt checkpoint: bad extent in " + name);
            shape[d] = static_cast<int>(e);
        }
        const int n = shape_count(shape);
        std::vector<double> values(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) values[i] = std::bit_cast<double>(detail::read_le(is, 8));
        store.insert(name, Tensor(std::move(shape), std::move(values)));
    }
    if (is.peek() != EOF) throw std::runtime_error("corrupt checkpoint: trailing bytes after last parameter");
    return store;
}

}  // namespace dmrc
