#pragma once

// Binary cache of stacked aliasing systems. Little-endian layout:
//
//   "FCTC" | version u32 | rng id u32 | seed u64 | D u32 | d u32 | norm u32 |
//   index hash u64 | L u32 | L x (D x u32 counts, nnz u64, nnz x (col u64, row u64, value f64)) |
//   kappa f64 (NaN when not estimated) | crc32 u32 over everything before it

#include "fct/aliasing.hpp"
#include "fct/errors.hpp"
#include "fct/lgrid.hpp"
#include "fct/multiindex.hpp"
#include "fct/rng.hpp"
#include "fct/stacked_system.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fct {

static_assert(std::endian::native == std::endian::little, "cache format assumes a little-endian host");

inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr char kCacheMagic[4] = {'F', 'C', 'T', 'C'};

struct CacheKey {
    std::size_t D = 0;
    Exponent d = 0;
    Norm norm = Norm::one;
    std::uint64_t index_hash = 0;
    std::uint64_t seed = 0;
    LMode mode = LMode::fixed;
    std::size_t L = 0;        // fixed L or adaptive L_min
    std::size_t L_max = 0;    // adaptive only
    double kappa_max = 0.0;   // adaptive only

    [[nodiscard]] std::string file_name() const {
        std::ostringstream os;
        os << "fct-D" << D << "-d" << d << "-s" << static_cast<std::uint32_t>(norm) << "-h" << std::hex
           << index_hash << std::dec << "-seed" << seed;
        if (mode == LMode::fixed) os << "-L" << L;
        else os << "-adaptive-L" << L << "-" << L_max << "-k" << kappa_max;
        os << ".fctc";
        return os.str();
    }
};

inline CacheKey cache_key(const IndexSet& set, const BuildOptions& opts) {
    CacheKey key;
    key.D = set.dim();
    key.d = set.degree();
    key.norm = set.norm();
    key.index_hash = set.hash();
    key.seed = opts.seed;
    key.mode = opts.mode;
    key.L = resolved_L(opts, set.dim());
    if (opts.mode == LMode::adaptive) {
        key.L_max = resolved_L_max(opts, set.dim());
        key.kappa_max = opts.kappa_max;
    }
    return key;
}

inline std::filesystem::path cache_path(const std::filesystem::path& dir, const CacheKey& key) {
    return dir / key.file_name();
}

namespace detail {

class ByteWriter {
public:
    template <class T>
    void put(T v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_bytes(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    [[nodiscard]] const std::vector<char>& bytes() const noexcept { return bytes_; }
    std::vector<char>& bytes() noexcept { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}
    template <class T>
    T get() {
        if (pos_ + sizeof(T) > size_) throw CacheError("cache file is truncated");
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }

private:
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const char* data, std::size_t n) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

// Write to a sibling temp file, then rename over the target.
inline void write_atomically(const std::filesystem::path& path, const char* data, std::size_t n) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::string>{}(path.string()) ^ static_cast<std::size_t>(n));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(data, static_cast<std::streamsize>(n));
        out.flush();
        if (!out) throw IoError("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename cache file into " + path.string());
    }
}

} // namespace detail

inline std::vector<char> serialize_system(const StackedSystem& sys) {
    const auto& set = sys.index_set();
    const std::size_t D = set.dim();
    detail::ByteWriter w;
    w.put_bytes(kCacheMagic, 4);
    w.put<std::uint32_t>(kCacheVersion);
    w.put<std::uint32_t>(RngStream::kAlgorithmId);
    w.put<std::uint64_t>(sys.lgrid().seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(D));
    w.put<std::uint32_t>(set.degree());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(set.norm()));
    w.put<std::uint64_t>(set.hash());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(sys.num_blocks()));
    for (const auto& b : sys.blocks()) {
        for (auto c : b.grid().counts()) w.put<std::uint32_t>(c);
        w.put<std::uint64_t>(b.nnz());
        const auto cols = b.cols();
        const auto rows = b.rows();
        const auto vals = b.values();
        for (std::size_t e = 0; e < vals.size(); ++e) {
            w.put<std::uint64_t>(cols[e]);
            w.put<std::uint64_t>(rows[e]);
            w.put<double>(vals[e]);
        }
    }
    w.put<double>(sys.kappa().value_or(std::numeric_limits<double>::quiet_NaN()));
    w.put<std::uint32_t>(detail::crc32_of(w.bytes().data(), w.bytes().size()));
    return std::move(w.bytes());
}

inline StackedSystem deserialize_system(const std::vector<char>& bytes, std::shared_ptr<const IndexSet> set) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCacheMagic, 4) != 0)
        throw CacheError("not a cache file (bad magic)");
    if (bytes.size() < 4 + 4 + 4) throw CacheError("cache file is truncated");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + body, 4);
    detail::ByteReader r(bytes.data(), body);
    r.get<std::uint32_t>();  // magic
    const auto version = r.get<std::uint32_t>();
    if (version != kCacheVersion)
        throw CacheVersionError("cache format version " + std::to_string(version) + ", expected " +
                                std::to_string(kCacheVersion));
    if (detail::crc32_of(bytes.data(), body) != stored_crc) throw CacheError("cache checksum mismatch");
    if (r.get<std::uint32_t>() != RngStream::kAlgorithmId)
        throw CacheVersionError("cache was written with a different RNG algorithm");
    const auto seed = r.get<std::uint64_t>();
    const auto D = r.get<std::uint32_t>();
    const auto d = r.get<std::uint32_t>();
    const auto norm_tag = r.get<std::uint32_t>();
    const auto hash = r.get<std::uint64_t>();
    if (D != set->dim() || d != set->degree() || norm_tag != static_cast<std::uint32_t>(set->norm()))
        throw CacheError("cache header does not match the requested index set");
    if (hash != set->hash()) throw CacheError("cache index-set hash mismatch");
    const auto L = r.get<std::uint32_t>();
    StackedSystem sys(set, seed);
    for (std::uint32_t l = 0; l < L; ++l) {
        std::vector<std::uint32_t> counts(D);
        for (auto& c : counts) c = r.get<std::uint32_t>();
        AliasingMatrix block(GridSpec(std::move(counts)), set->size());
        const auto nnz = r.get<std::uint64_t>();
        if (nnz > set->size()) throw CacheError("cache block has more entries than columns");
        block.reserve(static_cast<std::size_t>(nnz));
        for (std::uint64_t e = 0; e < nnz; ++e) {
            const auto col = r.get<std::uint64_t>();
            const auto row = r.get<std::uint64_t>();
            const auto val = r.get<double>();
            try {
                block.push_entry(static_cast<std::size_t>(col), row, val);
            } catch (const DomainError& err) {
                throw CacheError(std::string("corrupt cache block: ") + err.what());
            }
        }
        sys.add_block(std::move(block));
    }
    const double kappa = r.get<double>();
    if (!std::isnan(kappa)) sys.set_kappa(kappa);
    if (r.position() != body) throw CacheError("cache file has trailing bytes");
    return sys;
}

inline void cache_store(const std::filesystem::path& path, const StackedSystem& sys) {
    const auto bytes = serialize_system(sys);
    detail::write_atomically(path, bytes.data(), bytes.size());
}

inline StackedSystem cache_load(const std::filesystem::path& path, std::shared_ptr<const IndexSet> set) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cache file " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_system(bytes, std::move(set));
}

} // namespace fct
