#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "attsolver/errors.hpp"

namespace attsolver {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are not supported");

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw TruncationError(std::string("truncated file while reading ") + what);
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_bytes(os, &v, 8); }
inline void write_f64(std::ostream& os, double v) { write_bytes(os, &v, 8); }

inline std::uint32_t read_u32(std::istream& is, const char* what) {
    std::uint32_t v;
    read_bytes(is, &v, 4, what);
    return v;
}
inline std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v;
    read_bytes(is, &v, 8, what);
    return v;
}
inline double read_f64(std::istream& is, const char* what) {
    double v;
    read_bytes(is, &v, 8, what);
    return v;
}

inline void write_f64_array(std::ostream& os, std::span<const double> v) {
    write_bytes(os, v.data(), v.size() * sizeof(double));
}
inline void read_f64_array(std::istream& is, std::span<double> v, const char* what) {
    read_bytes(is, v.data(), v.size() * sizeof(double), what);
}

/// u32 length-prefixed UTF-8 string.
inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    write_bytes(os, s.data(), s.size());
}
inline std::string read_string(std::istream& is, const char* what) {
    const std::uint32_t n = read_u32(is, what);
    if (n > (1u << 20)) throw TruncationError(std::string("implausible string length in ") + what);
    std::string s(n, '\0');
    if (n > 0) read_bytes(is, s.data(), n, what);
    return s;
}

/// Reads and checks a 4-byte magic tag; distinct errors for wrong magic.
inline void expect_magic(std::istream& is, const char (&magic)[5], const char* what) {
    char got[4];
    read_bytes(is, got, 4, what);
    if (std::memcmp(got, magic, 4) != 0)
        throw BadMagicError(std::string("bad magic in ") + what + " (expected " + magic + ")");
}

inline void expect_version(std::uint32_t got, std::uint32_t want, const char* what) {
    if (got != want)
        throw VersionError(std::string("unsupported ") + what + " version " + std::to_string(got) +
                           " (expected " + std::to_string(want) + ")");
}

} // namespace attsolver
