#pragma once

// Little-endian binary primitives shared by the matrix and model file formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "radm/errors.hpp"

namespace radm::binio {

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    write_bytes(out, buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw data_error(std::string("unexpected end of file reading ") + what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<T>(buf[i]) << (8 * i);
    return value;
}

inline void write_u16(std::ostream& out, std::uint16_t v) { write_le<std::uint16_t>(out, v); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_le<std::uint32_t>(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_le<std::uint64_t>(out, v); }
inline void write_f64(std::ostream& out, double v) {
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint16_t read_u16(std::istream& in, const char* what) {
    return read_le<std::uint16_t>(in, what);
}
inline std::uint32_t read_u32(std::istream& in, const char* what) {
    return read_le<std::uint32_t>(in, what);
}
inline std::uint64_t read_u64(std::istream& in, const char* what) {
    return read_le<std::uint64_t>(in, what);
}
inline double read_f64(std::istream& in, const char* what) {
    return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

}  // namespace radm::binio
