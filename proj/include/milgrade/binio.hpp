#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "milgrade/errors.hpp"

namespace milgrade {

// Little-endian stream helpers. Bytes are composed explicitly so the formats
// stay bit-exact on any host.

inline void write_u8(std::ostream& os, std::uint8_t v) {
    os.put(static_cast<char>(v));
}

inline void write_u32le(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline void write_i32le(std::ostream& os, std::int32_t v) {
    write_u32le(os, static_cast<std::uint32_t>(v));
}

inline void write_u64le(std::ostream& os, std::uint64_t v) {
    write_u32le(os, static_cast<std::uint32_t>(v & 0xffffffffULL));
    write_u32le(os, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32le(std::ostream& os, float v) {
    write_u32le(os, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64le(std::ostream& os, double v) {
    write_u64le(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint8_t read_u8(std::istream& is, const std::string& what) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) {
        throw FormatError(what + ": truncated file");
    }
    return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32le(std::istream& is, const std::string& what) {
    char b[4];
    if (!is.read(b, 4)) throw FormatError(what + ": truncated file");
    return static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[0])) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[3])) << 24);
}

inline std::int32_t read_i32le(std::istream& is, const std::string& what) {
    return static_cast<std::int32_t>(read_u32le(is, what));
}

inline std::uint64_t read_u64le(std::istream& is, const std::string& what) {
    const std::uint64_t lo = read_u32le(is, what);
    const std::uint64_t hi = read_u32le(is, what);
    return lo | (hi << 32);
}

inline float read_f32le(std::istream& is, const std::string& what) {
    return std::bit_cast<float>(read_u32le(is, what));
}

inline double read_f64le(std::istream& is, const std::string& what) {
    return std::bit_cast<double>(read_u64le(is, what));
}

inline void write_magic(std::ostream& os, const char tag[4]) {
    os.write(tag, 4);
}

inline void expect_magic(std::istream& is, const char tag[4], const std::string& what) {
    char b[4];
    if (!is.read(b, 4)) throw FormatError(what + ": truncated file");
    if (b[0] != tag[0] || b[1] != tag[1] || b[2] != tag[2] || b[3] != tag[3]) {
        throw FormatError(what + ": bad magic \"" + std::string(b, 4) + "\", expected \"" +
                          std::string(tag, 4) + "\"");
    }
}

inline void expect_version(std::istream& is, std::uint32_t expected, const std::string& what) {
    const std::uint32_t v = read_u32le(is, what);
    if (v != expected) {
        throw FormatError(what + ": unsupported version " + std::to_string(v) + ", expected " +
                          std::to_string(expected));
    }
}

} // namespace milgrade
