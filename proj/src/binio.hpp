#pragma once

// Little-endian fixed-width I/O shared by the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "factcheck/error.hpp"

namespace factcheck::binio {

template <typename T>
    requires std::is_arithmetic_v<T>
void write(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
    requires std::is_arithmetic_v<T>
T read(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw ParseError("unexpected end of binary file");
    }
    return value;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    auto n = read<std::uint32_t>(in);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw ParseError("unexpected end of binary file");
    return s;
}

}  // namespace factcheck::binio
