#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "neurorate/error.hpp"

namespace neurorate::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T value) noexcept {
    if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
        return value;
    } else {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&value, bytes, sizeof(T));
        return value;
    }
}

/// Writes a trivially copyable scalar in little-endian byte order.
template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    value = byteswap_if_big(value);
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
        throw FormatError(std::string("unexpected end of file while reading ") + what);
    }
    return byteswap_if_big(value);
}

inline void write_cstring(std::ostream& out, const std::string& s) {
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    out.put('\0');
}

inline std::string read_cstring(std::istream& in, const char* what, std::size_t max_len = 4096) {
    std::string s;
    for (;;) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            throw FormatError(std::string("unterminated string while reading ") + what);
        }
        if (c == 0) return s;
        s.push_back(static_cast<char>(c));
        if (s.size() > max_len) throw FormatError(std::string("string too long while reading ") + what);
    }
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what) {
    char buf[4] = {};
    in.read(buf, 4);
    if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
        throw FormatError(std::string("bad magic in ") + what + " (expected \"" + magic + "\")");
    }
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

} // namespace neurorate::detail
