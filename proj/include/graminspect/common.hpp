#ifndef GRAMINSPECT_COMMON_HPP
#define GRAMINSPECT_COMMON_HPP

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace graminspect {

inline constexpr const char* kToolVersion = "graminspect 0.1.0";

// Error classes map one-to-one onto CLI exit codes (see tools/).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// UTF-8 <-> Unicode scalar values. All character offsets in this project are
// in scalar values, never bytes.

inline std::u32string utf8_decode(const std::string& bytes) {
    std::u32string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    const auto fail = [&](std::size_t at) {
        throw ParseError("invalid UTF-8 at byte " + std::to_string(at));
    };
    while (i < bytes.size()) {
        const unsigned char b0 = static_cast<unsigned char>(bytes[i]);
        char32_t cp = 0;
        std::size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            fail(i);
        }
        if (i + len > bytes.size()) fail(i);
        for (std::size_t k = 1; k < len; ++k) {
            const unsigned char bk = static_cast<unsigned char>(bytes[i + k]);
            if ((bk & 0xC0) != 0x80) fail(i + k);
            cp = (cp << 6) | (bk & 0x3F);
        }
        // Reject overlong forms and surrogates.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
            (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            fail(i);
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string utf8_encode(const std::u32string& chars) {
    std::string out;
    out.reserve(chars.size() * 3);
    for (char32_t cp : chars) utf8_append(out, cp);
    return out;
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit, used for payload checksums and config fingerprints.

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

// ---------------------------------------------------------------------------
// Little-endian binary IO, independent of host byte order.

inline void write_le_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

inline std::uint64_t read_le_u64(std::istream& is) {
    char b[8];
    is.read(b, 8);
    if (!is) throw IntegrityError("truncated binary payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

inline void write_le_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    __builtin_memcpy(&bits, &d, 8);
    write_le_u64(os, bits);
}

inline double read_le_f64(std::istream& is) {
    const std::uint64_t bits = read_le_u64(is);
    double d;
    __builtin_memcpy(&d, &bits, 8);
    return d;
}

// Split a string on a delimiter; keeps empty fields.
inline std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

}  // namespace graminspect

#endif  // GRAMINSPECT_COMMON_HPP
