#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsc {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string &what) : std::runtime_error(what) {}
};

// 6 significant digits, the precision used for all CSV output.
inline std::string format_g6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

// FNV-1a, used for state-trajectory fingerprints in determinism checks.
inline std::uint64_t fnv1a(std::uint64_t h, const void *data, std::size_t n) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a_init() { return 0xCBF29CE484222325ULL; }

inline std::uint64_t fnv1a_add(std::uint64_t h, double v) {
    return fnv1a(h, &v, sizeof(v));
}

inline std::uint64_t fnv1a_add(std::uint64_t h, std::uint64_t v) {
    return fnv1a(h, &v, sizeof(v));
}

inline std::string join_csv(const std::vector<std::string> &cells) {
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) row += ',';
        row += cells[i];
    }
    return row;
}

} // namespace tsc
