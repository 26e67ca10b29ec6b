#pragma once

// Shared plumbing: error taxonomy, deterministic seed fan-out, small helpers.

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nmtmask {

// All recoverable failures surface as one of these; the CLI maps them to
// exit codes (usage/config problems -> 2, runtime data problems -> 1).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// One global seed, independent streams per module: reordering or skipping a
// stage never shifts the randomness seen by another stage.
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view module) {
    return splitmix64(global ^ fnv1a(module));
}

// mt19937_64's output sequence is pinned by the standard; drawing uniforms by
// hand (instead of std::uniform_real_distribution, whose mapping is
// implementation-defined) keeps artifacts byte-identical across toolchains.
struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }  // [0,1)
    double uniform(double lo, double hi) { return lo + unit() * (hi - lo); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }
};

}  // namespace nmtmask
