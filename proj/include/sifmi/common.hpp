#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sifmi {

// Error hierarchy. Messages carry the context the caller needs (layer name,
// byte offset, epoch); catch sites dispatch on type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Training or LiSSA iteration produced a non-finite value.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, long last_ok)
        : Error(msg), last_finite_step(last_ok) {}
    long last_finite_step = -1;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable per-stream seed derivation so parallel scorers stay deterministic
// regardless of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x51ed2701ULL));
}

}  // namespace sifmi
