#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthbound {

using Vector = std::vector<double>;

/// Invalid argument values (counts, scales, ranges).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Mismatched dimensions or class counts.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structurally inconsistent inputs (e.g. a region table that does not
/// match the datasets it was built from).
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double squared_distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double euclidean_distance(const Vector& a, const Vector& b) {
    return std::sqrt(squared_distance(a, b));
}

inline double norm(const Vector& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

inline bool all_finite(const Vector& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

/// splitmix64 finalizer; used to derive independent substreams from one
/// 64-bit seed without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace synthbound
