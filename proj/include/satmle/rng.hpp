#pragma once

#include <cstdint>

#include <boost/math/distributions/normal.hpp>

// Counter-based random draws: every variate is a pure function of a key
// built from (seed, tag...) components.  There is no sequential generator
// state, so leave-one-out reruns and oracle reruns never perturb the draws
// of the units they share with the full-data run.

namespace satmle::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t key(std::uint64_t seed) { return splitmix64(seed); }

template <class... Tags>
std::uint64_t key(std::uint64_t seed, std::uint64_t first, Tags... rest) {
    return key(mix(splitmix64(seed), first), static_cast<std::uint64_t>(rest)...);
}

/// Uniform on the open interval (0, 1).
inline double uniform(std::uint64_t k) {
    return (static_cast<double>(k >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via the inverse CDF of a keyed uniform.
inline double normal(std::uint64_t k) {
    static const boost::math::normal_distribution<double> dist;
    return boost::math::quantile(dist, uniform(k));
}

} // namespace satmle::rng
