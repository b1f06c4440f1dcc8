#ifndef TRANSIT_RNG_HPP
#define TRANSIT_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace transit {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive well-separated seeds from (seed, tags).
inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 12) + (h >> 4);
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
    return h ^ (h >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Namespaces for derived RNG streams. Distinct purposes guarantee that, for
// one seed, the simulator, the sampler chains, the split, and prediction
// never share a stream.
enum class StreamPurpose : std::uint64_t {
    TruthState = 1,
    TruthFactors = 2,
    Trips = 3,
    Chain = 4,
    Split = 5,
    Predictive = 6,
    PriorAssign = 7,
};

// Deterministic sub-stream for (seed, purpose, a, b), e.g. (seed, Chain,
// chain index) or (seed, Trips, packed O-D, interval).
inline Rng make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t a = 0,
                       std::uint64_t b = 0) {
    return Rng(hash_mix(hash_mix(hash_mix(seed, static_cast<std::uint64_t>(purpose)), a), b));
}

inline double runif(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double runif(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double rnorm(Rng& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(rng);
}

inline double rnorm(Rng& rng, double mean, double sd) {
    std::normal_distribution<double> d(mean, sd);
    return d(rng);
}

inline double rchisq(Rng& rng, double dof) {
    std::chi_squared_distribution<double> d(dof);
    return d(rng);
}

// Categorical draw from unnormalized non-negative weights.
inline int rcategorical(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = runif(rng) * total;
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace transit

#endif  // TRANSIT_RNG_HPP
