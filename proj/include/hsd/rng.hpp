#pragma once

#include <cstdint>
#include <random>

namespace hsd {

/// Deterministic RNG used everywhere a stochastic choice is made. A fixed
/// seed fixes restart initializations and sampling plans.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng_);
    }

    double normal(double mean = 0.0, double sigma = 1.0) {
        return std::normal_distribution<double>(mean, sigma)(eng_);
    }

    std::uint64_t next_u64() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

/// Halton low-discrepancy sequence. Sample i of a plan with count m is the
/// same for every plan with count >= m, so enlarging a sampling plan only
/// adds tuples; it never replaces them.
inline double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

inline constexpr std::uint64_t kHaltonPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

/// Component d of the i-th quasi-random tuple, mapped to [lo, hi].
inline double halton_in(std::uint64_t index, int dim, double lo, double hi) {
    return lo + (hi - lo) * halton(index + 1, kHaltonPrimes[dim % 12]);
}

} // namespace hsd
