#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace mvsde {

namespace detail {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Uniform on (0, 1) from the top 53 bits; never returns 0.
inline double open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Standard normal variate as a pure function of its coordinates.
///
/// Mapping (stable across releases):
///   key     = mix64(seed ^ mix64(path)) split into two 32-bit words (low, high)
///   counter = (step low 32, step high 32, particle, component)
///   r       = Philox4x32-10(counter, key)
///   u1, u2  = open_unit(r1:r0), open_unit(r3:r2)
///   z       = sqrt(-2 ln u1) cos(2 pi u2)
inline double gaussian(std::uint64_t seed, std::uint64_t path, std::uint32_t particle,
                       std::uint32_t component, std::uint64_t fine_step) {
    const std::uint64_t k = detail::mix64(seed ^ detail::mix64(path));
    const auto r = detail::philox4x32_10(
        {static_cast<std::uint32_t>(fine_step), static_cast<std::uint32_t>(fine_step >> 32),
         particle, component},
        {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)});
    const double u1 = detail::open_unit((std::uint64_t{r[1]} << 32) | r[0]);
    const double u2 = detail::open_unit((std::uint64_t{r[3]} << 32) | r[2]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Brownian increments on a dyadic hierarchy of step sizes h_ref * 2^k.
///
/// A level-k increment is the ascending-order sum of the 2^k fine increments
/// sqrt(h_ref) * gaussian(...) it covers, so coarse and fine discretizations
/// driven by the same driver see the same Brownian path. Stateless.
class BrownianDriver {
public:
    BrownianDriver(std::uint64_t seed, int ref_level, std::size_t wiener_dim = 1)
        : seed_(seed), ref_level_(ref_level), m_(wiener_dim),
          h_ref_(std::ldexp(1.0, -ref_level)), sqrt_h_ref_(std::sqrt(h_ref_)) {
        if (wiener_dim == 0) throw ConfigError("brownian driver: Wiener dimension must be >= 1");
    }

    std::uint64_t seed() const noexcept { return seed_; }
    int ref_level() const noexcept { return ref_level_; }
    double h_ref() const noexcept { return h_ref_; }
    std::size_t wiener_dim() const noexcept { return m_; }

    /// Level k such that h == h_ref * 2^k; throws if h is not of that form.
    int level_for_step(double h) const {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("step size must be positive");
        int exponent = 0;
        const double mantissa = std::frexp(h / h_ref_, &exponent);
        if (mantissa != 0.5 || exponent < 1)
            throw ConfigError("step " + std::to_string(h) + " is not h_ref * 2^k with k >= 0 (h_ref = " +
                              std::to_string(h_ref_) + ")");
        return exponent - 1;
    }

    double fine_increment(std::uint64_t path, std::uint32_t particle, std::uint32_t component,
                          std::uint64_t fine_index) const {
        return sqrt_h_ref_ * gaussian(seed_, path, particle, component, fine_index);
    }

    double increment(std::uint64_t path, std::uint32_t particle, std::uint32_t component,
                     std::uint64_t coarse_index, int level) const {
        if (level < 0 || level > 62) throw ConfigError("brownian increment: invalid level");
        const std::uint64_t width = std::uint64_t{1} << level;
        const std::uint64_t first = coarse_index * width;
        double sum = 0.0;
        for (std::uint64_t j = 0; j < width; ++j)
            sum += fine_increment(path, particle, component, first + j);
        return sum;
    }

private:
    std::uint64_t seed_;
    int ref_level_;
    std::size_t m_;
    double h_ref_;
    double sqrt_h_ref_;
};

}  // namespace mvsde
