#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

#include "trendskip/latent.hpp"

namespace trendskip {

/// splitmix64 step; used to derive independent substreams from one seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (0x6a09e667f3bcc909ull + tag);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

/// Seeded generator with a pinned uniform/gaussian construction so that
/// streams are byte-reproducible across standard libraries
/// (std::normal_distribution is implementation-defined; Box-Muller is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        // Box-Muller; u1 shifted away from zero so log() is safe.
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        return r * std::cos(theta);
    }

    Latent standard_normal(std::size_t dim, std::optional<GridShape> shape = std::nullopt) {
        Latent out;
        out.values.resize(dim);
        for (double& v : out.values) v = gaussian();
        out.shape = shape;
        return out;
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace trendskip
