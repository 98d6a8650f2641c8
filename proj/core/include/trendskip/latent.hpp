#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "trendskip/errors.hpp"

namespace trendskip {

/// Optional grid annotation for image-like latents; height*width must equal
/// the vector length.
struct GridShape {
    int height = 0;
    int width = 0;

    friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Flat real vector with an optional grid shape. All samplers, oracles and
/// metrics operate on this one value type.
struct Latent {
    std::vector<double> values;
    std::optional<GridShape> shape;

    Latent() = default;
    explicit Latent(std::vector<double> v, std::optional<GridShape> sh = std::nullopt)
        : values(std::move(v)), shape(sh) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const Latent& a, const Latent& b) {
        return a.values == b.values && a.shape == b.shape;
    }
};

inline void check_same_dim(const Latent& a, const Latent& b, const char* where) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch, std::string(where) + ": " +
                                                      std::to_string(a.size()) + " vs " +
                                                      std::to_string(b.size()));
    }
}

inline void check_shape_consistent(const Latent& x, const char* where) {
    if (x.shape) {
        const std::size_t cells =
            static_cast<std::size_t>(x.shape->height) * static_cast<std::size_t>(x.shape->width);
        if (x.shape->height <= 0 || x.shape->width <= 0 || cells != x.size()) {
            throw Error(ErrorKind::InvalidParameter,
                        std::string(where) + ": grid shape does not match vector length");
        }
    }
}

inline bool all_finite(const Latent& x) {
    for (double v : x.values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline void check_finite(const Latent& x, const char* where) {
    if (!all_finite(x)) {
        throw Error(ErrorKind::NumericError, std::string(where) + ": non-finite latent entry");
    }
}

inline Latent add(const Latent& a, const Latent& b) {
    check_same_dim(a, b, "add");
    Latent out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.values[i];
    return out;
}

inline Latent sub(const Latent& a, const Latent& b) {
    check_same_dim(a, b, "sub");
    Latent out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

inline Latent scale(const Latent& a, double c) {
    Latent out = a;
    for (double& v : out.values) v *= c;
    return out;
}

/// out += c * a
inline void axpy(Latent& out, double c, const Latent& a) {
    check_same_dim(out, a, "axpy");
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += c * a.values[i];
}

inline Latent zeros_like(const Latent& a) {
    Latent out;
    out.values.assign(a.size(), 0.0);
    out.shape = a.shape;
    return out;
}

inline double mean_abs(const Latent& a) {
    if (a.size() == 0) return 0.0;
    double acc = 0.0;
    for (double v : a.values) acc += std::abs(v);
    return acc / static_cast<double>(a.size());
}

inline double l2_norm(const Latent& a) {
    double acc = 0.0;
    for (double v : a.values) acc += v * v;
    return std::sqrt(acc);
}

inline double l1_norm(const Latent& a) {
    double acc = 0.0;
    for (double v : a.values) acc += std::abs(v);
    return acc;
}

inline double dot(const Latent& a, const Latent& b) {
    check_same_dim(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.values[i] * b.values[i];
    return acc;
}

/// Mean squared difference, the workhorse of the comparison metrics.
inline double mean_squared_error(const Latent& a, const Latent& b) {
    check_same_dim(a, b, "mse");
    if (a.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

/// FNV-1a over the raw little-endian bytes of the doubles; used for output
/// fingerprints in traces and for cache keys.
inline std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t latent_hash(const Latent& a) {
    return fnv1a_bytes(a.values.data(), a.values.size() * sizeof(double));
}

}  // namespace trendskip
