#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "trendskip/latent.hpp"

namespace trendskip {

/// Diagonal-covariance Gaussian mixture; the closed-form data distribution
/// behind the analytic oracles.
struct GaussianMixture {
    std::vector<double> weights;                 // positive, sum to 1
    std::vector<std::vector<double>> means;      // K x D
    std::vector<std::vector<double>> variances;  // K x D, entries > 0
    std::optional<GridShape> shape;              // optional image annotation

    std::size_t components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
};

/// Validates the structural invariants (weight sum, positive variances,
/// consistent dimensions) and throws invalid-parameter on violation.
void validate_mixture(const GaussianMixture& gmm);

GaussianMixture mixture_from_json_string(const std::string& text);
std::string mixture_to_json_string(const GaussianMixture& gmm);
GaussianMixture load_mixture_file(const std::string& path);

/// Procedural mixture families keyed by (family, condition). Conditions act
/// like prompts: same family of distributions, different instance.
///   "std2"  -- two symmetric unit-variance components in D=2; condition
///              rotates the +/-3 mean axis.
///   "grid8" -- three smooth-bump components on an 8x8 grid (D=64);
///              condition shifts the bump centres.
GaussianMixture builtin_mixture(const std::string& family, int condition);
bool is_builtin_mixture_family(const std::string& family);

}  // namespace trendskip
