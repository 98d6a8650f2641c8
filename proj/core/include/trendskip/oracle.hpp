#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "trendskip/latent.hpp"
#include "trendskip/mixture.hpp"
#include "trendskip/schedule.hpp"
#include "trendskip/trace.hpp"

namespace trendskip {

/// Closed-form optimal noise prediction for Gaussian-mixture data under a
/// variance-preserving schedule: -s_t times the score of the time-t marginal,
/// with responsibilities computed in log space.
Latent gmm_eps_oracle(const Latent& x, int t, const NoiseSchedule& sched,
                      const GaussianMixture& gmm);

/// Closed-form optimal velocity for linear-interpolation flow: the time-tau
/// posterior mean of the data gives v = (x - E[x0 | x]) / tau.
Latent gmm_velocity_oracle(const Latent& x, double tau, const GaussianMixture& gmm);

enum class PerturbMode { SubtractConstant, ScaledNoise };

/// SubtractConstant: x - magnitude everywhere. ScaledNoise: x + z where z is
/// seeded standard normal rescaled so that mean(|z|) == magnitude.
Latent perturb_latent(const Latent& x, double magnitude, PerturbMode mode, std::uint64_t seed = 0);

/// A deterministic model output source: evaluation depends only on
/// (x, t, condition). Dimension is fixed per model.
class OracleModel {
public:
    virtual ~OracleModel() = default;
    virtual Latent evaluate(const Latent& x, int t, int condition) const = 0;
    virtual std::size_t dim() const = 0;
    /// Grid annotation for freshly drawn latents, when the model has one.
    virtual std::optional<GridShape> latent_shape() const { return std::nullopt; }
    /// Human-readable spec echoed into traces.
    virtual std::string spec() const { return "(in-memory)"; }
};

/// Provides the per-condition mixture instance behind a gmm oracle model.
class MixtureSource {
public:
    virtual ~MixtureSource() = default;
    virtual const GaussianMixture& mixture(int condition) const = 0;
};

std::shared_ptr<MixtureSource> fixed_mixture_source(std::vector<GaussianMixture> conditions);
std::shared_ptr<MixtureSource> builtin_mixture_source(const std::string& family);

/// Noise-prediction model bound to a vp schedule.
class GmmEpsOracle final : public OracleModel {
public:
    GmmEpsOracle(std::shared_ptr<MixtureSource> source, NoiseSchedule sched,
                 std::string spec = "(in-memory)");
    Latent evaluate(const Latent& x, int t, int condition) const override;
    std::size_t dim() const override;
    std::optional<GridShape> latent_shape() const override;
    std::string spec() const override { return spec_; }

private:
    std::shared_ptr<MixtureSource> source_;
    NoiseSchedule sched_;
    std::string spec_;
};

/// Velocity model bound to a flow schedule (t maps to tau = t/T).
class GmmVelocityOracle final : public OracleModel {
public:
    GmmVelocityOracle(std::shared_ptr<MixtureSource> source, NoiseSchedule sched,
                      std::string spec = "(in-memory)");
    Latent evaluate(const Latent& x, int t, int condition) const override;
    std::size_t dim() const override;
    std::optional<GridShape> latent_shape() const override;
    std::string spec() const override { return spec_; }

private:
    std::shared_ptr<MixtureSource> source_;
    NoiseSchedule sched_;
    std::string spec_;
};

/// Replays model outputs recorded in a full-sampling trace. Requesting a
/// timestep the trace never evaluated raises missing-timestep.
class TracePlaybackOracle final : public OracleModel {
public:
    explicit TracePlaybackOracle(RunTrace trace, std::string spec = "(in-memory)");
    Latent evaluate(const Latent& x, int t, int condition) const override;
    std::size_t dim() const override;
    std::optional<GridShape> latent_shape() const override;
    std::string spec() const override { return spec_; }
    const RunTrace& trace() const { return trace_; }

private:
    RunTrace trace_;
    std::vector<const Latent*> by_timestep_;  // index t, nullptr when absent
    std::string spec_;
};

/// Evaluates the wrapped model on a perturbed input latent; the scaled-noise
/// direction is frozen at construction so evaluation stays deterministic.
class PerturbedOracle final : public OracleModel {
public:
    PerturbedOracle(std::shared_ptr<const OracleModel> inner, double magnitude, PerturbMode mode,
                    std::uint64_t seed = 0);
    Latent evaluate(const Latent& x, int t, int condition) const override;
    std::size_t dim() const override;
    std::optional<GridShape> latent_shape() const override;
    std::string spec() const override;

private:
    std::shared_ptr<const OracleModel> inner_;
    double magnitude_;
    PerturbMode mode_;
    std::uint64_t seed_;
};

/// Builds a model from a spec string:
///   "builtin:std2" | "builtin:grid8" | "gmm:<path.json>" | "trace:<path.jsonl>"
/// For mixture-backed specs the schedule kind picks the oracle type
/// (vp -> noise prediction, flow -> velocity).
std::shared_ptr<OracleModel> model_from_spec(const std::string& spec, const NoiseSchedule& sched);

/// Bytes identifying the model behind a spec (file content for paths, the
/// name itself for builtins); used to key the tolerance cache.
std::string model_spec_identity_bytes(const std::string& spec);

}  // namespace trendskip
