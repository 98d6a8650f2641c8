#include "trendskip/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "trendskip/rng.hpp"

namespace trendskip {

namespace {

/// Log-space responsibilities for a mixture with per-component diagonal
/// variances `var` and means `mean` (already scaled to the query time).
std::vector<double> responsibilities(const Latent& x, const std::vector<double>& weights,
                                     const std::vector<std::vector<double>>& means,
                                     const std::vector<std::vector<double>>& vars) {
    const std::size_t K = weights.size();
    const std::size_t D = x.size();
    std::vector<double> logp(K);
    for (std::size_t k = 0; k < K; ++k) {
        double acc = std::log(weights[k]);
        for (std::size_t d = 0; d < D; ++d) {
            const double diff = x.values[d] - means[k][d];
            acc -= 0.5 * (diff * diff / vars[k][d] + std::log(vars[k][d]));
        }
        logp[k] = acc;
    }
    const double m = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        logp[k] = std::exp(logp[k] - m);
        z += logp[k];
    }
    for (double& v : logp) v /= z;
    return logp;
}

}  // namespace

Latent gmm_eps_oracle(const Latent& x, int t, const NoiseSchedule& sched,
                      const GaussianMixture& gmm) {
    if (sched.kind != ScheduleKind::VpDdim) {
        throw Error(ErrorKind::KindMismatch, "noise-prediction oracle needs a vp schedule");
    }
    if (t < 1 || t > sched.T) {
        throw Error(ErrorKind::TimestepOutOfRange, "oracle evaluated at t=" + std::to_string(t));
    }
    if (x.size() != gmm.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "latent dimension does not match mixture");
    }

    const double at = sched.a[t];
    const double st = sched.s[t];
    const std::size_t K = gmm.components();
    const std::size_t D = gmm.dim();

    // Time-t marginal: component means a_t*mu, variances a_t^2*var + s_t^2.
    std::vector<std::vector<double>> means(K, std::vector<double>(D));
    std::vector<std::vector<double>> vars(K, std::vector<double>(D));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < D; ++d) {
            means[k][d] = at * gmm.means[k][d];
            vars[k][d] = at * at * gmm.variances[k][d] + st * st;
        }
    }
    const std::vector<double> resp = responsibilities(x, gmm.weights, means, vars);

    Latent eps = zeros_like(x);
    eps.shape = gmm.shape ? gmm.shape : x.shape;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < D; ++d) {
            eps.values[d] += resp[k] * (x.values[d] - means[k][d]) / vars[k][d];
        }
    }
    for (double& v : eps.values) v *= st;
    check_finite(eps, "gmm_eps_oracle");
    return eps;
}

Latent gmm_velocity_oracle(const Latent& x, double tau, const GaussianMixture& gmm) {
    if (!(tau > 0.0) || tau > 1.0) {
        throw Error(ErrorKind::TauOutOfRange, "tau must lie in (0, 1]");
    }
    if (x.size() != gmm.dim()) {
        throw Error(ErrorKind::DimensionMismatch, "latent dimension does not match mixture");
    }

    const double a = 1.0 - tau;
    const std::size_t K = gmm.components();
    const std::size_t D = gmm.dim();

    std::vector<std::vector<double>> means(K, std::vector<double>(D));
    std::vector<std::vector<double>> vars(K, std::vector<double>(D));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < D; ++d) {
            means[k][d] = a * gmm.means[k][d];
            vars[k][d] = a * a * gmm.variances[k][d] + tau * tau;
        }
    }
    const std::vector<double> resp = responsibilities(x, gmm.weights, means, vars);

    // Posterior mean of x0 via per-component Gaussian conditioning.
    Latent post = zeros_like(x);
    post.shape = gmm.shape ? gmm.shape : x.shape;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < D; ++d) {
            const double gain = a * gmm.variances[k][d] / vars[k][d];
            post.values[d] += resp[k] * (gmm.means[k][d] + gain * (x.values[d] - means[k][d]));
        }
    }

    Latent v = zeros_like(x);
    v.shape = post.shape;
    for (std::size_t d = 0; d < D; ++d) {
        v.values[d] = (x.values[d] - post.values[d]) / tau;
    }
    check_finite(v, "gmm_velocity_oracle");
    return v;
}

Latent perturb_latent(const Latent& x, double magnitude, PerturbMode mode, std::uint64_t seed) {
    if (!(magnitude >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "perturbation magnitude must be >= 0");
    }
    if (magnitude == 0.0) return x;
    if (mode == PerturbMode::SubtractConstant) {
        Latent out = x;
        for (double& v : out.values) v -= magnitude;
        return out;
    }
    Rng rng(mix_seed(seed, 0x70657274757262ull));
    Latent z = rng.standard_normal(x.size());
    const double m = mean_abs(z);
    if (m == 0.0) throw Error(ErrorKind::NumericError, "degenerate noise draw");
    const double c = magnitude / m;
    Latent out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += c * z.values[i];
    return out;
}

namespace {

class FixedMixtureSource final : public MixtureSource {
public:
    explicit FixedMixtureSource(std::vector<GaussianMixture> conditions)
        : conditions_(std::move(conditions)) {
        if (conditions_.empty()) {
            throw Error(ErrorKind::InvalidParameter, "mixture source needs >= 1 condition");
        }
        for (const auto& gmm : conditions_) validate_mixture(gmm);
    }

    const GaussianMixture& mixture(int condition) const override {
        if (condition < 0 || static_cast<std::size_t>(condition) >= conditions_.size()) {
            throw Error(ErrorKind::InvalidParameter,
                        "condition id " + std::to_string(condition) + " not registered");
        }
        return conditions_[condition];
    }

private:
    std::vector<GaussianMixture> conditions_;
};

class BuiltinMixtureSource final : public MixtureSource {
public:
    explicit BuiltinMixtureSource(std::string family) : family_(std::move(family)) {
        if (!is_builtin_mixture_family(family_)) {
            throw Error(ErrorKind::InvalidParameter, "unknown builtin family '" + family_ + "'");
        }
        (void)mixture(0);  // fail fast and pin the dimension
    }

    const GaussianMixture& mixture(int condition) const override {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(condition);
        if (it == cache_.end()) {
            it = cache_.emplace(condition, builtin_mixture(family_, condition)).first;
        }
        return it->second;
    }

private:
    std::string family_;
    mutable std::mutex mu_;
    mutable std::map<int, GaussianMixture> cache_;
};

}  // namespace

std::shared_ptr<MixtureSource> fixed_mixture_source(std::vector<GaussianMixture> conditions) {
    return std::make_shared<FixedMixtureSource>(std::move(conditions));
}

std::shared_ptr<MixtureSource> builtin_mixture_source(const std::string& family) {
    return std::make_shared<BuiltinMixtureSource>(family);
}

GmmEpsOracle::GmmEpsOracle(std::shared_ptr<MixtureSource> source, NoiseSchedule sched,
                           std::string spec)
    : source_(std::move(source)), sched_(std::move(sched)), spec_(std::move(spec)) {
    if (sched_.kind != ScheduleKind::VpDdim) {
        throw Error(ErrorKind::KindMismatch, "noise-prediction oracle needs a vp schedule");
    }
}

Latent GmmEpsOracle::evaluate(const Latent& x, int t, int condition) const {
    return gmm_eps_oracle(x, t, sched_, source_->mixture(condition));
}

std::size_t GmmEpsOracle::dim() const { return source_->mixture(0).dim(); }

std::optional<GridShape> GmmEpsOracle::latent_shape() const { return source_->mixture(0).shape; }

GmmVelocityOracle::GmmVelocityOracle(std::shared_ptr<MixtureSource> source, NoiseSchedule sched,
                                     std::string spec)
    : source_(std::move(source)), sched_(std::move(sched)), spec_(std::move(spec)) {
    if (sched_.kind != ScheduleKind::RectifiedFlow) {
        throw Error(ErrorKind::KindMismatch, "velocity oracle needs a flow schedule");
    }
}

Latent GmmVelocityOracle::evaluate(const Latent& x, int t, int condition) const {
    if (t < 1 || t > sched_.T) {
        throw Error(ErrorKind::TimestepOutOfRange, "oracle evaluated at t=" + std::to_string(t));
    }
    const double tau = static_cast<double>(t) / static_cast<double>(sched_.T);
    return gmm_velocity_oracle(x, tau, source_->mixture(condition));
}

std::size_t GmmVelocityOracle::dim() const { return source_->mixture(0).dim(); }

std::optional<GridShape> GmmVelocityOracle::latent_shape() const {
    return source_->mixture(0).shape;
}

TracePlaybackOracle::TracePlaybackOracle(RunTrace trace, std::string spec)
    : trace_(std::move(trace)), spec_(std::move(spec)) {
    by_timestep_.assign(trace_.config.schedule.T + 1, nullptr);
    for (const StepRecord& rec : trace_.steps) {
        if (rec.action != StepAction::Real || !rec.output) continue;
        if (rec.t >= 1 && rec.t <= trace_.config.schedule.T) {
            by_timestep_[rec.t] = &*rec.output;
        }
    }
    bool any = false;
    for (const Latent* p : by_timestep_) any = any || (p != nullptr);
    if (!any) {
        throw Error(ErrorKind::MissingSnapshot,
                    "trace has no recorded outputs; record with full snapshots");
    }
}

Latent TracePlaybackOracle::evaluate(const Latent&, int t, int) const {
    if (t < 1 || t >= static_cast<int>(by_timestep_.size()) || by_timestep_[t] == nullptr) {
        throw Error(ErrorKind::MissingTimestep,
                    "trace holds no real output for t=" + std::to_string(t) +
                        "; traces must be recorded with full sampling");
    }
    return *by_timestep_[t];
}

std::size_t TracePlaybackOracle::dim() const { return trace_.final_latent.size(); }

std::optional<GridShape> TracePlaybackOracle::latent_shape() const {
    return trace_.final_latent.shape;
}

PerturbedOracle::PerturbedOracle(std::shared_ptr<const OracleModel> inner, double magnitude,
                                 PerturbMode mode, std::uint64_t seed)
    : inner_(std::move(inner)), magnitude_(magnitude), mode_(mode), seed_(seed) {
    if (!inner_) throw Error(ErrorKind::InvalidParameter, "perturbed oracle needs an inner model");
    if (!(magnitude_ >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "perturbation magnitude must be >= 0");
    }
}

Latent PerturbedOracle::evaluate(const Latent& x, int t, int condition) const {
    return inner_->evaluate(perturb_latent(x, magnitude_, mode_, seed_), t, condition);
}

std::size_t PerturbedOracle::dim() const { return inner_->dim(); }

std::optional<GridShape> PerturbedOracle::latent_shape() const { return inner_->latent_shape(); }

std::string PerturbedOracle::spec() const {
    return "perturbed(" + std::to_string(magnitude_) + ")+" + inner_->spec();
}

std::shared_ptr<OracleModel> model_from_spec(const std::string& spec, const NoiseSchedule& sched) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw Error(ErrorKind::ParseError,
                    "model spec must look like builtin:<name>, gmm:<path> or trace:<path>");
    }
    const std::string head = spec.substr(0, colon);
    const std::string rest = spec.substr(colon + 1);

    std::shared_ptr<MixtureSource> source;
    if (head == "builtin") {
        source = builtin_mixture_source(rest);
    } else if (head == "gmm") {
        source = fixed_mixture_source({load_mixture_file(rest)});
    } else if (head == "trace") {
        return std::make_shared<TracePlaybackOracle>(load_trace(rest), spec);
    } else {
        throw Error(ErrorKind::ParseError, "unknown model spec prefix '" + head + "'");
    }

    if (sched.kind == ScheduleKind::VpDdim) {
        return std::make_shared<GmmEpsOracle>(std::move(source), sched, spec);
    }
    return std::make_shared<GmmVelocityOracle>(std::move(source), sched, spec);
}

std::string model_spec_identity_bytes(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string head = colon == std::string::npos ? spec : spec.substr(0, colon);
    if (head == "gmm" || head == "trace") {
        const std::string path = spec.substr(colon + 1);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return head + ":" + ss.str();
    }
    return spec;
}

}  // namespace trendskip
