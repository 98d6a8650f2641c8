#include "trendskip/mixture.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace trendskip {

void validate_mixture(const GaussianMixture& gmm) {
    if (gmm.weights.empty()) {
        throw Error(ErrorKind::InvalidParameter, "mixture has no components");
    }
    if (gmm.means.size() != gmm.weights.size() || gmm.variances.size() != gmm.weights.size()) {
        throw Error(ErrorKind::InvalidParameter, "mixture arrays have mismatched component counts");
    }
    const std::size_t D = gmm.dim();
    if (D == 0) throw Error(ErrorKind::InvalidParameter, "mixture dimension is zero");
    double wsum = 0.0;
    for (double w : gmm.weights) {
        if (!(w > 0.0)) throw Error(ErrorKind::InvalidParameter, "mixture weights must be positive");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12) {
        throw Error(ErrorKind::InvalidParameter, "mixture weights must sum to 1 (got " +
                                                     std::to_string(wsum) + ")");
    }
    for (std::size_t k = 0; k < gmm.components(); ++k) {
        if (gmm.means[k].size() != D || gmm.variances[k].size() != D) {
            throw Error(ErrorKind::InvalidParameter, "mixture component dimension mismatch");
        }
        for (double v : gmm.variances[k]) {
            if (!(v > 0.0)) throw Error(ErrorKind::InvalidParameter, "mixture variances must be > 0");
        }
        for (double m : gmm.means[k]) {
            if (!std::isfinite(m)) throw Error(ErrorKind::InvalidParameter, "mixture mean not finite");
        }
    }
    if (gmm.shape) {
        const std::size_t cells = static_cast<std::size_t>(gmm.shape->height) *
                                  static_cast<std::size_t>(gmm.shape->width);
        if (cells != D) {
            throw Error(ErrorKind::InvalidParameter, "mixture grid shape does not match dimension");
        }
    }
}

GaussianMixture mixture_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("mixture json: ") + e.what());
    }
    GaussianMixture gmm;
    try {
        gmm.weights = j.at("weights").get<std::vector<double>>();
        gmm.means = j.at("means").get<std::vector<std::vector<double>>>();
        gmm.variances = j.at("variances").get<std::vector<std::vector<double>>>();
        if (j.contains("shape")) {
            const auto sh = j.at("shape").get<std::vector<int>>();
            if (sh.size() != 2) throw Error(ErrorKind::ParseError, "mixture json: shape must be [h, w]");
            gmm.shape = GridShape{sh[0], sh[1]};
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("mixture json: ") + e.what());
    }
    validate_mixture(gmm);
    return gmm;
}

std::string mixture_to_json_string(const GaussianMixture& gmm) {
    nlohmann::json j;
    j["weights"] = gmm.weights;
    j["means"] = gmm.means;
    j["variances"] = gmm.variances;
    if (gmm.shape) j["shape"] = std::vector<int>{gmm.shape->height, gmm.shape->width};
    return j.dump();
}

GaussianMixture load_mixture_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open mixture file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return mixture_from_json_string(ss.str());
}

namespace {

GaussianMixture make_std2(int condition) {
    // Two unit-variance components at +/-3 along an axis rotated per
    // condition; condition 0 keeps the axis on (1, 0).
    const double theta = static_cast<double>(condition) * 0.44879895051282760549;  // pi/7
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    GaussianMixture gmm;
    gmm.weights = {0.5, 0.5};
    gmm.means = {{3.0 * ux, 3.0 * uy}, {-3.0 * ux, -3.0 * uy}};
    gmm.variances = {{1.0, 1.0}, {1.0, 1.0}};
    return gmm;
}

GaussianMixture make_grid8(int condition) {
    // Three smooth bumps on an 8x8 grid; the condition shifts the bump
    // centres so different conditions are different "images".
    constexpr int H = 8, W = 8;
    GaussianMixture gmm;
    gmm.weights = {0.5, 0.3, 0.2};
    gmm.shape = GridShape{H, W};
    const double amp[3] = {2.5, -2.0, 1.8};
    const double spread[3] = {1.6, 1.3, 1.1};
    for (int k = 0; k < 3; ++k) {
        const int cr = (1 + 3 * k + condition) % H;
        const int cc = (6 + 5 * k + 2 * condition) % W;
        std::vector<double> mean(H * W);
        for (int r = 0; r < H; ++r) {
            for (int c = 0; c < W; ++c) {
                const double dr = r - cr;
                const double dc = c - cc;
                mean[r * W + c] =
                    amp[k] * std::exp(-(dr * dr + dc * dc) / (2.0 * spread[k] * spread[k]));
            }
        }
        gmm.means.push_back(std::move(mean));
        gmm.variances.emplace_back(H * W, 0.15);
    }
    return gmm;
}

}  // namespace

bool is_builtin_mixture_family(const std::string& family) {
    return family == "std2" || family == "grid8";
}

GaussianMixture builtin_mixture(const std::string& family, int condition) {
    if (condition < 0) throw Error(ErrorKind::InvalidParameter, "condition id must be >= 0");
    GaussianMixture gmm;
    if (family == "std2") {
        gmm = make_std2(condition);
    } else if (family == "grid8") {
        gmm = make_grid8(condition);
    } else {
        throw Error(ErrorKind::InvalidParameter, "unknown builtin mixture family '" + family + "'");
    }
    validate_mixture(gmm);
    return gmm;
}

}  // namespace trendskip
