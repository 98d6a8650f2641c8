#include "trendskip/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"

namespace trendskip {

const char* schedule_kind_name(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::VpDdim: return "variance-preserving-ddim";
        case ScheduleKind::RectifiedFlow: return "rectified-flow";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
    if (name == "variance-preserving-ddim" || name == "vp") return ScheduleKind::VpDdim;
    if (name == "rectified-flow" || name == "flow") return ScheduleKind::RectifiedFlow;
    throw Error(ErrorKind::ParseError, "unknown schedule kind '" + name + "'");
}

NoiseSchedule build_vp_schedule(int T, double beta_min, double beta_max) {
    if (T < 2) throw Error(ErrorKind::InvalidParameter, "vp schedule needs T >= 2");
    if (!(beta_min > 0.0) || !(beta_min < beta_max) || !(beta_max < 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "vp schedule needs 0 < beta_min < beta_max < 1");
    }

    NoiseSchedule sched;
    sched.kind = ScheduleKind::VpDdim;
    sched.T = T;
    sched.beta_min = beta_min;
    sched.beta_max = beta_max;
    sched.a.resize(T + 1);
    sched.s.resize(T + 1);
    sched.f.resize(T);
    sched.g.resize(T);

    // Cumulative retained signal: abar_0 = 1 (clean data), abar_t shrinking
    // with t as noise accumulates.
    sched.a[0] = 1.0;
    sched.s[0] = 0.0;
    double abar = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = static_cast<double>(t - 1) / static_cast<double>(T - 1);
        const double beta = beta_min + (beta_max - beta_min) * frac;
        abar *= 1.0 - beta;
        sched.a[t] = std::sqrt(abar);
        sched.s[t] = std::sqrt(1.0 - abar);
    }

    for (int t = 1; t <= T; ++t) {
        sched.f[t - 1] = sched.a[t - 1] / sched.a[t];
        sched.g[t - 1] = sched.a[t - 1] * sched.s[t] / sched.a[t] - sched.s[t - 1];
        if (!(sched.g[t - 1] >= 0.0)) {
            throw Error(ErrorKind::NumericError, "vp schedule produced a negative noise gain");
        }
    }
    return sched;
}

NoiseSchedule build_flow_schedule(int T) {
    if (T < 2) throw Error(ErrorKind::InvalidParameter, "flow schedule needs T >= 2");

    NoiseSchedule sched;
    sched.kind = ScheduleKind::RectifiedFlow;
    sched.T = T;
    sched.a.resize(T + 1);
    sched.s.resize(T + 1);
    sched.f.assign(T, 1.0);
    sched.g.assign(T, 1.0 / static_cast<double>(T));
    for (int t = 0; t <= T; ++t) {
        const double tau = static_cast<double>(t) / static_cast<double>(T);
        sched.s[t] = tau;        // noise fraction
        sched.a[t] = 1.0 - tau;  // signal fraction
    }
    return sched;
}

Latent denoise_step(const Latent& x, const Latent& eps, int t, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) {
        throw Error(ErrorKind::TimestepOutOfRange,
                    "denoise_step at t=" + std::to_string(t) + " with T=" + std::to_string(sched.T));
    }
    check_same_dim(x, eps, "denoise_step");
    const double f = sched.f[t - 1];
    const double g = sched.g[t - 1];
    Latent out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] = f * x.values[i] - g * eps.values[i];
    }
    check_finite(out, "denoise_step");
    return out;
}

std::string schedule_to_json_string(const NoiseSchedule& sched) {
    nlohmann::json j;
    j["kind"] = schedule_kind_name(sched.kind);
    j["T"] = sched.T;
    j["f"] = sched.f;
    j["g"] = sched.g;
    j["a"] = sched.a;
    j["s"] = sched.s;
    if (sched.kind == ScheduleKind::VpDdim) {
        j["beta_min"] = sched.beta_min;
        j["beta_max"] = sched.beta_max;
    }
    return j.dump();
}

NoiseSchedule schedule_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("schedule json: ") + e.what());
    }
    NoiseSchedule sched;
    try {
        sched.kind = schedule_kind_from_name(j.at("kind").get<std::string>());
        sched.T = j.at("T").get<int>();
        sched.f = j.at("f").get<std::vector<double>>();
        sched.g = j.at("g").get<std::vector<double>>();
        sched.a = j.at("a").get<std::vector<double>>();
        sched.s = j.at("s").get<std::vector<double>>();
        sched.beta_min = j.value("beta_min", 0.0);
        sched.beta_max = j.value("beta_max", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("schedule json: ") + e.what());
    }
    const std::size_t T = static_cast<std::size_t>(sched.T);
    if (sched.T < 2 || sched.f.size() != T || sched.g.size() != T || sched.a.size() != T + 1 ||
        sched.s.size() != T + 1) {
        throw Error(ErrorKind::ParseError, "schedule json: inconsistent array lengths");
    }
    return sched;
}

namespace {

std::map<std::string, std::string> parse_kv_list(const std::string& text, const char* what) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ParseError, std::string(what) + ": expected key=value, got '" + item + "'");
        }
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
}

double to_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, std::string(what) + ": bad number '" + s + "'");
    }
}

int to_int(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, std::string(what) + ": bad integer '" + s + "'");
    }
}

}  // namespace

NoiseSchedule schedule_from_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto kv = parse_kv_list(rest, "schedule spec");

    auto take_int = [&](const char* key, int def, bool required) {
        auto it = kv.find(key);
        if (it == kv.end()) {
            if (required) throw Error(ErrorKind::ParseError, std::string("schedule spec: missing ") + key);
            return def;
        }
        const int v = to_int(it->second, "schedule spec");
        kv.erase(it);
        return v;
    };
    auto take_double = [&](const char* key, double def) {
        auto it = kv.find(key);
        if (it == kv.end()) return def;
        const double v = to_double(it->second, "schedule spec");
        kv.erase(it);
        return v;
    };

    NoiseSchedule out;
    if (kind == "vp") {
        const int T = take_int("T", 0, true);
        const double bmin = take_double("beta_min", 1e-4);
        const double bmax = take_double("beta_max", 2e-2);
        out = build_vp_schedule(T, bmin, bmax);
    } else if (kind == "flow") {
        const int T = take_int("T", 0, true);
        out = build_flow_schedule(T);
    } else {
        throw Error(ErrorKind::ParseError, "schedule spec: unknown kind '" + kind + "'");
    }
    if (!kv.empty()) {
        throw Error(ErrorKind::ParseError, "schedule spec: unknown key '" + kv.begin()->first + "'");
    }
    return out;
}

std::string schedule_to_spec(const NoiseSchedule& sched) {
    char buf[128];
    if (sched.kind == ScheduleKind::VpDdim) {
        std::snprintf(buf, sizeof(buf), "vp:T=%d,beta_min=%.12g,beta_max=%.12g", sched.T,
                      sched.beta_min, sched.beta_max);
    } else {
        std::snprintf(buf, sizeof(buf), "flow:T=%d", sched.T);
    }
    return buf;
}

}  // namespace trendskip
