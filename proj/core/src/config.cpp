#include "trendskip/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "trendskip/oracle.hpp"

namespace trendskip {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

struct RawConfig {
    // "section.key" -> (value, line number for diagnostics)
    std::map<std::string, std::pair<std::string, int>> entries;
};

RawConfig parse_raw(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw Error(ErrorKind::ParseError,
                            "line " + std::to_string(line_no) + ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw Error(ErrorKind::ParseError,
                            "line " + std::to_string(line_no) + ": empty section name");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line_no) + ": expected key = value");
        }
        if (section.empty()) {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line_no) + ": key outside any [section]");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": empty key");
        }
        raw.entries[section + "." + key] = {value, line_no};
    }
    return raw;
}

class FieldReader {
public:
    explicit FieldReader(RawConfig raw) : raw_(std::move(raw)) {}

    std::optional<std::string> take(const std::string& field) {
        auto it = raw_.entries.find(field);
        if (it == raw_.entries.end()) return std::nullopt;
        std::string value = it->second.first;
        raw_.entries.erase(it);
        return value;
    }

    void reject_unknown() const {
        if (!raw_.entries.empty()) {
            const auto& [field, entry] = *raw_.entries.begin();
            throw Error(ErrorKind::ParseError, "line " + std::to_string(entry.second) +
                                                   ": unknown key '" + field + "'");
        }
    }

private:
    RawConfig raw_;
};

double parse_double_field(const std::string& field, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, field + ": bad number '" + value + "'");
    }
}

int parse_int_field(const std::string& field, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, field + ": bad integer '" + value + "'");
    }
}

std::vector<std::string> split_csv(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text,
                              const std::vector<ConfigOverride>& overrides) {
    RawConfig raw = parse_raw(text);
    for (const auto& [field, value] : overrides) {
        if (field.find('.') == std::string::npos) {
            throw Error(ErrorKind::ParseError, "override '" + field + "' must be section.key");
        }
        raw.entries[field] = {value, 0};
    }
    FieldReader reader(std::move(raw));
    ExperimentConfig cfg;

    if (auto v = reader.take("schedule.kind")) cfg.schedule_kind = schedule_kind_from_name(*v);
    if (auto v = reader.take("schedule.steps")) cfg.steps = parse_int_field("schedule.steps", *v);
    if (auto v = reader.take("schedule.beta_min")) {
        cfg.beta_min = parse_double_field("schedule.beta_min", *v);
    }
    if (auto v = reader.take("schedule.beta_max")) {
        cfg.beta_max = parse_double_field("schedule.beta_max", *v);
    }

    if (auto v = reader.take("model.spec")) cfg.model_spec = *v;
    if (auto v = reader.take("model.condition")) {
        cfg.condition = parse_int_field("model.condition", *v);
    }
    if (auto v = reader.take("model.search_conditions")) {
        cfg.search_conditions.clear();
        for (const std::string& item : split_csv(*v)) {
            cfg.search_conditions.push_back(parse_int_field("model.search_conditions", item));
        }
    }

    if (auto v = reader.take("policy.name")) cfg.policy = policy_kind_from_name(*v);
    if (auto v = reader.take("policy.alpha")) cfg.alpha = parse_double_field("policy.alpha", *v);
    if (auto v = reader.take("policy.n")) cfg.warmup = parse_int_field("policy.n", *v);
    if (auto v = reader.take("policy.sigma")) {
        if (*v == "search") cfg.sigma.reset();
        else cfg.sigma = parse_double_field("policy.sigma", *v);
    }
    if (auto v = reader.take("policy.deviation_metric")) {
        cfg.deviation_metric = deviation_metric_from_name(*v);
    }

    if (auto v = reader.take("run.seeds")) {
        cfg.seeds.clear();
        for (const std::string& item : split_csv(*v)) {
            try {
                cfg.seeds.push_back(std::stoull(item));
            } catch (const std::exception&) {
                throw Error(ErrorKind::ParseError, "run.seeds: bad seed '" + item + "'");
            }
        }
    }
    if (auto v = reader.take("run.snapshots")) cfg.snapshots = snapshot_policy_from_name(*v);
    if (auto v = reader.take("run.out_dir")) cfg.out_dir = *v;
    if (auto v = reader.take("run.threads")) cfg.threads = parse_int_field("run.threads", *v);

    if (auto v = reader.take("search.seeds_per_condition")) {
        cfg.search_seeds = parse_int_field("search.seeds_per_condition", *v);
    }
    if (auto v = reader.take("search.metric")) cfg.search_metric = sim_metric_from_name(*v);

    if (auto v = reader.take("sweep.sigmas")) {
        cfg.sweep_sigmas.clear();
        for (const std::string& item : split_csv(*v)) {
            cfg.sweep_sigmas.push_back(parse_double_field("sweep.sigmas", item));
        }
    }
    if (auto v = reader.take("sweep.n_grid")) {
        cfg.sweep_warmups.clear();
        for (const std::string& item : split_csv(*v)) {
            cfg.sweep_warmups.push_back(parse_int_field("sweep.n_grid", item));
        }
    }
    if (auto v = reader.take("sweep.alpha_grid")) {
        cfg.sweep_alphas.clear();
        for (const std::string& item : split_csv(*v)) {
            cfg.sweep_alphas.push_back(parse_double_field("sweep.alpha_grid", item));
        }
    }

    reader.reject_unknown();

    // Validation.
    if (cfg.steps < 2) throw Error(ErrorKind::ValidationError, "schedule.steps must be >= 2");
    if (cfg.schedule_kind == ScheduleKind::VpDdim &&
        (!(cfg.beta_min > 0.0) || !(cfg.beta_min < cfg.beta_max) || !(cfg.beta_max < 1.0))) {
        throw Error(ErrorKind::ValidationError, "need 0 < beta_min < beta_max < 1");
    }
    if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0) {
        throw Error(ErrorKind::ValidationError, "policy.alpha must lie in (0, 1]");
    }
    if (cfg.policy != PolicyKind::Full) {
        if (cfg.warmup < 1) throw Error(ErrorKind::ValidationError, "policy.n must be >= 1");
        if (cfg.warmup + 2 > cfg.steps) {
            throw Error(ErrorKind::ValidationError, "need policy.n + 2 <= schedule.steps");
        }
    }
    if (cfg.sigma && !(*cfg.sigma > 0.0)) {
        throw Error(ErrorKind::ValidationError, "policy.sigma must be > 0");
    }
    if (cfg.seeds.empty()) throw Error(ErrorKind::ValidationError, "run.seeds must be nonempty");
    if (cfg.condition < 0) throw Error(ErrorKind::ValidationError, "model.condition must be >= 0");
    if (cfg.search_conditions.empty()) {
        throw Error(ErrorKind::ValidationError, "model.search_conditions must be nonempty");
    }
    if (cfg.search_seeds < 1) {
        throw Error(ErrorKind::ValidationError, "search.seeds_per_condition must be >= 1");
    }
    if (cfg.threads < 1) throw Error(ErrorKind::ValidationError, "run.threads must be >= 1");

    // The model spec must resolve; for file-backed specs this also checks the
    // file exists and parses.
    (void)model_from_spec(cfg.model_spec, build_schedule(cfg));

    return cfg;
}

ExperimentConfig load_config_file(const std::string& path,
                                  const std::vector<ConfigOverride>& overrides) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

std::string emit_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[schedule]\n";
    if (cfg.schedule_kind == ScheduleKind::VpDdim) {
        out << "beta_max = " << format_double(cfg.beta_max) << "\n";
        out << "beta_min = " << format_double(cfg.beta_min) << "\n";
    }
    out << "kind = " << (cfg.schedule_kind == ScheduleKind::VpDdim ? "vp" : "flow") << "\n";
    out << "steps = " << cfg.steps << "\n";

    out << "\n[model]\n";
    out << "condition = " << cfg.condition << "\n";
    out << "search_conditions = ";
    for (std::size_t i = 0; i < cfg.search_conditions.size(); ++i) {
        out << (i ? "," : "") << cfg.search_conditions[i];
    }
    out << "\n";
    out << "spec = " << cfg.model_spec << "\n";

    out << "\n[policy]\n";
    out << "alpha = " << format_double(cfg.alpha) << "\n";
    out << "deviation_metric = " << deviation_metric_name(cfg.deviation_metric) << "\n";
    out << "n = " << cfg.warmup << "\n";
    out << "name = " << policy_kind_name(cfg.policy) << "\n";
    out << "sigma = " << (cfg.sigma ? format_double(*cfg.sigma) : "search") << "\n";

    out << "\n[run]\n";
    if (!cfg.out_dir.empty()) out << "out_dir = " << cfg.out_dir << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "snapshots = " << snapshot_policy_name(cfg.snapshots) << "\n";
    out << "threads = " << cfg.threads << "\n";

    out << "\n[search]\n";
    out << "metric = " << sim_metric_name(cfg.search_metric) << "\n";
    out << "seeds_per_condition = " << cfg.search_seeds << "\n";

    if (!cfg.sweep_sigmas.empty() || !cfg.sweep_warmups.empty() || !cfg.sweep_alphas.empty()) {
        out << "\n[sweep]\n";
        if (!cfg.sweep_alphas.empty()) {
            out << "alpha_grid = ";
            for (std::size_t i = 0; i < cfg.sweep_alphas.size(); ++i) {
                out << (i ? "," : "") << format_double(cfg.sweep_alphas[i]);
            }
            out << "\n";
        }
        if (!cfg.sweep_warmups.empty()) {
            out << "n_grid = ";
            for (std::size_t i = 0; i < cfg.sweep_warmups.size(); ++i) {
                out << (i ? "," : "") << cfg.sweep_warmups[i];
            }
            out << "\n";
        }
        if (!cfg.sweep_sigmas.empty()) {
            out << "sigmas = ";
            for (std::size_t i = 0; i < cfg.sweep_sigmas.size(); ++i) {
                out << (i ? "," : "") << format_double(cfg.sweep_sigmas[i]);
            }
            out << "\n";
        }
    }
    return out.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.schedule_kind == b.schedule_kind && a.steps == b.steps && a.beta_min == b.beta_min &&
           a.beta_max == b.beta_max && a.model_spec == b.model_spec &&
           a.condition == b.condition && a.search_conditions == b.search_conditions &&
           a.policy == b.policy && a.alpha == b.alpha && a.warmup == b.warmup &&
           a.sigma == b.sigma && a.deviation_metric == b.deviation_metric && a.seeds == b.seeds &&
           a.snapshots == b.snapshots && a.out_dir == b.out_dir && a.threads == b.threads &&
           a.search_seeds == b.search_seeds && a.search_metric == b.search_metric &&
           a.sweep_sigmas == b.sweep_sigmas && a.sweep_warmups == b.sweep_warmups &&
           a.sweep_alphas == b.sweep_alphas;
}

NoiseSchedule build_schedule(const ExperimentConfig& cfg) {
    if (cfg.schedule_kind == ScheduleKind::VpDdim) {
        return build_vp_schedule(cfg.steps, cfg.beta_min, cfg.beta_max);
    }
    return build_flow_schedule(cfg.steps);
}

}  // namespace trendskip
