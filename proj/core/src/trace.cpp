#include "trendskip/trace.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace trendskip {

const char* step_action_name(StepAction a) {
    return a == StepAction::Real ? "real" : "approx";
}

const char* snapshot_policy_name(SnapshotPolicy p) {
    return p == SnapshotPolicy::Full ? "full" : "hash";
}

SnapshotPolicy snapshot_policy_from_name(const std::string& name) {
    if (name == "full") return SnapshotPolicy::Full;
    if (name == "hash") return SnapshotPolicy::HashOnly;
    throw Error(ErrorKind::ParseError, "unknown snapshot policy '" + name + "'");
}

const char* deviation_metric_name(DeviationMetric m) {
    return m == DeviationMetric::MeanAbs ? "mean-abs" : "rms";
}

DeviationMetric deviation_metric_from_name(const std::string& name) {
    if (name == "mean-abs") return DeviationMetric::MeanAbs;
    if (name == "rms") return DeviationMetric::Rms;
    throw Error(ErrorKind::ParseError, "unknown deviation metric '" + name + "'");
}

namespace {

constexpr int kTraceFormatVersion = 1;

char hex_digit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string hash_to_hex(std::uint64_t h) {
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex_digit(h & 0xf);
        h >>= 4;
    }
    return out;
}

std::uint64_t hex_to_hash(const std::string& s) {
    std::uint64_t h = 0;
    for (char c : s) {
        h <<= 4;
        if (c >= '0' && c <= '9') h |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') h |= static_cast<std::uint64_t>(c - 'a' + 10);
        else throw Error(ErrorKind::ParseError, "bad hash digit in trace");
    }
    return h;
}

nlohmann::json latent_to_json(const Latent& x) {
    nlohmann::json j;
    j["values"] = x.values;
    if (x.shape) j["shape"] = std::vector<int>{x.shape->height, x.shape->width};
    return j;
}

Latent latent_from_json(const nlohmann::json& j) {
    Latent x;
    x.values = j.at("values").get<std::vector<double>>();
    if (j.contains("shape")) {
        const auto sh = j.at("shape").get<std::vector<int>>();
        if (sh.size() != 2) throw Error(ErrorKind::ParseError, "latent shape must be [h, w]");
        x.shape = GridShape{sh[0], sh[1]};
    }
    check_shape_consistent(x, "trace latent");
    return x;
}

}  // namespace

std::string trace_to_jsonl(const RunTrace& trace) {
    std::ostringstream out;

    nlohmann::json header;
    header["kind"] = "trace-header";
    header["format_version"] = kTraceFormatVersion;
    nlohmann::json cfg;
    cfg["policy"] = trace.config.policy;
    cfg["alpha"] = trace.config.alpha;
    cfg["n"] = trace.config.warmup;
    cfg["sigma"] = trace.config.sigma;
    cfg["seed"] = trace.config.seed;
    cfg["condition"] = trace.config.condition;
    cfg["snapshots"] = snapshot_policy_name(trace.config.snapshots);
    cfg["deviation_metric"] = deviation_metric_name(trace.config.deviation_metric);
    cfg["model"] = trace.config.model_spec;
    cfg["schedule"] = nlohmann::json::parse(schedule_to_json_string(trace.config.schedule));
    header["config"] = cfg;
    out << header.dump() << "\n";

    for (const StepRecord& rec : trace.steps) {
        nlohmann::json j;
        j["t"] = rec.t;
        j["action"] = step_action_name(rec.action);
        j["k"] = rec.window;
        if (rec.deviation) j["deviation"] = *rec.deviation;
        else j["deviation"] = nullptr;
        j["delta_norm"] = rec.trend_norm;
        j["output_hash"] = hash_to_hex(rec.output_hash);
        if (rec.latent) j["latent"] = latent_to_json(*rec.latent);
        if (rec.output) j["output"] = latent_to_json(*rec.output);
        out << j.dump() << "\n";
    }

    nlohmann::json footer;
    footer["kind"] = "trace-final";
    footer["final_latent"] = latent_to_json(trace.final_latent);
    footer["nfe"] = trace.nfe;
    footer["total_steps"] = trace.total_steps;
    out << footer.dump() << "\n";
    return out.str();
}

RunTrace trace_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    RunTrace trace;
    bool have_header = false;
    bool have_footer = false;
    int line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::ParseError,
                        "trace line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (j.value("kind", "") != "trace-header") {
                    throw Error(ErrorKind::ParseError, "trace must start with a header line");
                }
                if (j.at("format_version").get<int>() != kTraceFormatVersion) {
                    throw Error(ErrorKind::ParseError, "unsupported trace format version");
                }
                const auto& cfg = j.at("config");
                trace.config.policy = cfg.at("policy").get<std::string>();
                trace.config.alpha = cfg.at("alpha").get<double>();
                trace.config.warmup = cfg.at("n").get<int>();
                trace.config.sigma = cfg.at("sigma").get<double>();
                trace.config.seed = cfg.at("seed").get<std::uint64_t>();
                trace.config.condition = cfg.at("condition").get<int>();
                trace.config.snapshots =
                    snapshot_policy_from_name(cfg.at("snapshots").get<std::string>());
                trace.config.deviation_metric =
                    deviation_metric_from_name(cfg.at("deviation_metric").get<std::string>());
                trace.config.model_spec = cfg.at("model").get<std::string>();
                trace.config.schedule = schedule_from_json_string(cfg.at("schedule").dump());
                have_header = true;
                continue;
            }
            if (j.value("kind", "") == "trace-final") {
                trace.final_latent = latent_from_json(j.at("final_latent"));
                trace.nfe = j.at("nfe").get<int>();
                trace.total_steps = j.at("total_steps").get<int>();
                have_footer = true;
                continue;
            }
            StepRecord rec;
            rec.t = j.at("t").get<int>();
            const std::string action = j.at("action").get<std::string>();
            if (action == "real") rec.action = StepAction::Real;
            else if (action == "approx") rec.action = StepAction::Approx;
            else throw Error(ErrorKind::ParseError, "unknown step action '" + action + "'");
            rec.window = j.at("k").get<int>();
            if (!j.at("deviation").is_null()) rec.deviation = j.at("deviation").get<double>();
            rec.trend_norm = j.at("delta_norm").get<double>();
            rec.output_hash = hex_to_hash(j.at("output_hash").get<std::string>());
            if (j.contains("latent")) rec.latent = latent_from_json(j.at("latent"));
            if (j.contains("output")) rec.output = latent_from_json(j.at("output"));
            trace.steps.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ParseError,
                        "trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw Error(ErrorKind::ParseError, "trace has no header line");
    if (!have_footer) throw Error(ErrorKind::ParseError, "trace has no final line");
    return trace;
}

void save_trace(const RunTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write trace file '" + path + "'");
    out << trace_to_jsonl(trace);
    if (!out) throw Error(ErrorKind::IoError, "failed writing trace file '" + path + "'");
}

RunTrace load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open trace file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return trace_from_jsonl(ss.str());
}

}  // namespace trendskip
