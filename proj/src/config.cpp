#include "mvsde/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>

#include "mvsde/errors.hpp"
#include "mvsde/parallel.hpp"

namespace mvsde {

namespace {

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const std::string& where, std::vector<std::string>& errs) {
    if (!obj.is_object()) {
        errs.push_back(where + " must be an object");
        return;
    }
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            errs.push_back("unknown key '" + it.key() + "' in " + where);
}

std::vector<double> as_vector(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>()};
    return j.get<std::vector<double>>();
}

} // namespace

ExperimentConfig parse_config_json(const nlohmann::json& j) {
    std::vector<std::string> errs;
    check_keys(j,
               {"model", "grid", "particles", "seed", "theta", "law_support", "threads",
                "initial", "picard", "mollifier", "experiment"},
               "config", errs);

    ExperimentConfig cfg;
    cfg.raw = j;

    // model
    cfg.model_name = "brownian";
    cfg.model_params = nlohmann::json::object();
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        static const std::map<std::string, std::set<std::string>> allowed = {
            {"brownian", {"name", "d"}},
            {"meanfield-ou", {"name", "d", "a"}},
            {"delay-linear", {"name", "d", "c"}},
            {"dini-drift", {"name", "d", "alpha", "kappa"}},
            {"singular-drift", {"name", "d", "beta", "cap"}},
        };
        if (!jm.is_object() || !jm.contains("name")) {
            errs.push_back("model must be an object with a 'name'");
        } else {
            cfg.model_name = jm.at("name").get<std::string>();
            const auto it = allowed.find(cfg.model_name);
            if (it == allowed.end()) {
                errs.push_back("unknown model '" + cfg.model_name + "'");
            } else {
                check_keys(jm, it->second, "model", errs);
                cfg.model_params = jm;
            }
        }
    }

    // grid
    double h = 0.01, r = 0, T = 1.0;
    if (j.contains("grid")) {
        const auto& jg = j.at("grid");
        check_keys(jg, {"h", "r", "T"}, "grid", errs);
        h = jg.value("h", h);
        r = jg.value("r", r);
        T = jg.value("T", T);
    }
    try {
        cfg.solver.grid = TimeGrid::make(h, r, T);
    } catch (const Error& e) {
        errs.push_back(e.what());
    }

    cfg.solver.particles = j.value("particles", 10000);
    if (cfg.solver.particles < 1) errs.push_back("particles must be >= 1");
    cfg.solver.seed = j.value("seed", uint64_t{42});
    cfg.solver.theta = j.value("theta", 2.0);
    if (cfg.solver.theta < 1) errs.push_back("theta must be >= 1");
    const std::string support = j.value("law_support", std::string("endpoint"));
    if (support == "endpoint")
        cfg.solver.law_support = SupportKind::endpoint;
    else if (support == "segment")
        cfg.solver.law_support = SupportKind::segment;
    else
        errs.push_back("law_support must be 'endpoint' or 'segment'");
    cfg.solver.threads = resolve_threads(j.value("threads", 0));

    if (j.contains("picard")) {
        const auto& jp = j.at("picard");
        check_keys(jp, {"sweeps", "levels"}, "picard", errs);
        cfg.solver.picard_sweeps = jp.value("sweeps", 1);
        if (cfg.solver.picard_sweeps < 1) errs.push_back("picard.sweeps must be >= 1");
        if (jp.contains("levels")) {
            cfg.solver.mollify_levels = jp.at("levels").get<std::vector<int>>();
            for (int n : cfg.solver.mollify_levels)
                if (n < 1) errs.push_back("picard.levels entries must be >= 1");
            if (static_cast<int>(cfg.solver.mollify_levels.size()) < cfg.solver.picard_sweeps)
                errs.push_back("picard.levels must cover every sweep");
        }
    }
    if (j.contains("mollifier")) {
        const auto& jm = j.at("mollifier");
        check_keys(jm, {"quad_points"}, "mollifier", errs);
        cfg.mollify.quad_points = jm.value("quad_points", 8);
    }
    cfg.solver.mollify_opts = cfg.mollify;

    // initial law
    int dim = 1;
    if (cfg.model_params.contains("d")) dim = cfg.model_params.at("d").get<int>();
    cfg.initial = InitialLaw::constant(std::vector<double>(static_cast<size_t>(std::max(1, dim)), 0.0));
    if (j.contains("initial")) {
        const auto& ji = j.at("initial");
        check_keys(ji, {"kind", "value", "mean", "stddev"}, "initial", errs);
        const std::string kind = ji.value("kind", std::string("constant"));
        if (kind == "constant") {
            if (ji.contains("value")) cfg.initial = InitialLaw::constant(as_vector(ji.at("value")));
        } else if (kind == "gaussian") {
            std::vector<double> mean(static_cast<size_t>(std::max(1, dim)), 0.0);
            if (ji.contains("mean")) mean = as_vector(ji.at("mean"));
            cfg.initial = InitialLaw::gaussian(mean, ji.value("stddev", 1.0));
        } else {
            errs.push_back("initial.kind must be 'constant' or 'gaussian'");
        }
    }

    cfg.experiment = j.value("experiment", nlohmann::json::object());

    if (errs.empty()) {
        try {
            cfg.model = model_zoo(cfg.model_name, cfg.model_params);
        } catch (const Error& e) {
            errs.push_back(e.what());
        }
    }
    if (!errs.empty()) throw ConfigError(errs);
    if (static_cast<int>(cfg.initial.value.size()) != cfg.model.dim)
        throw ConfigError({"initial law dimension (" + std::to_string(cfg.initial.value.size()) +
                           ") must match model dimension (" + std::to_string(cfg.model.dim) + ")"});
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError({std::string("invalid JSON: ") + e.what()});
    }
    return parse_config_json(j);
}

nlohmann::json ExperimentConfig::canonical() const {
    nlohmann::json c = raw;
    c.erase("threads"); // execution-only
    return c;
}

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char b : data) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string tool_version() { return "0.1.0"; }

RunManifest make_manifest(const ExperimentConfig& cfg, const std::string& out_dir) {
    RunManifest m;
    m.config = cfg.canonical();
    m.seed = cfg.solver.seed;
    m.tool_version = tool_version();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(
                      m.config.dump() + "#" + std::to_string(m.seed) + "#" + m.tool_version)));
    m.content_hash = buf;
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char ts[64];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    m.created_utc = ts;
    m.out_dir = out_dir;
    return m;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["config"] = config;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["content_hash"] = content_hash;
    j["created_utc"] = created_utc;
    j["out_dir"] = out_dir;
    return j;
}

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names = {
        "simulate",     "picard",           "harnack-log",       "harnack-shift",
        "harnack-power", "gradient",        "krylov-check",      "khasminskii-check",
        "wasserstein"};
    return names;
}

} // namespace mvsde
