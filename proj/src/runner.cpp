#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "mvsde/config.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/girsanov.hpp"
#include "mvsde/verify.hpp"

namespace mvsde {

namespace {

namespace fs = std::filesystem;

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void append_results(const fs::path& dir, const std::vector<std::string>& rows) {
    const fs::path path = dir / "results.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error("cannot write " + path.string());
    if (fresh) out << HarnackReport::csv_header() << "\n";
    for (const auto& r : rows) out << r << "\n";
}

Eta eta_from_json(const nlohmann::json& spec, const TimeGrid& grid, int dim) {
    const std::string kind = spec.value("kind", "zero");
    if (kind == "zero") return Eta::zero(grid, dim);
    if (kind == "affine") {
        std::vector<double> c0(static_cast<size_t>(dim), 0.0), c1(static_cast<size_t>(dim), 0.0);
        if (spec.contains("c0")) c0 = spec.at("c0").get<std::vector<double>>();
        if (spec.contains("c1")) c1 = spec.at("c1").get<std::vector<double>>();
        return Eta::affine(grid, c0, c1);
    }
    throw InvalidInput("unknown eta kind '" + kind + "'");
}

VerifyOptions options_from(const nlohmann::json& exp, const std::string& hash) {
    VerifyOptions o;
    o.trial_C = exp.value("trial_C", 1.0);
    o.trial_H2 = exp.value("trial_H2", 1.0);
    o.beta_C = exp.value("beta_C", 2.0);
    o.p = exp.value("p", 2.0);
    o.p0 = exp.value("p0", 2.0);
    o.ball_samples = exp.value("ball_samples", 8);
    o.flow_particles = exp.value("flow_particles", 20000);
    o.manifest_hash = hash;
    return o;
}

void validate_experiment(const std::string& name, const nlohmann::json& exp) {
    static const std::map<std::string, std::set<std::string>> allowed = {
        {"simulate", {"mode", "dump_particles", "dump_flow"}},
        {"picard", {"mode", "dump_particles", "dump_flow"}},
        {"harnack-log", {"t", "f", "gap", "trial_C"}},
        {"harnack-shift", {"t", "eta", "f", "p", "beta_C", "flow_particles", "dump_particles"}},
        {"harnack-power", {"t", "f", "p", "p0", "gap", "trial_H2"}},
        {"gradient", {"t", "f", "gap", "trial_C", "ball_samples"}},
        {"krylov-check", {"f", "p", "q", "pairs"}},
        {"khasminskii-check", {"f", "p", "q", "pairs", "lambdas"}},
        {"wasserstein", {"a", "b", "theta", "method"}},
    };
    const auto it = allowed.find(name);
    if (it == allowed.end()) throw InvalidInput("unknown subcommand '" + name + "'");
    std::vector<std::string> errs;
    for (auto jt = exp.begin(); jt != exp.end(); ++jt)
        if (!it->second.count(jt.key()))
            errs.push_back("unknown key '" + jt.key() + "' in experiment for " + name);
    if (!errs.empty()) throw ConfigError(errs);
}

void dump_flow_csvs(const fs::path& out, const LawFlow& flow) {
    fs::create_directories(out / "laws");
    for (size_t k = 0; k < flow.laws.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "law_%05zu.csv", k);
        std::ofstream os(out / "laws" / name);
        write_law_csv(os, flow.laws[k]);
    }
}

std::vector<std::pair<double, double>> pairs_from(const nlohmann::json& exp, const TimeGrid& grid) {
    std::vector<std::pair<double, double>> pairs;
    if (exp.contains("pairs")) {
        for (const auto& pr : exp.at("pairs"))
            pairs.emplace_back(pr.at(0).get<double>(), pr.at(1).get<double>());
    } else {
        for (double frac : {1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0}) {
            const double t = frac * grid.T;
            pairs.emplace_back(0.0, grid.h * std::lround(t / grid.h));
        }
    }
    return pairs;
}

int run_simulate(ExperimentConfig& cfg, const fs::path& out, const RunManifest& manifest) {
    const auto& exp = cfg.experiment;
    const std::string mode = exp.value("mode", std::string("interacting"));
    nlohmann::json summary;
    summary["manifest_hash"] = manifest.content_hash;
    summary["mode"] = mode;
    const int dump_n = exp.value("dump_particles", 4);

    auto dump_trajectories = [&](const ParticleEnsemble& ens) {
        fs::create_directories(out / "trajectories");
        for (int i = 0; i < std::min(dump_n, ens.particles()); ++i) {
            std::ofstream os(out / "trajectories" / ("particle_" + std::to_string(i) + ".csv"));
            write_trajectory_csv(os, ens.trajs[static_cast<size_t>(i)]);
        }
    };
    auto endpoint_stats = [&](const ParticleEnsemble& ens) {
        const int node = ens.grid.total_nodes() - 1;
        StatEstimate mean = batch_mean_fn(ens.particles(), [&](int64_t i) {
            return ens.trajs[static_cast<size_t>(i)].node(node)[0];
        });
        StatEstimate sq = batch_mean_fn(ens.particles(), [&](int64_t i) {
            const double v = ens.trajs[static_cast<size_t>(i)].node(node)[0];
            return v * v;
        });
        summary["endpoint_mean"] = mean.value;
        summary["endpoint_mean_ci"] = mean.ci;
        summary["endpoint_var"] = sq.value - mean.value * mean.value;
    };

    if (mode == "interacting") {
        cfg.solver.mode = Mode::interacting;
        cfg.solver.record_flow = exp.value("dump_flow", false);
        auto [ens, flow] = run_interacting(cfg.model, cfg.solver, cfg.initial);
        dump_trajectories(ens);
        endpoint_stats(ens);
        if (cfg.solver.record_flow && !flow.laws.empty()) dump_flow_csvs(out, flow);
    } else if (mode == "frozen-law") {
        cfg.solver.mode = Mode::frozen_law;
        const LawFlow flow = initial_law_flow(cfg.solver, cfg.model.dim, cfg.initial);
        const ParticleEnsemble ens = run_frozen_law(cfg.model, flow, cfg.solver, cfg.initial);
        dump_trajectories(ens);
        endpoint_stats(ens);
    } else if (mode == "picard") {
        cfg.solver.mode = Mode::picard;
        const PicardResult res = run_picard(cfg.model, cfg.solver, cfg.initial);
        dump_trajectories(res.final_ensemble);
        endpoint_stats(res.final_ensemble);
        summary["sweep_distances"] = res.sweep_distances;
        summary["node_distances"] = res.node_distances;
        summary["nondecreasing_warning"] = res.nondecreasing_warning;
        if (exp.value("dump_flow", false)) dump_flow_csvs(out, res.flows.back());
    } else {
        throw InvalidInput("unknown simulate mode '" + mode + "'");
    }
    write_text(out / "summary.json", summary.dump(2) + "\n");
    return 0;
}

int run_wasserstein(ExperimentConfig& cfg, const fs::path& out, const RunManifest& manifest) {
    const auto& exp = cfg.experiment;
    if (!exp.contains("a") || !exp.contains("b"))
        throw InvalidInput("wasserstein needs experiment.a and experiment.b law CSV paths");
    std::ifstream fa(exp.at("a").get<std::string>()), fb(exp.at("b").get<std::string>());
    if (!fa || !fb) throw InvalidInput("cannot open law CSV inputs");
    const double theta = exp.value("theta", cfg.solver.theta);
    const EmpiricalLaw a = read_law_csv(fa, theta);
    const EmpiricalLaw b = read_law_csv(fb, theta);
    WassersteinOptions opts;
    if (exp.value("method", std::string("exact")) == "entropic") opts.method = OtMethod::entropic;
    const WassersteinResult res = wasserstein_theta_full(a, b, theta, opts);
    std::cout << fmt12(res.value) << "\n";
    nlohmann::json j;
    j["value"] = res.value;
    j["duality_gap"] = res.duality_gap;
    j["iterations"] = res.iterations;
    j["manifest_hash"] = manifest.content_hash;
    write_text(out / "report.json", j.dump(2) + "\n");
    return 0;
}

} // namespace

int run_subcommand(const std::string& name, ExperimentConfig& cfg, const std::string& out_dir) {
    validate_experiment(name, cfg.experiment);
    const fs::path out(out_dir);
    fs::create_directories(out);
    const RunManifest manifest = make_manifest(cfg, out_dir);
    write_text(out / "manifest.json", manifest.to_json().dump(2) + "\n");
    const auto& exp = cfg.experiment;

    if (name == "simulate") return run_simulate(cfg, out, manifest);
    if (name == "picard") {
        ExperimentConfig c = cfg;
        c.experiment["mode"] = "picard";
        return run_simulate(c, out, manifest);
    }
    if (name == "wasserstein") return run_wasserstein(cfg, out, manifest);

    const VerifyOptions opts = options_from(exp, manifest.content_hash);
    std::vector<std::string> rows;
    nlohmann::json reports = nlohmann::json::array();
    int code = 0;

    if (name == "harnack-log") {
        const TestFunctional f = TestFunctional::from_json(exp.value("f", nlohmann::json::object()));
        std::vector<double> ts;
        if (exp.at("t").is_array())
            ts = exp.at("t").get<std::vector<double>>();
        else
            ts = {exp.at("t").get<double>()};
        const std::vector<double> gap =
            exp.contains("gap") ? exp.at("gap").get<std::vector<double>>()
                                : std::vector<double>(static_cast<size_t>(cfg.model.dim), 0.0);
        for (const auto& rep : verify_log_harnack(cfg.model, cfg.solver, cfg.initial, gap, ts,
                                                  f, opts)) {
            rows.push_back(rep.csv_row());
            reports.push_back(rep.to_json());
            code = std::max(code, rep.exit_code());
        }
    } else if (name == "harnack-shift") {
        const TestFunctional f = TestFunctional::from_json(exp.value("f", nlohmann::json::object()));
        const double t = exp.value("t", cfg.solver.grid.T);
        const Eta eta = eta_from_json(exp.value("eta", nlohmann::json::object()),
                                      cfg.solver.grid, cfg.model.dim);
        const ShiftHarnackResult res =
            verify_shift_harnack(cfg.model, cfg.solver, cfg.initial, t, eta, f, opts);
        for (const HarnackReport* rep : {&res.log_form, &res.power_form}) {
            rows.push_back(rep->csv_row());
            reports.push_back(rep->to_json());
            code = std::max(code, rep->exit_code());
        }
        // coupling artifacts: per-particle weights and a few coupled paths
        {
            std::ofstream os(out / "coupling.csv");
            os << "particle,R,logR,int_phi_sq\n";
            char buf[64];
            for (size_t i = 0; i < res.coupled.log_weight.size(); ++i) {
                os << i;
                std::snprintf(buf, sizeof buf, "%.12g", std::exp(res.coupled.log_weight[i]));
                os << ',' << buf;
                std::snprintf(buf, sizeof buf, "%.12g", res.coupled.log_weight[i]);
                os << ',' << buf;
                std::snprintf(buf, sizeof buf, "%.12g", res.coupled.int_phi_sq[i]);
                os << ',' << buf << "\n";
            }
        }
        const int dump_n =
            std::min(exp.value("dump_particles", 4), res.coupled.x.particles());
        fs::create_directories(out / "trajectories_x");
        fs::create_directories(out / "trajectories_xbar");
        const ParticleEnsemble xbar = [&] {
            ParticleEnsemble few;
            few.grid = res.coupled.x.grid;
            few.dim = res.coupled.x.dim;
            for (int i = 0; i < dump_n; ++i) few.trajs.push_back(res.coupled.x.trajs[i]);
            ParticleEnsemble shifted = few;
            for (auto& tr : shifted.trajs)
                for (int k = 0; k < few.grid.total_nodes(); ++k)
                    for (int c2 = 0; c2 < few.dim; ++c2)
                        tr.node(k)[c2] += res.coupled.coupling.gamma_at(k)[c2];
            return shifted;
        }();
        for (int i = 0; i < dump_n; ++i) {
            std::ofstream ox(out / "trajectories_x" / ("particle_" + std::to_string(i) + ".csv"));
            write_trajectory_csv(ox, res.coupled.x.trajs[i]);
            std::ofstream ob(out / "trajectories_xbar" / ("particle_" + std::to_string(i) + ".csv"));
            write_trajectory_csv(ob, xbar.trajs[i]);
        }
    } else if (name == "harnack-power") {
        const TestFunctional f = TestFunctional::from_json(exp.value("f", nlohmann::json::object()));
        const double t = exp.value("t", cfg.solver.grid.T);
        const std::vector<double> gap =
            exp.contains("gap") ? exp.at("gap").get<std::vector<double>>()
                                : std::vector<double>(static_cast<size_t>(cfg.model.dim), 0.0);
        const HarnackReport rep =
            verify_power_harnack(cfg.model, cfg.solver, cfg.initial, gap, t, f, opts);
        rows.push_back(rep.csv_row());
        reports.push_back(rep.to_json());
        code = rep.exit_code();
    } else if (name == "gradient") {
        const TestFunctional f = TestFunctional::from_json(exp.value("f", nlohmann::json::object()));
        const double t = exp.value("t", cfg.solver.grid.T);
        const std::vector<double> gap = exp.at("gap").get<std::vector<double>>();
        const HarnackReport rep =
            verify_gradient_estimate(cfg.model, cfg.solver, cfg.initial, gap, t, f, opts);
        rows.push_back(rep.csv_row());
        reports.push_back(rep.to_json());
        code = rep.exit_code();
    } else if (name == "krylov-check") {
        const double p = exp.value("p", 3.0), q = exp.value("q", 3.0);
        const OccupationFunction f = OccupationFunction::from_json(
            exp.value("f", nlohmann::json::object()), cfg.solver.grid, cfg.model.dim, p, q);
        const KrylovReport rep = krylov_check(cfg.model, cfg.solver, cfg.initial, f, p, q,
                                              pairs_from(exp, cfg.solver.grid), opts);
        rows.push_back(rep.csv_row());
        reports.push_back(rep.to_json());
        code = rep.exit_code();
    } else if (name == "khasminskii-check") {
        const double p = exp.value("p", 3.0), q = exp.value("q", 3.0);
        const OccupationFunction f = OccupationFunction::from_json(
            exp.value("f", nlohmann::json::object()), cfg.solver.grid, cfg.model.dim, p, q);
        const std::vector<double> lambdas =
            exp.contains("lambdas") ? exp.at("lambdas").get<std::vector<double>>()
                                    : std::vector<double>{1.0, 2.0, 4.0};
        const KhasminskiiReport rep = khasminskii_check(cfg.model, cfg.solver, cfg.initial, f,
                                                        lambdas, pairs_from(exp, cfg.solver.grid),
                                                        opts);
        rows.push_back(rep.csv_row());
        reports.push_back(rep.to_json());
        code = rep.exit_code();
    } else {
        throw InvalidInput("unknown subcommand '" + name + "'");
    }

    append_results(out, rows);
    write_text(out / "report.json", reports.dump(2) + "\n");
    for (const auto& r : reports)
        std::cout << r.value("inequality", name) << ": " << r.value("verdict", "") << "\n";
    return code;
}

} // namespace mvsde
