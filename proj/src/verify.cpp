#include "mvsde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "mvsde/errors.hpp"

namespace mvsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

double endpoint0(SegmentView v) { return v.node(v.nodes() - 1)[0]; }

double window_mean0(SegmentView v) {
    double s = 0;
    for (int j = 0; j < v.nodes(); ++j) s += v.node(j)[0];
    return s / v.nodes();
}

TimeGrid truncate_grid(const TimeGrid& g, double t) {
    if (!(t > g.r))
        throw InvalidInput("verifier time must satisfy t > r (got t=" + std::to_string(t) + ")");
    g.index_of(t); // validates on-grid and t <= T
    return TimeGrid::make(g.h, g.r, t);
}

StatEstimate mul_independent(const StatEstimate& a, const StatEstimate& b) {
    StatEstimate out;
    out.value = a.value * b.value;
    const double ra = a.value != 0 ? a.ci / std::abs(a.value) : 0;
    const double rb = b.value != 0 ? b.ci / std::abs(b.value) : 0;
    out.ci = std::abs(out.value) * std::sqrt(ra * ra + rb * rb);
    out.count = std::min(a.count, b.count);
    out.batches = std::min(a.batches, b.batches);
    out.low_sample = a.low_sample || b.low_sample;
    return out;
}

StatEstimate functional_mean(const ParticleEnsemble& ens, int node, const TestFunctional& f) {
    return batch_mean_fn(ens.particles(), [&](int64_t i) {
        return f(segment_view(ens.trajs[static_cast<size_t>(i)], node));
    });
}

void check_geq_one(const ParticleEnsemble& ens, int node, const TestFunctional& f) {
    if (!f.geq_one) throw InvalidInput("test functional must be declared f >= 1");
    for (int i = 0; i < ens.particles(); ++i) {
        if (f(segment_view(ens.trajs[static_cast<size_t>(i)], node)) < 1.0 - 1e-9)
            throw InvalidInput("test functional dropped below 1 on a sample");
    }
}

double sq_norm_vec(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return s;
}

} // namespace

// ---------------------------------------------------------------------------
// test functionals

TestFunctional TestFunctional::from_json(const nlohmann::json& spec) {
    const std::string kind = spec.value("kind", "constant");
    const double scale = spec.value("scale", 1.0);
    const double offset = spec.value("offset", 0.0);
    TestFunctional f;
    f.id = kind;
    if (kind == "constant") {
        const double v = spec.value("value", 1.0);
        f.bound = std::abs(v);
        f.geq_one = v >= 1;
        f.eval = [v](SegmentView) { return v; };
    } else if (kind == "affine_endpoint") {
        f.bound = kInf;
        f.eval = [scale, offset](SegmentView v) { return scale * endpoint0(v) + offset; };
    } else if (kind == "tanh_endpoint") {
        f.bound = std::abs(scale) + std::abs(offset);
        f.eval = [scale, offset](SegmentView v) { return std::tanh(endpoint0(v)) * scale + offset; };
    } else if (kind == "one_plus_tanh_sq_endpoint") {
        f.bound = 2.0 * std::abs(scale) + 1;
        f.geq_one = scale >= 0;
        f.eval = [scale](SegmentView v) {
            const double t = std::tanh(endpoint0(v));
            return 1.0 + scale * t * t;
        };
    } else if (kind == "tanh_window_mean") {
        f.bound = std::abs(scale) + std::abs(offset);
        f.eval = [scale, offset](SegmentView v) { return scale * std::tanh(window_mean0(v)) + offset; };
    } else if (kind == "exp_clamp_endpoint") {
        // f = exp(scale * (clamp(x, +-clamp) + clamp)) >= 1 for scale >= 0
        const double clamp = spec.value("clamp", 3.0);
        f.bound = std::exp(std::abs(scale) * 2 * clamp);
        f.geq_one = scale >= 0;
        f.eval = [scale, clamp](SegmentView v) {
            const double x = std::min(std::max(endpoint0(v), -clamp), clamp);
            return std::exp(scale * (x + clamp));
        };
    } else if (kind == "exp_endpoint") {
        const double cap = spec.value("cap", 30.0);
        f.bound = std::exp(cap);
        f.eval = [scale, cap](SegmentView v) {
            return std::exp(std::min(scale * endpoint0(v), cap));
        };
    } else {
        throw InvalidInput("unknown test functional kind '" + kind + "'");
    }
    return f;
}

TestFunctional TestFunctional::shifted(const Eta& eta) const {
    TestFunctional out = *this;
    out.id = id + "+shift";
    const Eta e = eta;
    const auto base = eval;
    out.eval = [base, e](SegmentView v) {
        std::vector<double> buf(static_cast<size_t>(v.nodes()) * v.dim);
        for (int j = 0; j < v.nodes(); ++j)
            for (int i = 0; i < v.dim; ++i)
                buf[static_cast<size_t>(j) * v.dim + i] = v.node(j)[i] + e.at(j)[i];
        return base(SegmentView{buf.data(), v.nodes(), v.dim});
    };
    return out;
}

// ---------------------------------------------------------------------------
// reports

HarnackReport make_report(std::string inequality, const StatEstimate& lhs, const StatEstimate& rhs,
                          double implied_constant, std::string manifest_hash) {
    HarnackReport r;
    r.inequality = std::move(inequality);
    r.lhs = lhs;
    r.rhs = rhs;
    r.margin = rhs.value - lhs.value;
    r.implied_constant = implied_constant;
    r.manifest_hash = std::move(manifest_hash);
    const double combined = combined_ci({lhs.ci, rhs.ci});
    if (std::isinf(rhs.value) || r.margin >= 0)
        r.verdict = "holds";
    else if (r.margin >= -3.0 * combined)
        r.verdict = "holds-within-CI";
    else
        r.verdict = "violated";
    return r;
}

nlohmann::json HarnackReport::to_json() const {
    nlohmann::json j;
    j["inequality"] = inequality;
    j["lhs"] = lhs.value;
    j["lhs_ci"] = lhs.ci;
    j["rhs"] = rhs.value;
    j["rhs_ci"] = rhs.ci;
    j["margin"] = margin;
    j["implied_constant"] = implied_constant;
    j["verdict"] = verdict;
    j["manifest_hash"] = manifest_hash;
    if (!extra.empty()) j["extra"] = extra;
    return j;
}

std::string HarnackReport::csv_header() {
    return "inequality,lhs,lhs_ci,rhs,rhs_ci,margin,implied_constant,verdict,manifest_hash";
}

std::string HarnackReport::csv_row() const {
    std::ostringstream os;
    os << inequality << ',' << fmt12(lhs.value) << ',' << fmt12(lhs.ci) << ',' << fmt12(rhs.value)
       << ',' << fmt12(rhs.ci) << ',' << fmt12(margin) << ',' << fmt12(implied_constant) << ','
       << verdict << ',' << manifest_hash;
    return os.str();
}

// ---------------------------------------------------------------------------
// P_t f

StatEstimate estimate_Ptf(const CoefficientSet& set, const SolverConfig& cfg,
                          const InitialLaw& mu0, double t, const TestFunctional& f) {
    SolverConfig c = cfg;
    c.grid = truncate_grid(cfg.grid, t);
    c.record_flow = false;
    const ParticleEnsemble ens = run_interacting(set, c, mu0).first;
    return functional_mean(ens, c.grid.total_nodes() - 1, f);
}

// ---------------------------------------------------------------------------
// log-Harnack

std::vector<HarnackReport> verify_log_harnack(const CoefficientSet& set, const SolverConfig& cfg,
                                              const InitialLaw& mu0, const std::vector<double>& gap,
                                              const std::vector<double>& ts,
                                              const TestFunctional& f, const VerifyOptions& opts) {
    if (!set.sigma_distribution_free)
        throw InvalidInput("log-Harnack verifier needs distribution-free sigma");
    if (ts.empty()) throw InvalidInput("log-Harnack needs at least one time");
    SolverConfig c = cfg;
    c.grid = truncate_grid(cfg.grid, *std::max_element(ts.begin(), ts.end()));
    c.record_flow = false;
    const InitialLaw nu0 = mu0.shifted(gap);
    const double gap_sq = sq_norm_vec(gap);

    const ParticleEnsemble ens_mu = run_interacting(set, c, mu0).first;
    const ParticleEnsemble ens_nu = run_interacting(set, c, nu0).first;

    std::vector<HarnackReport> reports;
    for (double t : ts) {
        const int node = c.grid.index_of(t);
        check_geq_one(ens_nu, node, f);
        const StatEstimate lhs = batch_mean_fn(ens_nu.particles(), [&](int64_t i) {
            return std::log(f(segment_view(ens_nu.trajs[static_cast<size_t>(i)], node)));
        });
        const StatEstimate ptf_mu = functional_mean(ens_mu, node, f);
        const StatEstimate log_ptf = log_estimate(ptf_mu);
        const double penalty = gap_sq > 0 ? opts.trial_C / (t - c.grid.r) * gap_sq : 0.0;
        const StatEstimate rhs = shift_estimate(log_ptf, penalty);
        const double implied =
            gap_sq > 1e-18 ? (lhs.value - log_ptf.value) * (t - c.grid.r) / gap_sq : 0.0;
        HarnackReport r = make_report("log-harnack", lhs, rhs, implied, opts.manifest_hash);
        r.extra["t"] = t;
        r.extra["t_minus_r"] = t - c.grid.r;
        r.extra["gap_sq"] = gap_sq;
        r.extra["trial_C"] = opts.trial_C;
        r.extra["f"] = f.id;
        reports.push_back(std::move(r));
    }
    return reports;
}

// ---------------------------------------------------------------------------
// gradient estimate

HarnackReport verify_gradient_estimate(const CoefficientSet& set, const SolverConfig& cfg,
                                       const InitialLaw& mu0, const std::vector<double>& gap,
                                       double t, const TestFunctional& f,
                                       const VerifyOptions& opts) {
    const double gap_sq = sq_norm_vec(gap);
    if (gap_sq < 1e-18)
        throw InvalidInput("gradient estimate needs different mu0, nu0 (degenerate gap)");
    if (opts.ball_samples < 8) throw InvalidInput("gradient estimate needs >= 8 ball samples");
    SolverConfig c = cfg;
    c.grid = truncate_grid(cfg.grid, t);
    c.record_flow = false;
    const int node = c.grid.total_nodes() - 1;

    const ParticleEnsemble ens_mu = run_interacting(set, c, mu0).first;
    const ParticleEnsemble ens_nu = run_interacting(set, c, mu0.shifted(gap)).first;
    // common random numbers: batch the difference directly
    const StatEstimate diff = batch_mean_fn(ens_mu.particles(), [&](int64_t i) {
        return f(segment_view(ens_mu.trajs[static_cast<size_t>(i)], node)) -
               f(segment_view(ens_nu.trajs[static_cast<size_t>(i)], node));
    });
    StatEstimate lhs;
    lhs.value = diff.value * diff.value / gap_sq;
    lhs.ci = 2.0 * std::abs(diff.value) * diff.ci / gap_sq;
    lhs.count = diff.count;
    lhs.batches = diff.batches;

    // mixture sweep over the open ball: fraction j/J of atoms shifted
    const int J = opts.ball_samples;
    double max_var = 0, max_var_ci = 0;
    std::vector<double> vars;
    for (int j = 0; j < J; ++j) {
        InitialLaw mix = mu0;
        if (j > 0) {
            mix = mu0.shifted(gap);
            mix.mixture_mod = J;
            mix.mixture_count = j;
        }
        const ParticleEnsemble ens = run_interacting(set, c, mix).first;
        const StatEstimate m1 = functional_mean(ens, node, f);
        const StatEstimate m2 = batch_mean_fn(ens.particles(), [&](int64_t i) {
            const double v = f(segment_view(ens.trajs[static_cast<size_t>(i)], node));
            return v * v;
        });
        const double var = std::max(0.0, m2.value - m1.value * m1.value);
        vars.push_back(var);
        if (var > max_var) {
            max_var = var;
            max_var_ci = m2.ci + 2 * std::abs(m1.value) * m1.ci;
        }
    }
    StatEstimate rhs;
    rhs.value = 2.0 * opts.trial_C / (t - c.grid.r) * max_var;
    rhs.ci = 2.0 * opts.trial_C / (t - c.grid.r) * max_var_ci;
    rhs.count = lhs.count;

    const double implied = max_var > 0 ? lhs.value * (t - c.grid.r) / (2.0 * max_var) : 0.0;
    HarnackReport r = make_report("gradient-estimate", lhs, rhs, implied, opts.manifest_hash);
    r.extra["t"] = t;
    r.extra["w2_upper"] = std::sqrt(gap_sq);
    r.extra["ball_samples"] = J;
    r.extra["variances"] = vars;
    r.extra["trial_C"] = opts.trial_C;
    r.extra["one_sided"] = "sampled-ball max lower-bounds the sup";
    return r;
}

// ---------------------------------------------------------------------------
// power-Harnack

HarnackReport verify_power_harnack(const CoefficientSet& set, const SolverConfig& cfg,
                                   const InitialLaw& mu0, const std::vector<double>& gap, double t,
                                   const TestFunctional& f, const VerifyOptions& opts) {
    const double p = opts.p;
    if (!(p > opts.p0))
        throw InvalidInput("power-Harnack needs p > p0 (p0=" + std::to_string(opts.p0) + ")");
    SolverConfig c = cfg;
    c.grid = truncate_grid(cfg.grid, t);
    c.record_flow = false;
    const int node = c.grid.total_nodes() - 1;
    const double gap_sq = sq_norm_vec(gap);

    const ParticleEnsemble ens_mu = run_interacting(set, c, mu0).first;
    const ParticleEnsemble ens_nu = run_interacting(set, c, mu0.shifted(gap)).first;
    for (int i = 0; i < ens_nu.particles(); ++i)
        if (f(segment_view(ens_nu.trajs[static_cast<size_t>(i)], node)) < -1e-12)
            throw InvalidInput("power-Harnack needs f >= 0");

    const StatEstimate ptf_nu = functional_mean(ens_nu, node, f);
    const StatEstimate lhs = pow_estimate(ptf_nu, p);
    const StatEstimate ptfp_mu = batch_mean_fn(ens_mu.particles(), [&](int64_t i) {
        return std::pow(f(segment_view(ens_mu.trajs[static_cast<size_t>(i)], node)), p);
    });
    // coupled initial pair: |X(0)-Y(0)|^2 and ||X_0-Y_0||^2 are the
    // deterministic gap, so the exponential factor is a number
    const double exparg = opts.trial_H2 * (1.0 + gap_sq / (t - c.grid.r) + gap_sq);
    bool overflow = false;
    StatEstimate rhs;
    if (p * exparg > 700) {
        overflow = true;
        rhs = StatEstimate::exact(kInf, ptfp_mu.count);
    } else {
        rhs = scale_estimate(ptfp_mu, std::exp(p * exparg));
    }
    double implied = 0;
    if (lhs.value > 0 && ptfp_mu.value > 0)
        implied = std::log(lhs.value / ptfp_mu.value) /
                  (p * (1.0 + gap_sq / (t - c.grid.r) + gap_sq));
    HarnackReport r = make_report("power-harnack", lhs, rhs, implied, opts.manifest_hash);
    r.extra["t"] = t;
    r.extra["p"] = p;
    r.extra["gap_sq"] = gap_sq;
    r.extra["trial_H2"] = opts.trial_H2;
    r.extra["overflow"] = overflow;
    return r;
}

// ---------------------------------------------------------------------------
// shift-Harnack

ShiftHarnackResult verify_shift_harnack(const CoefficientSet& set, const SolverConfig& cfg,
                                        const InitialLaw& mu0, double t, const Eta& eta,
                                        const TestFunctional& f, const VerifyOptions& opts) {
    if (!set.sigma_state_free)
        throw InvalidInput("shift-Harnack needs state-free sigma (model '" + set.name + "')");
    SolverConfig c = cfg;
    c.grid = truncate_grid(cfg.grid, t);
    c.record_flow = false;

    // frozen flow: interacting surrogate (skipped for distribution-free sets,
    // where any flow gives the same dynamics)
    LawFlow flow;
    if (set.distribution_free) {
        flow = initial_law_flow(c, set.dim, mu0);
    } else {
        SolverConfig cf = c;
        cf.particles = std::max(2, std::min(opts.flow_particles, cfg.particles));
        cf.record_flow = true;
        flow = run_interacting(set, cf, mu0).second;
    }

    ShiftHarnackResult out;
    out.coupled = coupled_shift_run(set, c, mu0, flow, eta);
    const CoupledShiftResult& coupled = out.coupled;
    const int node = c.grid.total_nodes() - 1;
    const int M = coupled.x.particles();

    // sigma^{-1} sup over steps (state-free: one matrix per step)
    double sigma_inv_norm = 0;
    {
        std::vector<double> sig(static_cast<size_t>(set.dim) * set.dim);
        const std::vector<double> zero(set.dim, 0.0);
        for (int k = 0; k < c.grid.n_T; ++k) {
            set.eval_sigma(k * c.grid.h, zero.data(), flow.at_step(k), sig.data());
            if (set.dim == 1) {
                sigma_inv_norm = std::max(sigma_inv_norm, 1.0 / std::abs(sig[0]));
            } else {
                // crude but safe operator-norm bound via Frobenius of the inverse
                Eigen::MatrixXd S(set.dim, set.dim);
                for (int i = 0; i < set.dim; ++i)
                    for (int jj = 0; jj < set.dim; ++jj)
                        S(i, jj) = sig[static_cast<size_t>(i) * set.dim + jj];
                sigma_inv_norm = std::max(sigma_inv_norm, S.inverse().norm());
            }
        }
    }

    check_geq_one(coupled.x, node, f);
    const TestFunctional f_shift = f.shifted(eta);

    const StatEstimate lhs_log = batch_mean_fn(M, [&](int64_t i) {
        return std::log(f(segment_view(coupled.x.trajs[static_cast<size_t>(i)], node)));
    });
    const StatEstimate ptf_shift = batch_mean_fn(M, [&](int64_t i) {
        return f_shift(segment_view(coupled.x.trajs[static_cast<size_t>(i)], node));
    });

    out.entropy_direct = batch_mean_fn(M, [&](int64_t i) {
        const double lw = coupled.log_weight[static_cast<size_t>(i)];
        return std::exp(lw) * lw;
    });
    out.entropy_via_phi = batch_mean_fn(M, [&](int64_t i) {
        return 0.5 * std::exp(coupled.log_weight[static_cast<size_t>(i)]) *
               coupled.int_phi_sq[static_cast<size_t>(i)];
    });
    out.entropy_diff = batch_mean_fn(M, [&](int64_t i) {
        const double lw = coupled.log_weight[static_cast<size_t>(i)];
        return std::exp(lw) * (lw - 0.5 * coupled.int_phi_sq[static_cast<size_t>(i)]);
    });

    const BetaBound beta = beta_bound(eta, c.grid, set.phi, opts.beta_C, sigma_inv_norm);
    out.beta_total = beta.total;
    const double max_phi_sq = *std::max_element(coupled.int_phi_sq.begin(), coupled.int_phi_sq.end());
    out.implied_beta_C = implied_envelope_C(max_phi_sq, eta, c.grid, set.phi, sigma_inv_norm);

    // log form: LHS <= log P_t f(eta + .) + min(beta, E[R log R])
    {
        StatEstimate penalty = out.entropy_direct.value <= beta.total
                                   ? out.entropy_direct
                                   : StatEstimate::exact(beta.total, M);
        StatEstimate rhs = log_estimate(ptf_shift);
        rhs.value += penalty.value;
        rhs.ci = combined_ci({rhs.ci, penalty.ci});
        out.log_form =
            make_report("shift-harnack-log", lhs_log, rhs, lhs_log.value - log_estimate(ptf_shift).value,
                        opts.manifest_hash);
        out.log_form.extra["t"] = t;
        out.log_form.extra["entropy_direct"] = out.entropy_direct.value;
        out.log_form.extra["entropy_via_phi"] = out.entropy_via_phi.value;
        out.log_form.extra["entropy_route_used"] = out.entropy_direct.value <= beta.total;
        out.log_form.extra["beta_trial"] = beta.total;
        out.log_form.extra["beta_trial_C"] = opts.beta_C;
        out.log_form.extra["implied_beta_C"] = out.implied_beta_C;
        out.log_form.extra["f"] = f.id;
    }

    // power form: Hoelder with the realized weights is the entropy-route
    // verdict; the ess-sup and beta variants are reported alongside
    {
        const double p = opts.p;
        if (!(p > 1)) throw InvalidInput("shift-Harnack power form needs p > 1");
        const StatEstimate ptf = batch_mean_fn(M, [&](int64_t i) {
            return f(segment_view(coupled.x.trajs[static_cast<size_t>(i)], node));
        });
        const StatEstimate lhs_pow = pow_estimate(ptf, p);
        const StatEstimate ptfp_shift = batch_mean_fn(M, [&](int64_t i) {
            return std::pow(f_shift(segment_view(coupled.x.trajs[static_cast<size_t>(i)], node)), p);
        });
        const WeightMoment wm = weight_moment(coupled.log_weight, p / (p - 1));
        StatEstimate rhs;
        bool overflow = wm.overflow;
        if (overflow) {
            rhs = StatEstimate::exact(kInf, M);
        } else {
            rhs = mul_independent(ptfp_shift, pow_estimate(wm.estimate, p - 1));
        }
        const double rhs_esssup =
            ptfp_shift.value * std::exp(p * max_phi_sq / (2.0 * (p - 1)));
        const double rhs_beta = ptfp_shift.value * std::exp(p * beta.total / (2.0 * (p - 1)));
        double implied = 0;
        if (lhs_pow.value > 0 && ptfp_shift.value > 0)
            implied = 2.0 * (p - 1) / p * std::log(lhs_pow.value / ptfp_shift.value);
        out.power_form = make_report("shift-harnack-power", lhs_pow, rhs, implied, opts.manifest_hash);
        out.power_form.extra["t"] = t;
        out.power_form.extra["p"] = p;
        out.power_form.extra["rhs_esssup_route"] = rhs_esssup;
        out.power_form.extra["rhs_beta_route"] = rhs_beta;
        out.power_form.extra["weight_moment"] = overflow ? kInf : wm.estimate.value;
        out.power_form.extra["overflow"] = overflow;
        out.power_form.extra["f"] = f.id;
    }
    return out;
}

// ---------------------------------------------------------------------------
// occupation functions

OccupationFunction OccupationFunction::from_json(const nlohmann::json& spec, const TimeGrid& grid,
                                                 int dim, double p, double q) {
    OccupationFunction of;
    const std::string kind = spec.value("kind", "constant");
    of.id = kind;
    LqpBox box;
    box.t0 = 0;
    box.t1 = grid.T;
    box.x.assign(static_cast<size_t>(dim), {-0.5, 0.5});
    if (spec.contains("box")) {
        const auto& jb = spec.at("box");
        if (jb.contains("t")) {
            box.t0 = jb.at("t").at(0).get<double>();
            box.t1 = jb.at("t").at(1).get<double>();
        }
        if (jb.contains("x")) {
            box.x.clear();
            for (const auto& xr : jb.at("x"))
                box.x.push_back({xr.at(0).get<double>(), xr.at(1).get<double>()});
        }
    }
    of.box = box;
    double xvol = 1, dur = box.t1 - box.t0;
    for (const auto& xr : box.x) xvol *= (xr[1] - xr[0]);

    if (kind == "constant") {
        const double v = spec.value("value", 1.0);
        of.f = [v](double, const double*) { return v; };
        of.norm = std::abs(v) * std::pow(xvol, 1.0 / p) * std::pow(dur, 1.0 / q);
        of.norm_is_lower_bound = true; // f extends beyond the declared box
        of.sup_bound = std::abs(v);
    } else if (kind == "indicator") {
        const double a = spec.value("a", 1.0);
        const double T = grid.T;
        of.f = [a, T, dim](double t, const double* x) {
            if (t < 0 || t > T) return 0.0;
            for (int i = 0; i < dim; ++i)
                if (std::abs(x[i]) > a) return 0.0;
            return 1.0;
        };
        of.box.t0 = 0;
        of.box.t1 = T;
        of.box.x.assign(static_cast<size_t>(dim), {-a, a});
        of.norm = std::pow(std::pow(2 * a, double(dim)), 1.0 / p) * std::pow(T, 1.0 / q);
        of.sup_bound = 1.0;
    } else {
        throw InvalidInput("unknown occupation function kind '" + kind + "'");
    }
    if (spec.contains("norm")) of.norm = spec.at("norm").get<double>();
    return of;
}

// ---------------------------------------------------------------------------
// Krylov / Khasminskii

namespace {

struct PairIntegrals {
    // per pair: per-particle trapezoid of f(s, X(s)) ds over [s, t]
    std::vector<std::vector<double>> integrals;
    std::vector<std::pair<int, int>> nodes; // (ks, kt) trajectory nodes
};

PairIntegrals pair_integrals(const ParticleEnsemble& ens, const OccupationFunction& f,
                             const std::vector<std::pair<double, double>>& pairs) {
    PairIntegrals out;
    const TimeGrid& g = ens.grid;
    for (auto [s, t] : pairs) {
        const int ks = g.index_of(s), kt = g.index_of(t);
        if (ks < g.n_r || kt <= ks)
            throw InvalidInput("krylov pair (s,t) must satisfy 0 <= s < t on the grid");
        out.nodes.emplace_back(ks, kt);
    }
    out.integrals.assign(pairs.size(), std::vector<double>(ens.particles()));
    std::vector<double> fv(static_cast<size_t>(g.n_T) + 1);
    std::vector<double> prefix(static_cast<size_t>(g.n_T) + 2, 0.0);
    for (int i = 0; i < ens.particles(); ++i) {
        const Trajectory& tr = ens.trajs[static_cast<size_t>(i)];
        for (int k = g.n_r; k < g.total_nodes(); ++k)
            fv[static_cast<size_t>(k - g.n_r)] = f.f(g.node_time(k), tr.node(k));
        for (size_t k = 0; k < fv.size(); ++k) prefix[k + 1] = prefix[k] + fv[k];
        for (size_t pi = 0; pi < out.nodes.size(); ++pi) {
            const int a = out.nodes[pi].first - g.n_r;
            const int b = out.nodes[pi].second - g.n_r;
            const double sum = prefix[static_cast<size_t>(b) + 1] - prefix[static_cast<size_t>(a)];
            out.integrals[pi][static_cast<size_t>(i)] =
                g.h * (sum - 0.5 * fv[static_cast<size_t>(a)] - 0.5 * fv[static_cast<size_t>(b)]);
        }
    }
    return out;
}

} // namespace

KrylovReport krylov_check(const CoefficientSet& set, const SolverConfig& cfg,
                          const InitialLaw& mu0, const OccupationFunction& f, double p, double q,
                          const std::vector<std::pair<double, double>>& pairs,
                          const VerifyOptions& opts) {
    if (!pair_in_K(p, q, set.dim).first)
        throw InvalidInput("(p,q) = (" + std::to_string(p) + "," + std::to_string(q) +
                           ") is not in the pair class for d=" + std::to_string(set.dim));
    if (pairs.size() < 2) throw InvalidInput("krylov check needs >= 2 (s,t) pairs");
    SolverConfig c = cfg;
    c.record_flow = false;
    const ParticleEnsemble ens = run_interacting(set, c, mu0).first;
    const PairIntegrals pi = pair_integrals(ens, f, pairs);

    KrylovReport rep;
    rep.test_function = f.id;
    rep.p = p;
    rep.q = q;
    rep.pairs = pairs;
    rep.f_norm = f.norm;
    rep.manifest_hash = opts.manifest_hash;
    std::vector<double> log_dt, log_est;
    bool degenerate = false;
    for (size_t k = 0; k < pairs.size(); ++k) {
        rep.estimates.push_back(batch_mean(pi.integrals[k]));
        if (rep.estimates.back().value <= 0) degenerate = true;
    }
    if (degenerate) {
        rep.verdict = "degenerate";
        return rep;
    }
    for (size_t k = 0; k < pairs.size(); ++k) {
        log_dt.push_back(std::log(pairs[k].second - pairs[k].first));
        log_est.push_back(std::log(rep.estimates[k].value));
    }
    const LinearFit fit = linear_fit(log_dt, log_est);
    rep.delta_hat = fit.slope;
    rep.C_hat = std::exp(fit.intercept) / f.norm;
    rep.r_squared = fit.r_squared;

    bool ok = rep.delta_hat > 0 && rep.r_squared >= 0.9;
    for (size_t k = 0; k < pairs.size(); ++k) {
        const double envelope =
            rep.C_hat * f.norm * std::pow(pairs[k].second - pairs[k].first, rep.delta_hat);
        if (rep.estimates[k].value > envelope + 3 * rep.estimates[k].ci + 1e-12) ok = false;
    }
    rep.verdict = ok ? "holds" : "violated";
    return rep;
}

nlohmann::json KrylovReport::to_json() const {
    nlohmann::json j;
    j["inequality"] = "krylov";
    j["test_function"] = test_function;
    j["p"] = p;
    j["q"] = q;
    j["delta_hat"] = delta_hat;
    j["C_hat"] = C_hat;
    j["r_squared"] = r_squared;
    j["f_norm"] = f_norm;
    j["verdict"] = verdict;
    j["manifest_hash"] = manifest_hash;
    auto arr = nlohmann::json::array();
    for (size_t k = 0; k < pairs.size(); ++k) {
        nlohmann::json e;
        e["s"] = pairs[k].first;
        e["t"] = pairs[k].second;
        e["estimate"] = estimates[k].value;
        e["ci"] = estimates[k].ci;
        arr.push_back(e);
    }
    j["pairs"] = arr;
    return j;
}

std::string KrylovReport::csv_row() const {
    // worst pair mapped onto the shared schema
    double worst_margin = kInf, lhs = 0, rhs = 0, lhs_ci = 0;
    for (size_t k = 0; k < pairs.size(); ++k) {
        const double envelope =
            C_hat * f_norm * std::pow(pairs[k].second - pairs[k].first, delta_hat);
        const double m = envelope - estimates[k].value;
        if (m < worst_margin) {
            worst_margin = m;
            lhs = estimates[k].value;
            lhs_ci = estimates[k].ci;
            rhs = envelope;
        }
    }
    std::ostringstream os;
    os << "krylov," << fmt12(lhs) << ',' << fmt12(lhs_ci) << ',' << fmt12(rhs) << ",0,"
       << fmt12(worst_margin) << ',' << fmt12(C_hat) << ',' << verdict << ',' << manifest_hash;
    return os.str();
}

KhasminskiiReport khasminskii_check(const CoefficientSet& set, const SolverConfig& cfg,
                                    const InitialLaw& mu0, const OccupationFunction& f,
                                    const std::vector<double>& lambdas,
                                    const std::vector<std::pair<double, double>>& pairs,
                                    const VerifyOptions& opts) {
    if (lambdas.empty()) throw InvalidInput("khasminskii check needs lambdas");
    SolverConfig c = cfg;
    c.record_flow = false;
    const ParticleEnsemble ens = run_interacting(set, c, mu0).first;

    std::vector<std::pair<double, double>> all_pairs = pairs;
    all_pairs.emplace_back(0.0, c.grid.T); // the full-horizon integral drives exp moments
    const PairIntegrals pi = pair_integrals(ens, f, all_pairs);
    const std::vector<double>& Z = pi.integrals.back();

    KhasminskiiReport rep;
    rep.test_function = f.id;
    rep.lambdas = lambdas;
    rep.manifest_hash = opts.manifest_hash;
    rep.slope_cap = f.sup_bound * c.grid.T;
    double zmax = 0;
    for (double z : Z) zmax = std::max(zmax, z);
    bool ok = true;
    for (double lam : lambdas) {
        if (lam * zmax > 700) {
            rep.exp_estimates.push_back(StatEstimate::exact(kInf, static_cast<int64_t>(Z.size())));
            rep.overflow.push_back(true);
            ok = false;
            continue;
        }
        rep.exp_estimates.push_back(batch_mean_fn(static_cast<int64_t>(Z.size()), [&](int64_t i) {
            return std::exp(lam * Z[static_cast<size_t>(i)]);
        }));
        rep.overflow.push_back(false);
    }
    rep.max_log_slope = 0;
    for (size_t k = 0; k + 1 < lambdas.size(); ++k) {
        if (rep.overflow[k] || rep.overflow[k + 1]) continue;
        const StatEstimate la = log_estimate(rep.exp_estimates[k]);
        const StatEstimate lb = log_estimate(rep.exp_estimates[k + 1]);
        const double dl = lambdas[k + 1] - lambdas[k];
        const double slope = (lb.value - la.value) / dl;
        rep.max_log_slope = std::max(rep.max_log_slope, slope);
        if (slope > rep.slope_cap + 3 * (la.ci + lb.ci) / dl + 1e-12) ok = false;
    }
    // factorial-moment form on the pair grid
    if (pairs.size() >= 2) {
        std::vector<double> log_dt, log_m1;
        for (size_t k = 0; k < pairs.size(); ++k) {
            const double m1 = batch_mean(pi.integrals[k]).value;
            if (m1 > 0) {
                log_dt.push_back(std::log(pairs[k].second - pairs[k].first));
                log_m1.push_back(std::log(m1));
            }
        }
        if (log_dt.size() >= 2) {
            rep.delta_hat = linear_fit(log_dt, log_m1).slope;
            double cmax = 0;
            for (size_t k = 0; k < pairs.size(); ++k) {
                const double dt = pairs[k].second - pairs[k].first;
                for (int nmom = 1; nmom <= 3; ++nmom) {
                    double m = 0;
                    for (double z : pi.integrals[k]) m += std::pow(z, nmom);
                    m /= double(pi.integrals[k].size());
                    double fact = 1;
                    for (int u = 2; u <= nmom; ++u) fact *= u;
                    const double denom =
                        fact * std::pow(std::pow(dt, rep.delta_hat) * f.norm, double(nmom));
                    if (denom > 0) cmax = std::max(cmax, m / denom);
                }
            }
            rep.factorial_c = cmax;
            if (!std::isfinite(cmax)) ok = false;
        }
    }
    rep.verdict = ok ? "holds" : "violated";
    return rep;
}

nlohmann::json KhasminskiiReport::to_json() const {
    nlohmann::json j;
    j["inequality"] = "khasminskii";
    j["test_function"] = test_function;
    j["slope_cap"] = slope_cap;
    j["max_log_slope"] = max_log_slope;
    j["factorial_c"] = factorial_c;
    j["delta_hat"] = delta_hat;
    j["verdict"] = verdict;
    j["manifest_hash"] = manifest_hash;
    auto arr = nlohmann::json::array();
    for (size_t k = 0; k < lambdas.size(); ++k) {
        nlohmann::json e;
        e["lambda"] = lambdas[k];
        e["estimate"] = overflow[k] ? -1.0 : exp_estimates[k].value;
        e["ci"] = overflow[k] ? 0.0 : exp_estimates[k].ci;
        e["overflow"] = static_cast<bool>(overflow[k]);
        arr.push_back(e);
    }
    j["lambdas"] = arr;
    return j;
}

std::string KhasminskiiReport::csv_row() const {
    std::ostringstream os;
    os << "khasminskii," << fmt12(max_log_slope) << ",0," << fmt12(slope_cap) << ",0,"
       << fmt12(slope_cap - max_log_slope) << ',' << fmt12(factorial_c) << ',' << verdict << ','
       << manifest_hash;
    return os.str();
}

} // namespace mvsde
