#include "mvsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>

#include "mvsde/errors.hpp"
#include "mvsde/parallel.hpp"

namespace mvsde {

void SolverConfig::validate() const {
    std::vector<std::string> bad;
    if (particles < 1) bad.push_back("particles must be >= 1");
    if (mode == Mode::interacting && particles < 2)
        bad.push_back("interacting mode needs M >= 2");
    if (picard_sweeps < 1) bad.push_back("picard sweeps must be >= 1");
    if (theta < 1) bad.push_back("theta must be >= 1");
    if (!bad.empty()) throw ConfigError(bad);
}

int SolverConfig::mollify_level(int sweep) const {
    if (!mollify_levels.empty()) {
        const size_t i = std::min<size_t>(sweep - 1, mollify_levels.size() - 1);
        return mollify_levels[i];
    }
    static const int defaults[] = {4, 16, 64};
    return defaults[std::min(sweep - 1, 2)];
}

InitialLaw InitialLaw::constant(std::vector<double> value) {
    InitialLaw l;
    l.kind = Kind::constant;
    l.value = std::move(value);
    return l;
}

InitialLaw InitialLaw::gaussian(std::vector<double> mean, double stddev) {
    InitialLaw l;
    l.kind = Kind::gaussian;
    l.value = std::move(mean);
    l.stddev = stddev;
    return l;
}

InitialLaw InitialLaw::shifted(const std::vector<double>& gap) const {
    InitialLaw l = *this;
    if (l.shift.empty()) l.shift.assign(l.value.size(), 0.0);
    for (size_t i = 0; i < gap.size() && i < l.shift.size(); ++i) l.shift[i] += gap[i];
    return l;
}

void InitialLaw::draw(const GaussianStream& stream, uint32_t particle, double* out, int dim) const {
    for (int i = 0; i < dim; ++i) out[i] = i < static_cast<int>(value.size()) ? value[i] : 0.0;
    if (kind == Kind::gaussian && stddev > 0) {
        std::vector<double> g(dim);
        stream.fill_normal(particle, 0, StreamClass::initial, g.data(), dim);
        for (int i = 0; i < dim; ++i) out[i] += stddev * g[i];
    }
    const bool shifted =
        mixture_mod <= 0 || static_cast<int>(particle % static_cast<uint32_t>(mixture_mod)) < mixture_count;
    if (shifted)
        for (size_t i = 0; i < shift.size() && static_cast<int>(i) < dim; ++i) out[i] += shift[i];
}

double InitialLaw::expected_sq_gap() const {
    double s = 0;
    for (double g : shift) s += g * g;
    return s;
}

ParticleEnsemble init_ensemble(const SolverConfig& cfg, int dim, const InitialLaw& initial) {
    cfg.validate();
    ParticleEnsemble ens;
    ens.grid = cfg.grid;
    ens.dim = dim;
    ens.trajs.assign(cfg.particles, Trajectory::zeros(cfg.grid, dim));
    const GaussianStream stream(cfg.seed);
    std::vector<double> x(dim);
    for (int i = 0; i < cfg.particles; ++i) {
        initial.draw(stream, static_cast<uint32_t>(i), x.data(), dim);
        Trajectory& tr = ens.trajs[static_cast<size_t>(i)];
        for (int k = 0; k <= cfg.grid.n_r; ++k)
            std::copy(x.begin(), x.end(), tr.node(k));
    }
    return ens;
}

namespace {

/// Runs body(lo, hi) over particle chunks and rethrows the first exception.
template <class Fn>
void parallel_particles(int particles, int threads, Fn&& body) {
    std::exception_ptr err;
    std::mutex err_mu;
    parallel_for(particles, threads, [&](int64_t lo, int64_t hi) {
        try {
            body(static_cast<int>(lo), static_cast<int>(hi));
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!err) err = std::current_exception();
        }
    });
    if (err) std::rethrow_exception(err);
}

struct StepWorkspace {
    std::vector<double> Bv, bv, sig, dw, g;
    explicit StepWorkspace(int d)
        : Bv(d), bv(d), sig(static_cast<size_t>(d) * d), dw(d), g(d) {}
};

void advance_particle(Trajectory& tr, int particle, int step, const CoefficientSet& set,
                      const EmpiricalLaw& law, const GaussianStream& stream,
                      const SolverConfig& cfg, StepWorkspace& ws, const double* sigma_cached) {
    const int d = tr.dim;
    const int node = tr.grid.n_r + step;
    const double t = step * tr.grid.h;
    const double h = tr.grid.h;
    const double sqh = std::sqrt(h);

    const double* x = tr.node(node);
    if (set.B) {
        set.eval_B(t, segment_view(tr, node), law, ws.Bv.data());
    } else {
        std::fill(ws.Bv.begin(), ws.Bv.end(), 0.0);
    }
    set.eval_b(t, x, law, ws.bv.data());
    const double* sig = sigma_cached;
    if (!sig) {
        set.eval_sigma(t, x, law, ws.sig.data());
        sig = ws.sig.data();
    }
    stream.fill_normal(static_cast<uint32_t>(particle), static_cast<uint32_t>(step),
                       StreamClass::increments, ws.g.data(), d);

    double* xn = tr.node(node + 1);
    for (int i = 0; i < d; ++i) {
        double diff = 0;
        for (int l = 0; l < d; ++l) diff += sig[static_cast<size_t>(i) * d + l] * ws.g[l];
        xn[i] = x[i] + (ws.Bv[i] + ws.bv[i]) * h + diff * sqh;
        if (!std::isfinite(xn[i]) || std::abs(xn[i]) > cfg.blowup_threshold)
            throw BlowUpError(particle, t + h, "state " + std::to_string(xn[i]));
    }
}

/// sigma(t, 0, law) once per step when sigma is state-free.
bool cacheable_sigma(const CoefficientSet& set) { return set.sigma_state_free; }

void eval_sigma_cached(const CoefficientSet& set, double t, const EmpiricalLaw& law,
                       std::vector<double>& out) {
    const std::vector<double> zero(set.dim, 0.0);
    out.resize(static_cast<size_t>(set.dim) * set.dim);
    set.eval_sigma(t, zero.data(), law, out.data());
}

} // namespace

void euler_step(ParticleEnsemble& ens, const CoefficientSet& set, const EmpiricalLaw& law,
                int step, const GaussianStream& stream, const SolverConfig& cfg) {
    if (step < 0 || step >= ens.grid.n_T) throw InvalidInput("euler step index out of range");
    std::vector<double> sig_cache;
    const double* cached = nullptr;
    if (cacheable_sigma(set)) {
        eval_sigma_cached(set, step * ens.grid.h, law, sig_cache);
        cached = sig_cache.data();
    }
    parallel_particles(ens.particles(), cfg.threads, [&](int lo, int hi) {
        StepWorkspace ws(ens.dim);
        for (int i = lo; i < hi; ++i)
            advance_particle(ens.trajs[static_cast<size_t>(i)], i, step, set, law, stream, cfg,
                             ws, cached);
    });
}

EmpiricalLaw law_of_ensemble(const ParticleEnsemble& ens, int step, SupportKind kind,
                             double theta) {
    const int node = ens.grid.n_r + step;
    const int d = ens.dim;
    if (kind == SupportKind::endpoint) {
        std::vector<double> flat(static_cast<size_t>(ens.particles()) * d);
        for (int i = 0; i < ens.particles(); ++i) {
            const double* x = ens.trajs[static_cast<size_t>(i)].node(node);
            std::copy(x, x + d, flat.begin() + static_cast<size_t>(i) * d);
        }
        return EmpiricalLaw::endpoint(d, std::move(flat), {}, theta);
    }
    const int len = (ens.grid.n_r + 1) * d;
    std::vector<double> flat(static_cast<size_t>(ens.particles()) * len);
    for (int i = 0; i < ens.particles(); ++i) {
        const SegmentView v = segment_view(ens.trajs[static_cast<size_t>(i)], node);
        std::copy(v.data, v.data + len, flat.begin() + static_cast<size_t>(i) * len);
    }
    return EmpiricalLaw::segment(ens.grid, d, std::move(flat), {}, theta);
}

ParticleEnsemble run_frozen_law(const CoefficientSet& set, const LawFlow& flow,
                                const SolverConfig& cfg, const InitialLaw& initial) {
    if (static_cast<int>(flow.laws.size()) < cfg.grid.n_T)
        throw InvalidInput("law flow must cover every step in [0, T)");
    ParticleEnsemble ens = init_ensemble(cfg, set.dim, initial);
    const GaussianStream stream(cfg.seed);

    std::vector<std::vector<double>> sig_cache;
    const bool cache_sigma = cacheable_sigma(set);
    if (cache_sigma) {
        sig_cache.resize(static_cast<size_t>(cfg.grid.n_T));
        for (int k = 0; k < cfg.grid.n_T; ++k)
            eval_sigma_cached(set, k * cfg.grid.h, flow.at_step(k), sig_cache[static_cast<size_t>(k)]);
    }
    // With the flow fixed there is no between-step coupling, so each chunk of
    // particles runs the whole horizon.
    parallel_particles(ens.particles(), cfg.threads, [&](int lo, int hi) {
        StepWorkspace ws(ens.dim);
        for (int i = lo; i < hi; ++i)
            for (int k = 0; k < cfg.grid.n_T; ++k)
                advance_particle(ens.trajs[static_cast<size_t>(i)], i, k, set, flow.at_step(k),
                                 stream, cfg, ws,
                                 cache_sigma ? sig_cache[static_cast<size_t>(k)].data() : nullptr);
    });
    return ens;
}

std::pair<ParticleEnsemble, LawFlow> run_interacting(const CoefficientSet& set,
                                                     const SolverConfig& cfg,
                                                     const InitialLaw& initial) {
    ParticleEnsemble ens = init_ensemble(cfg, set.dim, initial);
    const GaussianStream stream(cfg.seed);
    LawFlow flow;
    flow.grid = cfg.grid;
    flow.kind = cfg.law_support;
    flow.theta = cfg.theta;
    if (cfg.record_flow) flow.laws.reserve(static_cast<size_t>(cfg.grid.n_T) + 1);

    for (int k = 0; k < cfg.grid.n_T; ++k) {
        EmpiricalLaw law = law_of_ensemble(ens, k, cfg.law_support, cfg.theta);
        euler_step(ens, set, law, k, stream, cfg);
        if (cfg.record_flow) flow.laws.push_back(std::move(law));
    }
    if (cfg.record_flow)
        flow.laws.push_back(law_of_ensemble(ens, cfg.grid.n_T, cfg.law_support, cfg.theta));
    return {std::move(ens), std::move(flow)};
}

LawFlow initial_law_flow(const SolverConfig& cfg, int dim, const InitialLaw& initial) {
    // Law of the initial segment, frozen at every node ("X^0(t) = X_0(t ^ 0)").
    ParticleEnsemble seed_ens;
    {
        SolverConfig c0 = cfg;
        c0.mode = Mode::frozen_law;
        seed_ens = init_ensemble(c0, dim, initial);
    }
    EmpiricalLaw base = law_of_ensemble(seed_ens, 0, cfg.law_support, cfg.theta);
    LawFlow flow;
    flow.grid = cfg.grid;
    flow.kind = cfg.law_support;
    flow.theta = cfg.theta;
    flow.laws.assign(static_cast<size_t>(cfg.grid.n_T) + 1, base);
    return flow;
}

double wasserstein_auto(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta) {
    WassersteinOptions opts;
    const bool sorted_ok = mu.kind() == SupportKind::endpoint && mu.dim() == 1 &&
                           mu.uniform_weights() && nu.uniform_weights() && mu.n() == nu.n();
    if (!sorted_ok && (mu.n() > opts.exact_cap || nu.n() > opts.exact_cap))
        opts.method = OtMethod::entropic;
    return wasserstein_theta(mu, nu, theta, opts);
}

double law_flow_distance(const LawFlow& a, const LawFlow& b, double theta) {
    if (a.laws.size() != b.laws.size() || a.kind != b.kind)
        throw InvalidInput("law flows must share grid and support kind");
    double best = 0;
    for (size_t k = 0; k < a.laws.size(); ++k)
        best = std::max(best, wasserstein_auto(a.laws[k], b.laws[k], theta));
    return best;
}

PicardResult run_picard(const CoefficientSet& set, const SolverConfig& cfg,
                        const InitialLaw& initial) {
    cfg.validate();
    PicardResult res;
    res.flows.push_back(initial_law_flow(cfg, set.dim, initial));

    SolverConfig run_cfg = cfg;
    run_cfg.mode = Mode::frozen_law;
    for (int sweep = 1; sweep <= cfg.picard_sweeps; ++sweep) {
        const CoefficientSet mollified = mollify(set, cfg.mollify_level(sweep), cfg.grid.T,
                                                 cfg.mollify_opts);
        ParticleEnsemble ens = run_frozen_law(mollified, res.flows.back(), run_cfg, initial);
        LawFlow flow;
        flow.grid = cfg.grid;
        flow.kind = cfg.law_support;
        flow.theta = cfg.theta;
        flow.laws.reserve(static_cast<size_t>(cfg.grid.n_T) + 1);
        for (int k = 0; k <= cfg.grid.n_T; ++k)
            flow.laws.push_back(law_of_ensemble(ens, k, cfg.law_support, cfg.theta));

        std::vector<double> node_dist(flow.laws.size());
        double sup = 0;
        for (size_t k = 0; k < flow.laws.size(); ++k) {
            node_dist[k] = wasserstein_auto(res.flows.back().laws[k], flow.laws[k], cfg.theta);
            sup = std::max(sup, node_dist[k]);
        }
        res.node_distances.push_back(std::move(node_dist));
        res.sweep_distances.push_back(sup);
        res.flows.push_back(std::move(flow));
        if (sweep == cfg.picard_sweeps) res.final_ensemble = std::move(ens);
    }
    for (size_t k = 1; k < res.sweep_distances.size(); ++k)
        if (res.sweep_distances[k] > res.sweep_distances[k - 1]) res.nondecreasing_warning = true;
    return res;
}

} // namespace mvsde
