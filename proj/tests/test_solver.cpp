#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "mvsde/solver.hpp"

using namespace mvsde;

namespace {

SolverConfig base_config(double h, double r, double T, int particles, uint64_t seed = 42) {
    SolverConfig cfg;
    cfg.grid = TimeGrid::make(h, r, T);
    cfg.particles = particles;
    cfg.seed = seed;
    cfg.threads = 1;
    return cfg;
}

double endpoint_mean(const ParticleEnsemble& ens) {
    const int node = ens.grid.total_nodes() - 1;
    double s = 0;
    for (const auto& tr : ens.trajs) s += tr.node(node)[0];
    return s / ens.particles();
}

CoefficientSet zero_noise(CoefficientSet set) {
    set.sigma = [d = set.dim](double, const double*, const EmpiricalLaw&, double* out) {
        std::fill(out, out + d * d, 0.0);
    };
    return set;
}

} // namespace

TEST_SUITE("solver") {

TEST_CASE("initial segments are constant and coupled shifts are exact") {
    SolverConfig cfg = base_config(0.25, 0.5, 1.0, 16);
    InitialLaw mu0 = InitialLaw::gaussian({1.0}, 0.5);
    ParticleEnsemble a = init_ensemble(cfg, 1, mu0);
    ParticleEnsemble b = init_ensemble(cfg, 1, mu0.shifted({0.1}));
    for (int i = 0; i < cfg.particles; ++i) {
        for (int k = 0; k <= cfg.grid.n_r; ++k) {
            CHECK(a.trajs[i].node(k)[0] == a.trajs[i].node(0)[0]); // constant window
            CHECK(b.trajs[i].node(k)[0] == a.trajs[i].node(k)[0] + 0.1);
        }
    }
    CHECK(mu0.shifted({0.1}).expected_sq_gap() == doctest::Approx(0.01));
}

TEST_CASE("brownian endpoint variance matches T") {
    const int M = 20000;
    SolverConfig cfg = base_config(0.01, 0.0, 1.0, M);
    cfg.record_flow = false;
    const CoefficientSet set = model_zoo("brownian");
    auto [ens, flow] = run_interacting(set, cfg, InitialLaw::constant({0.0}));
    const int node = cfg.grid.total_nodes() - 1;
    double m = 0, v = 0;
    for (const auto& tr : ens.trajs) m += tr.node(node)[0];
    m /= M;
    for (const auto& tr : ens.trajs) {
        const double d = tr.node(node)[0] - m;
        v += d * d;
    }
    v /= (M - 1);
    CHECK(std::abs(v - 1.0) <= 3.0 * std::sqrt(2.0 / M) * 1.0);
    CHECK(std::abs(m) <= 3.0 / std::sqrt(double(M)));
}

TEST_CASE("zero-noise linear drift gives the explicit Euler orbit") {
    SolverConfig cfg = base_config(0.1, 0.0, 1.0, 3);
    CoefficientSet set = zero_noise(model_zoo("brownian"));
    set.b = [](double, const double* x, const EmpiricalLaw&, double* out) { out[0] = -x[0]; };
    const ParticleEnsemble ens =
        run_frozen_law(set, initial_law_flow(cfg, 1, InitialLaw::constant({2.0})), cfg,
                       InitialLaw::constant({2.0}));
    const double expected = 2.0 * std::pow(1.0 - cfg.grid.h, 10.0);
    CHECK(ens.trajs[0].node(cfg.grid.total_nodes() - 1)[0] == doctest::Approx(expected));
}

TEST_CASE("frozen-law run with a prescribed mean flow matches the ODE oracle") {
    // b = a (mbar(t) - x) with mbar from the flow; the empirical mean follows
    // the Euler recursion of m' = a (mbar - m) exactly in expectation
    const double a = 1.3, x0 = 0.5;
    const int M = 20000;
    SolverConfig cfg = base_config(0.01, 0.0, 1.0, M);
    const CoefficientSet set = model_zoo("meanfield-ou", {{"a", a}});
    LawFlow flow;
    flow.grid = cfg.grid;
    flow.kind = SupportKind::endpoint;
    flow.theta = 2;
    for (int k = 0; k <= cfg.grid.n_T; ++k)
        flow.laws.push_back(EmpiricalLaw::endpoint(1, {std::cos(k * cfg.grid.h)}));

    const ParticleEnsemble ens = run_frozen_law(set, flow, cfg, InitialLaw::constant({x0}));
    double m_ode = x0;
    for (int k = 0; k < cfg.grid.n_T; ++k)
        m_ode += cfg.grid.h * a * (std::cos(k * cfg.grid.h) - m_ode);
    CHECK(std::abs(endpoint_mean(ens) - m_ode) <= 3.0 / std::sqrt(double(M)));
}

TEST_CASE("distribution-free coefficients ignore the frozen flow") {
    SolverConfig cfg = base_config(0.05, 0.25, 0.5, 50);
    const CoefficientSet set = model_zoo("delay-linear", {{"c", 0.8}});
    LawFlow flow_a = initial_law_flow(cfg, 1, InitialLaw::constant({0.0}));
    LawFlow flow_b;
    flow_b.grid = cfg.grid;
    flow_b.kind = SupportKind::endpoint;
    flow_b.theta = 2;
    for (int k = 0; k <= cfg.grid.n_T; ++k)
        flow_b.laws.push_back(EmpiricalLaw::endpoint(1, {42.0 + k}));
    const InitialLaw init = InitialLaw::gaussian({1.0}, 0.2);
    const ParticleEnsemble ea = run_frozen_law(set, flow_a, cfg, init);
    const ParticleEnsemble eb = run_frozen_law(set, flow_b, cfg, init);
    for (int i = 0; i < cfg.particles; ++i)
        CHECK(ea.trajs[i].values == eb.trajs[i].values); // bitwise
}

TEST_CASE("interacting equals frozen-law bitwise for distribution-free sets") {
    SolverConfig cfg = base_config(0.05, 0.0, 1.0, 64);
    const CoefficientSet set = model_zoo("brownian");
    const InitialLaw init = InitialLaw::constant({0.0});
    auto [ei, flow] = run_interacting(set, cfg, init);
    const ParticleEnsemble ef = run_frozen_law(set, initial_law_flow(cfg, 1, init), cfg, init);
    for (int i = 0; i < cfg.particles; ++i)
        CHECK(ei.trajs[i].values == ef.trajs[i].values);
}

TEST_CASE("interacting mean-field OU keeps its center of mass") {
    const int M = 10000;
    SolverConfig cfg = base_config(0.01, 0.0, 1.0, M);
    cfg.record_flow = false;
    const CoefficientSet set = model_zoo("meanfield-ou", {{"a", 1.0}});
    auto [ens, flow] = run_interacting(set, cfg, InitialLaw::constant({0.7}));
    // m' = a(m - m) = 0: the mean-field ODE is stationary
    CHECK(std::abs(endpoint_mean(ens) - 0.7) <= 3.0 / std::sqrt(double(M)));
}

TEST_CASE("interacting delay-linear matches the delay-ODE oracle") {
    const int M = 10000;
    const double c = 1.0, r = 0.5, T = 1.5, h = 0.005;
    SolverConfig cfg = base_config(h, r, T, M);
    cfg.record_flow = false;
    const CoefficientSet set = model_zoo("delay-linear", {{"c", c}});
    auto [ens, flow] = run_interacting(set, cfg, InitialLaw::constant({1.0}));
    // deterministic delay-ODE on the same grid: m(t+h) = m(t) + h c m(t - r)
    std::vector<double> m(cfg.grid.total_nodes(), 1.0);
    for (int k = cfg.grid.n_r; k < cfg.grid.total_nodes() - 1; ++k)
        m[k + 1] = m[k] + h * c * m[k - cfg.grid.n_r];
    CHECK(std::abs(endpoint_mean(ens) - m.back()) <= 3.0 * std::sqrt(T / M) + 2 * h);
}

TEST_CASE("segment consistency: the drift sees extract_segment windows") {
    // zero noise + delay drift: the recursion must reproduce bit-for-bit from
    // the dumped trajectory and extract_segment
    const double c = 0.9;
    SolverConfig cfg = base_config(0.125, 0.25, 1.0, 2);
    const CoefficientSet set = zero_noise(model_zoo("delay-linear", {{"c", c}}));
    const ParticleEnsemble ens =
        run_frozen_law(set, initial_law_flow(cfg, 1, InitialLaw::constant({1.0})), cfg,
                       InitialLaw::constant({1.0}));
    const Trajectory& tr = ens.trajs[0];
    for (int k = 0; k < cfg.grid.n_T; ++k) {
        const double t = k * cfg.grid.h;
        const SegmentPath seg = extract_segment(tr, t);
        const double expect = tr.node(cfg.grid.n_r + k)[0] + cfg.grid.h * c * seg.node(0)[0];
        CHECK(tr.node(cfg.grid.n_r + k + 1)[0] == doctest::Approx(expect).epsilon(1e-15));
    }
}

TEST_CASE("blow-up raises with particle and time") {
    SolverConfig cfg = base_config(0.25, 0.0, 1.0, 2);
    cfg.blowup_threshold = 10.0;
    CoefficientSet set = zero_noise(model_zoo("brownian"));
    set.b = [](double, const double* x, const EmpiricalLaw&, double* out) {
        out[0] = x[0] * x[0];
    };
    CHECK_THROWS_AS(run_frozen_law(set, initial_law_flow(cfg, 1, InitialLaw::constant({3.0})),
                                   cfg, InitialLaw::constant({3.0})),
                    BlowUpError);
}

TEST_CASE("thread count does not change results") {
    const CoefficientSet set = model_zoo("meanfield-ou", {{"a", 1.0}});
    std::vector<std::vector<double>> snapshots;
    for (int threads : {1, 3, 8}) {
        SolverConfig cfg = base_config(0.02, 0.1, 0.5, 500);
        cfg.threads = threads;
        cfg.record_flow = false;
        auto [ens, flow] = run_interacting(set, cfg, InitialLaw::gaussian({0.0}, 1.0));
        snapshots.push_back(ens.trajs[123].values);
        CHECK(snapshots.back() == snapshots.front()); // bitwise
    }
}

TEST_CASE("law flow distance") {
    SolverConfig cfg = base_config(0.1, 0.0, 0.3, 8);
    LawFlow a, b;
    a.grid = b.grid = cfg.grid;
    a.kind = b.kind = SupportKind::endpoint;
    a.theta = b.theta = 2;
    for (int k = 0; k <= 3; ++k) {
        a.laws.push_back(EmpiricalLaw::endpoint(1, {0.0, 1.0, double(k)}));
        b.laws.push_back(EmpiricalLaw::endpoint(1, {0.5, 1.5, double(k) + 0.5}));
    }
    CHECK(law_flow_distance(a, a, 2.0) == 0.0);
    CHECK(law_flow_distance(a, b, 2.0) == doctest::Approx(0.5)); // translation by 0.5

    LawFlow single_a, single_b;
    single_a.grid = single_b.grid = cfg.grid;
    single_a.kind = single_b.kind = SupportKind::endpoint;
    single_a.laws.push_back(a.laws[0]);
    single_b.laws.push_back(b.laws[0]);
    CHECK(law_flow_distance(single_a, single_b, 2.0) ==
          doctest::Approx(wasserstein_theta(a.laws[0], b.laws[0], 2.0)));

    LawFlow seg;
    seg.grid = cfg.grid;
    seg.kind = SupportKind::segment;
    seg.laws.push_back(a.laws[0]);
    CHECK_THROWS_AS(law_flow_distance(a, seg, 2.0), InvalidInput);
}

TEST_CASE("picard: distribution-free models stabilize exactly") {
    SolverConfig cfg = base_config(0.05, 0.0, 0.5, 200);
    cfg.picard_sweeps = 3;
    cfg.mollify_levels = {16, 16, 16};
    const PicardResult res = run_picard(model_zoo("brownian"), cfg, InitialLaw::constant({0.0}));
    REQUIRE(res.sweep_distances.size() == 3);
    CHECK(res.sweep_distances[1] == 0.0); // sweeps 1 and 2 coincide bitwise
    CHECK(res.sweep_distances[2] == 0.0);
    CHECK(law_flow_distance(res.flows[1], res.flows[3], 2.0) == 0.0);
}

TEST_CASE("picard: mean-field OU sweeps contract") {
    SolverConfig cfg = base_config(0.01, 0.0, 0.5, 2000);
    cfg.picard_sweeps = 4;
    cfg.mollify_levels = {64, 64, 64, 64};
    const CoefficientSet set = model_zoo("meanfield-ou", {{"a", 1.0}});
    const PicardResult res = run_picard(set, cfg, InitialLaw::constant({1.0}));
    REQUIRE(res.sweep_distances.size() == 4);
    // d1 is the point-mass-to-cloud distance, then the lagged-law map
    // contracts by at least 1 - e^{-aT} < 1/2 per sweep
    CHECK(res.sweep_distances[1] <= 0.5 * res.sweep_distances[0]);
    CHECK(res.sweep_distances[2] <= 0.5 * res.sweep_distances[1]);
    CHECK(res.sweep_distances[3] <= 0.5 * res.sweep_distances[2]);
    // final endpoint mean near the stationary mean-field mean
    CHECK(std::abs(endpoint_mean(res.final_ensemble) - 1.0) <=
          3.0 / std::sqrt(2000.0) + 2 * cfg.grid.h);
}

TEST_CASE("picard sweep distances come with per-node detail") {
    SolverConfig cfg = base_config(0.05, 0.0, 0.25, 100);
    cfg.picard_sweeps = 2;
    cfg.mollify_levels = {8, 8};
    const PicardResult res = run_picard(model_zoo("meanfield-ou"), cfg, InitialLaw::constant({0.3}));
    REQUIRE(res.node_distances.size() == 2);
    for (const auto& nd : res.node_distances) {
        CHECK(static_cast<int>(nd.size()) == cfg.grid.n_T + 1);
        const double sup = *std::max_element(nd.begin(), nd.end());
        CHECK(sup >= 0);
    }
    CHECK(res.node_distances[0][0] == 0.0); // same initial law at t = 0
}

TEST_CASE("segment-support law flows") {
    SolverConfig cfg = base_config(0.1, 0.2, 0.5, 32);
    cfg.law_support = SupportKind::segment;
    auto [ens, flow] = run_interacting(model_zoo("brownian"), cfg, InitialLaw::constant({0.0}));
    REQUIRE(static_cast<int>(flow.laws.size()) == cfg.grid.n_T + 1);
    CHECK(flow.laws[0].kind() == SupportKind::segment);
    CHECK(flow.laws[0].nodes() == cfg.grid.n_r + 1);
    // law at step k holds the pre-step segments
    const EmpiricalLaw again = law_of_ensemble(ens, 0, SupportKind::segment, 2.0);
    CHECK(flow.laws[0].samples_flat() == again.samples_flat());
}

} // TEST_SUITE
