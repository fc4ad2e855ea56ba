#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "mvsde/girsanov.hpp"

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

} // namespace

TEST_SUITE("girsanov") {

TEST_CASE("accumulator basics and the +-gamma identity") {
    GirsanovAccumulator acc;
    CHECK(acc.log_weight() == 0.0);
    CHECK(acc.weight() == 1.0);

    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    GirsanovAccumulator plus, minus;
    const double h = 0.1;
    for (int k = 0; k < 50; ++k) {
        double u[2] = {nd(rng), nd(rng)};
        double mu[2] = {-u[0], -u[1]};
        double dw[2] = {nd(rng) * std::sqrt(h), nd(rng) * std::sqrt(h)};
        plus.add(u, dw, h, 2);
        minus.add(mu, dw, h, 2);
    }
    // R+ R- = exp(-Q) exactly on the discrete sums
    CHECK(plus.log_weight() + minus.log_weight() == doctest::Approx(-plus.quad).epsilon(1e-12));
    CHECK(plus.quad == doctest::Approx(minus.quad));
}

TEST_CASE("shift gamma: zero shift") {
    const TimeGrid g = TimeGrid::make(0.25, 0.5, 1.5);
    const ShiftCoupling sc = shift_gamma(Eta::zero(g, 1), g);
    for (double v : sc.gamma) CHECK(v == 0.0);
    for (double v : sc.gamma_fd) CHECK(v == 0.0);
    for (double v : sc.gamma_deriv) CHECK(v == 0.0);
}

TEST_CASE("shift gamma: the worked piecewise example") {
    // r=1, T=2, eta(s) = s+1: eta(-1) = 0, gamma = 0 until T-r, then s-1
    const TimeGrid g = TimeGrid::make(0.25, 1.0, 2.0);
    const Eta eta = Eta::affine(g, {1.0}, {1.0});
    const ShiftCoupling sc = shift_gamma(eta, g);
    for (int k = 0; k < g.total_nodes(); ++k) {
        const double s = g.node_time(k);
        const double expect = s <= 1.0 ? 0.0 : s - 1.0;
        CHECK(sc.gamma_at(k)[0] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(sc.gamma_at(g.total_nodes() - 1)[0] == doctest::Approx(1.0)); // gamma(T) = eta(0)
}

TEST_CASE("shift gamma: branch continuity at T - r") {
    const TimeGrid g = TimeGrid::make(0.125, 0.5, 2.0);
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
        const Eta eta = Eta::affine(g, {nd(rng)}, {nd(rng)});
        const ShiftCoupling sc = shift_gamma(eta, g);
        const int k_join = g.index_of(g.T - g.r);
        // branch 1 value at the joint equals eta(-r) by the formula
        const double branch1 = ((g.T - g.r) / (g.T - g.r)) * eta.at(0)[0];
        CHECK(sc.gamma_at(k_join)[0] == doctest::Approx(branch1).epsilon(1e-12));
        // gamma(T) = eta(0), gamma(s <= 0) = 0 iff eta(-r) = 0 scaled
        CHECK(sc.gamma_at(g.total_nodes() - 1)[0] ==
              doctest::Approx(eta.at(g.n_r)[0]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(shift_gamma(Eta::zero(TimeGrid::make(0.5, 1.0, 1.0), 1),
                                TimeGrid::make(0.5, 1.0, 1.0)),
                    InvalidInput); // T <= r
}

TEST_CASE("beta bound: hand-evaluated example") {
    // r=1, T=2, eta(s)=s+1, phi=s^(1/4), C=2, |sigma^{-1}|=1
    const TimeGrid g = TimeGrid::make(0.05, 1.0, 2.0);
    const Eta eta = Eta::affine(g, {1.0}, {1.0});
    const BetaBound b = beta_bound(eta, g, DiniModulus::power(0.25), 2.0, 1.0);
    CHECK(b.comp_initial == doctest::Approx(0.0));
    CHECK(b.comp_deriv == doctest::Approx(1.0));
    CHECK(b.comp_phi == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(b.comp_norm == doctest::Approx(2.0));
    CHECK(b.total == doctest::Approx(2.0 + 4.0 * std::sqrt(2.0) + 4.0));
}

TEST_CASE("beta bound: zero shift and the (T - r) scaling") {
    const TimeGrid g2 = TimeGrid::make(0.25, 1.0, 2.0);
    CHECK(beta_bound(Eta::zero(g2, 1), g2, DiniModulus::zero(), 2.0, 1.0).total == 0.0);
    // constant eta: doubling T - r halves the first component exactly
    const Eta c2 = Eta::affine(g2, {0.7}, {0.0});
    const TimeGrid g3 = TimeGrid::make(0.25, 1.0, 3.0);
    const Eta c3 = Eta::affine(g3, {0.7}, {0.0});
    const BetaBound b2 = beta_bound(c2, g2, DiniModulus::zero(), 2.0, 1.0);
    const BetaBound b3 = beta_bound(c3, g3, DiniModulus::zero(), 2.0, 1.0);
    CHECK(b3.comp_initial == doctest::Approx(0.5 * b2.comp_initial));
    CHECK(b2.comp_initial > 0);
}

TEST_CASE("coupled shift run: zero shift is the identity coupling") {
    SolverConfig cfg = base_config(0.05, 0.25, 1.0, 64);
    const CoefficientSet set = model_zoo("brownian");
    const InitialLaw init = InitialLaw::constant({0.0});
    const LawFlow flow = initial_law_flow(cfg, 1, init);
    const CoupledShiftResult res =
        coupled_shift_run(set, cfg, init, flow, Eta::zero(cfg.grid, 1));
    for (int i = 0; i < 64; ++i) {
        CHECK(res.log_weight[i] == 0.0);
        CHECK(res.int_phi_sq[i] == 0.0);
    }
    const ParticleEnsemble xbar = res.materialize_xbar();
    CHECK(xbar.trajs[5].values == res.x.trajs[5].values);
}

TEST_CASE("coupled shift run: shifted terminal segment and weight moments") {
    const double h = 0.01, r = 0.25, T = 1.0;
    const int M = 20000;
    SolverConfig cfg = base_config(h, r, T, M);
    const CoefficientSet set = model_zoo("brownian");
    const InitialLaw init = InitialLaw::constant({0.0});
    const LawFlow flow = initial_law_flow(cfg, 1, init);
    const Eta eta = Eta::affine(cfg.grid, {0.05, /*unused*/}, {0.2});
    const CoupledShiftResult res = coupled_shift_run(set, cfg, init, flow, eta);

    // X-bar_T = X_T + eta node-wise
    const SegmentPath xT = extract_segment(res.x.trajs[17], T);
    const SegmentPath xbarT = res.xbar_segment(17, T);
    for (int k = 0; k <= cfg.grid.n_r; ++k)
        CHECK(xbarT.node(k)[0] == doctest::Approx(xT.node(k)[0] + eta.at(k)[0]).epsilon(1e-12));

    // brownian: Phi-bar = gamma' (deterministic), so E R = 1 and
    // E[R log R] = 0.5 int |gamma'|^2 in closed form
    const double q = res.int_phi_sq[0];
    for (int i = 1; i < 10; ++i) CHECK(res.int_phi_sq[i] == doctest::Approx(q));
    const WeightMoment m1 = weight_moment(res.log_weight, 1.0);
    CHECK(std::abs(m1.estimate.value - 1.0) <= 3.0 * m1.estimate.ci);

    StatEstimate ent = batch_mean_fn(M, [&](int64_t i) {
        return std::exp(res.log_weight[i]) * res.log_weight[i];
    });
    CHECK(std::abs(ent.value - 0.5 * q) <= 3.0 * ent.ci);

    // deterministic drift: E R^s = exp(s (s-1) Q / 2)
    const WeightMoment m3 = weight_moment(res.log_weight, 3.0);
    CHECK(std::abs(m3.estimate.value - std::exp(3.0 * q)) <= 3.0 * m3.estimate.ci);
}

TEST_CASE("coupled shift run: change-of-measure identity against a fresh run") {
    const double h = 0.01, r = 0.25, T = 1.0;
    const int M = 40000;
    SolverConfig cfg = base_config(h, r, T, M, 42);
    const CoefficientSet set = model_zoo("dini-drift");
    const InitialLaw init = InitialLaw::constant({0.1});
    SolverConfig flow_cfg = cfg;
    flow_cfg.particles = 4000;
    const LawFlow flow = run_interacting(set, flow_cfg, init).second;
    const Eta eta = Eta::affine(cfg.grid, {0.05}, {0.2});
    const CoupledShiftResult res = coupled_shift_run(set, cfg, init, flow, eta);

    SolverConfig cfg2 = cfg;
    cfg2.seed = 777;
    const ParticleEnsemble indep = run_frozen_law(set, flow, cfg2, init);

    const int node = cfg.grid.total_nodes() - 1;
    const auto g = [](SegmentView v) { return std::tanh(v.node(v.nodes() - 1)[0]); };
    StatEstimate weighted = batch_mean_fn(M, [&](int64_t i) {
        SegmentPath sb = res.xbar_segment(static_cast<int>(i), T);
        return std::exp(res.log_weight[i]) * g(SegmentView{sb.values.data(), sb.nodes(), 1});
    });
    StatEstimate plain = batch_mean_fn(M, [&](int64_t i) {
        return g(segment_view(indep.trajs[static_cast<size_t>(i)], node));
    });
    const StatEstimate diff = sub_independent(weighted, plain);
    CHECK(std::abs(diff.value) <= 3.0 * diff.ci);
}

TEST_CASE("coupled shift run: dini-drift envelope gives a finite implied C") {
    SolverConfig cfg = base_config(0.025, 0.25, 1.0, 2000);
    const CoefficientSet set = model_zoo("dini-drift");
    const InitialLaw init = InitialLaw::constant({0.0});
    SolverConfig flow_cfg = cfg;
    flow_cfg.particles = 1000;
    const LawFlow flow = run_interacting(set, flow_cfg, init).second;
    const Eta eta = Eta::affine(cfg.grid, {0.1}, {0.3});
    const CoupledShiftResult res = coupled_shift_run(set, cfg, init, flow, eta);
    const double max_q = *std::max_element(res.int_phi_sq.begin(), res.int_phi_sq.end());
    const double implied = implied_envelope_C(max_q, eta, cfg.grid, set.phi, 1.0);
    CHECK(std::isfinite(implied));
    CHECK(implied > 0);
    // the envelope at the implied C covers the worst path
    const BetaBound at_implied = beta_bound(eta, cfg.grid, set.phi, implied, 1.0);
    CHECK(at_implied.total >= max_q * (1 - 1e-9));
}

TEST_CASE("coupled shift run requires state-free sigma") {
    SolverConfig cfg = base_config(0.1, 0.2, 1.0, 4);
    CoefficientSet set = model_zoo("brownian");
    set.sigma = [](double, const double* x, const EmpiricalLaw&, double* out) {
        out[0] = 1.0 + 0.1 * std::tanh(x[0]);
    };
    set.sigma_state_free = false;
    const InitialLaw init = InitialLaw::constant({0.0});
    const LawFlow flow = initial_law_flow(cfg, 1, init);
    CHECK_THROWS_AS(coupled_shift_run(set, cfg, init, flow, Eta::zero(cfg.grid, 1)),
                    InvalidInput);
}

TEST_CASE("log-harnack drift formula") {
    const CoefficientSet set = model_zoo("meanfield-ou", {{"a", 1.5}});
    const EmpiricalLaw mu = EmpiricalLaw::endpoint(1, {0.0, 1.0});
    const EmpiricalLaw nu = EmpiricalLaw::endpoint(1, {0.4, 1.8});
    double x = 0.3;
    const std::vector<double> window(3, 0.3);
    const SegmentView xs{window.data(), 3, 1};
    const auto same = log_harnack_drift(set, 0.1, &x, xs, mu, mu);
    CHECK(same[0] == 0.0);
    const auto drift = log_harnack_drift(set, 0.1, &x, xs, mu, nu);
    // sigma = I: gamma-bar = a (m_mu - m_nu)
    CHECK(drift[0] == doctest::Approx(1.5 * (0.5 - 1.1)));
    // (H)-style bound: |gamma-bar| <= L W_2(mu, nu) within the probe
    const double w2 = wasserstein_theta(mu, nu, 2.0);
    CHECK(std::abs(drift[0]) <= set.L * w2 + 1e-9);
}

TEST_CASE("relative entropy of the weights is nonnegative up to CI") {
    SolverConfig cfg = base_config(0.01, 0.25, 1.0, 10000);
    const CoefficientSet set = model_zoo("dini-drift");
    const InitialLaw init = InitialLaw::constant({0.2});
    SolverConfig fc = cfg;
    fc.particles = 1000;
    const LawFlow flow = run_interacting(set, fc, init).second;
    for (uint64_t seed : {11ull, 22ull, 33ull}) {
        cfg.seed = seed;
        const CoupledShiftResult res =
            coupled_shift_run(set, cfg, init, flow, Eta::affine(cfg.grid, {0.05}, {0.2}));
        const StatEstimate ent = batch_mean_fn(cfg.particles, [&](int64_t i) {
            const double lw = res.log_weight[static_cast<size_t>(i)];
            return std::exp(lw) * lw;
        });
        CHECK(ent.value >= -3.0 * ent.ci);
    }
}

TEST_CASE("weight moment edge cases") {
    const std::vector<double> ones(200, 0.0); // log R = 0
    const WeightMoment wm = weight_moment(ones, 2.0);
    CHECK(wm.estimate.value == doctest::Approx(1.0));
    CHECK(wm.estimate.ci == doctest::Approx(0.0));
    CHECK_FALSE(wm.overflow);

    const std::vector<double> big(40, 500.0);
    const WeightMoment over = weight_moment(big, 2.0);
    CHECK(over.overflow);
    CHECK(std::isinf(over.estimate.value));
    CHECK(over.max_exponent == doctest::Approx(1000.0));

    CHECK_THROWS_AS(weight_moment(ones, 0.5), InvalidInput);
}

} // TEST_SUITE
