#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "mvsde/measure.hpp"

using namespace mvsde;

namespace {

// Independent oracle: minimum over all N! permutation couplings.
double brute_force_w(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta) {
    const int n = mu.n();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0;
        for (int i = 0; i < n; ++i) s += std::pow(mu.distance(i, nu, perm[i]), theta);
        best = std::min(best, s / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::pow(best, 1.0 / theta);
}

EmpiricalLaw random_cloud(std::mt19937& rng, int n, int d, double theta) {
    std::normal_distribution<double> nd;
    std::vector<double> flat(static_cast<size_t>(n) * d);
    for (auto& v : flat) v = nd(rng);
    return EmpiricalLaw::endpoint(d, std::move(flat), {}, theta);
}

} // namespace

TEST_SUITE("measure") {

TEST_CASE("law invariants") {
    CHECK_THROWS_AS(EmpiricalLaw::endpoint(1, {}), InvalidInput);
    CHECK_THROWS_AS(EmpiricalLaw::endpoint(1, {1.0}, {0.5}), InvalidInput);      // weights != 1
    CHECK_THROWS_AS(EmpiricalLaw::endpoint(1, {1.0}, {}, 0.5), InvalidInput);    // theta < 1
    CHECK_THROWS_AS(EmpiricalLaw::endpoint(1, {1.0, 2.0}, {0.7, -0.3}), InvalidInput);
    const EmpiricalLaw ok = EmpiricalLaw::endpoint(2, {1, 2, 3, 4}, {0.25, 0.75});
    CHECK(ok.n() == 2);
    CHECK(ok.weight(0) == 0.25);
}

TEST_CASE("theta moment") {
    const EmpiricalLaw zero = EmpiricalLaw::endpoint(1, {0.0, 0.0});
    CHECK(theta_moment(zero) == 0.0);
    const EmpiricalLaw pm = EmpiricalLaw::endpoint(1, {-1.0, 1.0}, {}, 2.0);
    CHECK(theta_moment(pm) == doctest::Approx(1.0));

    const TimeGrid g = TimeGrid::make(1.0, 2.0, 1.0);
    const EmpiricalLaw seg = EmpiricalLaw::segment(g, 2, {3, 4, 3, 4, 3, 4}, {}, 1.0);
    CHECK(theta_moment(seg) == doctest::Approx(5.0)); // constant segment c = (3,4)
}

TEST_CASE("mean endpoint") {
    const EmpiricalLaw law = EmpiricalLaw::endpoint(1, {0.0, 2.0, 4.0});
    CHECK(law.mean_endpoint()[0] == doctest::Approx(2.0));
    const TimeGrid g = TimeGrid::make(1.0, 1.0, 1.0);
    const EmpiricalLaw seg = EmpiricalLaw::segment(g, 1, {5.0, 1.0, 5.0, 3.0});
    CHECK(seg.mean_endpoint()[0] == doctest::Approx(2.0)); // final nodes 1 and 3
}

TEST_CASE("two-point example from enumeration") {
    const EmpiricalLaw mu = EmpiricalLaw::endpoint(1, {0.0, 2.0});
    const EmpiricalLaw nu = EmpiricalLaw::endpoint(1, {1.0, 3.0});
    // enumerate both couplings: monotone (1+1)/2 beats crossed (9+1)/2
    CHECK(wasserstein_theta(mu, nu, 1.0) == doctest::Approx(1.0));
    CHECK(wasserstein_theta(mu, nu, 2.0) == doctest::Approx(1.0));
    CHECK(wasserstein_theta(mu, mu, 2.0) == doctest::Approx(0.0));

    const TransportPlan plan = optimal_plan(mu, nu, 2.0);
    CHECK(plan.at(0, 0) == doctest::Approx(0.5));
    CHECK(plan.at(1, 1) == doctest::Approx(0.5));
    CHECK(plan.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("identity plan and product coupling") {
    const EmpiricalLaw mu = EmpiricalLaw::endpoint(1, {0.0, 5.0, 9.0});
    const TransportPlan diag = optimal_plan(mu, mu, 2.0);
    for (int i = 0; i < 3; ++i) CHECK(diag.at(i, i) == doctest::Approx(1.0 / 3));

    const EmpiricalLaw one = EmpiricalLaw::endpoint(1, {1.0});
    const EmpiricalLaw three = EmpiricalLaw::endpoint(1, {0.0, 1.0, 2.0}, {0.2, 0.3, 0.5});
    const TransportPlan prod = optimal_plan(one, three, 2.0);
    CHECK(prod.at(0, 0) == doctest::Approx(0.2));
    CHECK(prod.at(0, 1) == doctest::Approx(0.3));
    CHECK(prod.at(0, 2) == doctest::Approx(0.5));
}

TEST_CASE("exact equals brute force on random clouds") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> nd_n(2, 6);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = nd_n(rng);
        const int d = 1 + rep % 2;
        const double theta = (rep % 2) ? 2.0 : 1.0;
        const EmpiricalLaw mu = random_cloud(rng, n, d, theta);
        const EmpiricalLaw nu = random_cloud(rng, n, d, theta);
        const double exact = wasserstein_theta(mu, nu, theta);
        CHECK(exact == doctest::Approx(brute_force_w(mu, nu, theta)).epsilon(1e-12));
    }
}

TEST_CASE("weighted transport equals unit-expansion assignment oracle") {
    // rational weights expand into unit atoms; assignment on the expansion is
    // an exact independent oracle for the simplex path
    std::mt19937 rng(23);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 25; ++rep) {
        const int L = 6; // weight denominator
        std::uniform_int_distribution<int> cnt(1, 3);
        const int n = cnt(rng) + 1, m = cnt(rng) + 1;
        auto masses = [&](int k) {
            std::vector<int> u(static_cast<size_t>(k), 1);
            int left = L - k;
            while (left > 0) {
                u[static_cast<size_t>(rng() % k)] += 1;
                --left;
            }
            return u;
        };
        const auto wa = masses(n), wb = masses(m);
        std::vector<double> xa(n), xb(m);
        for (auto& v : xa) v = nd(rng);
        for (auto& v : xb) v = nd(rng);

        std::vector<double> waw(n), wbw(m);
        for (int i = 0; i < n; ++i) waw[static_cast<size_t>(i)] = double(wa[static_cast<size_t>(i)]) / L;
        for (int j = 0; j < m; ++j) wbw[static_cast<size_t>(j)] = double(wb[static_cast<size_t>(j)]) / L;
        const EmpiricalLaw mu = EmpiricalLaw::endpoint(1, std::vector<double>(xa), waw);
        const EmpiricalLaw nu = EmpiricalLaw::endpoint(1, std::vector<double>(xb), wbw);
        const double theta = 2.0;
        const double got = wasserstein_theta(mu, nu, theta);

        // expansion: L unit atoms per side, uniform -> assignment
        std::vector<double> ea, eb;
        for (int i = 0; i < n; ++i) ea.insert(ea.end(), wa[static_cast<size_t>(i)], xa[static_cast<size_t>(i)]);
        for (int j = 0; j < m; ++j) eb.insert(eb.end(), wb[static_cast<size_t>(j)], xb[static_cast<size_t>(j)]);
        const EmpiricalLaw emu = EmpiricalLaw::endpoint(1, std::move(ea));
        const EmpiricalLaw enu = EmpiricalLaw::endpoint(1, std::move(eb));
        const double expanded = wasserstein_theta(emu, enu, theta);
        CHECK(got == doctest::Approx(expanded).epsilon(1e-9));
    }
}

TEST_CASE("plan feasibility") {
    const EmpiricalLaw mu = EmpiricalLaw::endpoint(2, {0, 0, 1, 1, 2, 0}, {0.5, 0.2, 0.3});
    const EmpiricalLaw nu = EmpiricalLaw::endpoint(2, {1, 1, -1, 0}, {0.6, 0.4});
    const TransportPlan plan = optimal_plan(mu, nu, 2.0);
    for (int i = 0; i < plan.rows; ++i) {
        double rs = 0;
        for (int j = 0; j < plan.cols; ++j) rs += plan.at(i, j);
        CHECK(rs == doctest::Approx(mu.weight(i)).epsilon(1e-9));
    }
    for (int j = 0; j < plan.cols; ++j) {
        double cs = 0;
        for (int i = 0; i < plan.rows; ++i) cs += plan.at(i, j);
        CHECK(cs == doctest::Approx(nu.weight(j)).epsilon(1e-9));
    }
}

TEST_CASE("metric properties on random clouds") {
    std::mt19937 rng(17);
    for (int rep = 0; rep < 30; ++rep) {
        const double theta = (rep % 2) ? 1.0 : 2.0;
        const EmpiricalLaw a = random_cloud(rng, 5, 2, theta);
        const EmpiricalLaw b = random_cloud(rng, 5, 2, theta);
        const EmpiricalLaw c = random_cloud(rng, 5, 2, theta);
        const double ab = wasserstein_theta(a, b, theta);
        const double ba = wasserstein_theta(b, a, theta);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= wasserstein_theta(a, c, theta) + wasserstein_theta(c, b, theta) + 1e-9);
    }
}

TEST_CASE("monotonicity in theta") {
    std::mt19937 rng(41);
    for (int rep = 0; rep < 20; ++rep) {
        const EmpiricalLaw a = random_cloud(rng, 6, 1, 1.0);
        const EmpiricalLaw b = random_cloud(rng, 6, 1, 1.0);
        CHECK(wasserstein_theta(a, b, 1.0) <= wasserstein_theta(a, b, 2.0) + 1e-12);
        CHECK(wasserstein_theta(a, b, 1.5) <= wasserstein_theta(a, b, 3.0) + 1e-12);
    }
}

TEST_CASE("entropic value brackets exact within the reported gap") {
    std::mt19937 rng(53);
    WassersteinOptions ent;
    ent.method = OtMethod::entropic;
    ent.entropic_eps_scale = 0.1; // converges under the iteration budget here
    ent.entropic_marginal_tol = 1e-4;
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 24 + 8 * (rep % 3);
        const EmpiricalLaw a = random_cloud(rng, n, 2, 2.0);
        const EmpiricalLaw b = random_cloud(rng, n, 2, 2.0);
        const double exact = wasserstein_theta(a, b, 2.0);
        const WassersteinResult res = wasserstein_theta_full(a, b, 2.0, ent);
        CHECK(std::abs(res.value - exact) <= res.duality_gap + 1e-9);
        CHECK(res.duality_gap >= 0);
    }
}

TEST_CASE("entropic symmetry within gap") {
    std::mt19937 rng(67);
    WassersteinOptions ent;
    ent.method = OtMethod::entropic;
    ent.entropic_eps_scale = 0.1;
    ent.entropic_marginal_tol = 1e-4;
    const EmpiricalLaw a = random_cloud(rng, 32, 1, 2.0);
    const EmpiricalLaw b = random_cloud(rng, 32, 1, 2.0);
    const WassersteinResult ab = wasserstein_theta_full(a, b, 2.0, ent);
    const WassersteinResult ba = wasserstein_theta_full(b, a, 2.0, ent);
    CHECK(std::abs(ab.value - ba.value) <= ab.duality_gap + ba.duality_gap + 1e-9);
}

TEST_CASE("entropic non-convergence carries the residual") {
    std::mt19937 rng(71);
    WassersteinOptions ent;
    ent.method = OtMethod::entropic;
    ent.entropic_eps_scale = 1e-4; // far too cold for the iteration budget
    ent.entropic_max_iters = 50;
    const EmpiricalLaw a = random_cloud(rng, 24, 2, 2.0);
    const EmpiricalLaw b = random_cloud(rng, 24, 2, 2.0);
    CHECK_THROWS_AS(wasserstein_theta_full(a, b, 2.0, ent), ConvergenceError);
    try {
        wasserstein_theta_full(a, b, 2.0, ent);
    } catch (const ConvergenceError& e) {
        CHECK(e.residual > 0);
    }
}

TEST_CASE("segment-support distance uses the window sup cost") {
    const TimeGrid g = TimeGrid::make(1.0, 2.0, 1.0);
    // one-atom clouds: distance is the plain window sup distance
    const EmpiricalLaw a1 = EmpiricalLaw::segment(g, 1, {0, 0, 0});
    const EmpiricalLaw b1 = EmpiricalLaw::segment(g, 1, {0, 2, 0});
    CHECK(wasserstein_theta(a1, b1, 1.0) == doctest::Approx(2.0));
    CHECK(wasserstein_theta(a1, b1, 2.0) == doctest::Approx(2.0));
    // two atoms: crossed matching (sup costs 1 and 1) beats identity (0 and 2)
    const EmpiricalLaw a = EmpiricalLaw::segment(g, 1, {0, 0, 0, /* atom2 */ 1, 1, 1});
    const EmpiricalLaw b = EmpiricalLaw::segment(g, 1, {0, 2, 0, /* atom2 */ 1, 1, 1});
    CHECK(wasserstein_theta(a, b, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("mixed support kinds are rejected") {
    const TimeGrid g = TimeGrid::make(1.0, 1.0, 1.0);
    const EmpiricalLaw seg = EmpiricalLaw::segment(g, 1, {0, 0});
    const EmpiricalLaw pt = EmpiricalLaw::endpoint(1, {0.0});
    CHECK_THROWS_AS(wasserstein_theta(seg, pt, 2.0), InvalidInput);
}

TEST_CASE("exact cap") {
    std::mt19937 rng(3);
    const EmpiricalLaw a = random_cloud(rng, 8, 1, 2.0);
    const EmpiricalLaw b = random_cloud(rng, 8, 1, 2.0);
    WassersteinOptions opts;
    opts.exact_cap = 4;
    CHECK_THROWS_AS(optimal_plan(a, b, 2.0, opts), UnsupportedSize);
}

TEST_CASE("law csv round trip") {
    const EmpiricalLaw law = EmpiricalLaw::endpoint(2, {0.5, -1.25, 3.0, 4.0}, {0.25, 0.75});
    std::stringstream ss;
    write_law_csv(ss, law);
    const EmpiricalLaw back = read_law_csv(ss);
    REQUIRE(back.n() == 2);
    CHECK(back.weight(0) == doctest::Approx(0.25));
    CHECK(back.sample(1)[1] == doctest::Approx(4.0));

    const TimeGrid g = TimeGrid::make(1.0, 1.0, 1.0);
    const EmpiricalLaw seg = EmpiricalLaw::segment(g, 1, {1.5, 2.5});
    std::stringstream s2;
    write_law_csv(s2, seg);
    const EmpiricalLaw segback = read_law_csv(s2);
    CHECK(segback.kind() == SupportKind::segment);
    CHECK(segback.nodes() == 2);
    CHECK(segback.sample(0)[1] == doctest::Approx(2.5));
}

} // TEST_SUITE
