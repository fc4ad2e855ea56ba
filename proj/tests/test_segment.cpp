#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "mvsde/segment.hpp"

using namespace mvsde;

TEST_SUITE("segment") {

TEST_CASE("grid validation") {
    const TimeGrid g = TimeGrid::make(0.25, 0.5, 2.0);
    CHECK(g.n_r == 2);
    CHECK(g.n_T == 8);
    CHECK(g.total_nodes() == 11);
    CHECK(g.node_time(0) == doctest::Approx(-0.5));
    CHECK(g.node_time(10) == doctest::Approx(2.0));
    CHECK(g.index_of(0.0) == 2);
    CHECK_THROWS_AS(TimeGrid::make(0.3, 1.0, 2.1), InvalidInput); // h does not divide r
    CHECK_THROWS_AS(TimeGrid::make(-0.1, 0.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(g.index_of(0.13), InvalidInput);
}

TEST_CASE("uniform norm examples") {
    const TimeGrid g = TimeGrid::make(1.0, 2.0, 1.0);
    SegmentPath zero{g, 0.0, 1, {0.0, 0.0, 0.0}};
    CHECK(uniform_norm(zero) == 0.0);

    SegmentPath p{g, 0.0, 1, {-3.0, 1.0, 2.0}};
    CHECK(uniform_norm(p) == 3.0);

    SegmentPath c{g, 0.0, 2, {1, 2, 1, 2, 1, 2}};
    CHECK(uniform_norm(c) == doctest::Approx(std::sqrt(5.0)));

    SegmentPath empty{g, 0.0, 1, {}};
    CHECK_THROWS_AS(uniform_norm(empty), InvalidInput);
}

TEST_CASE("uniform norm is a norm on fixed-grid segments") {
    const TimeGrid g = TimeGrid::make(0.5, 1.5, 1.0);
    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 200; ++rep) {
        SegmentPath a{g, 0.0, 2, {}}, b{g, 0.0, 2, {}};
        for (int k = 0; k < (g.n_r + 1) * 2; ++k) {
            a.values.push_back(nd(rng));
            b.values.push_back(nd(rng));
        }
        SegmentPath sum = a;
        for (size_t k = 0; k < sum.values.size(); ++k) sum.values[k] += b.values[k];
        CHECK(uniform_norm(sum) <= uniform_norm(a) + uniform_norm(b) + 1e-12);
        const double lam = nd(rng);
        SegmentPath scaled = a;
        for (auto& v : scaled.values) v *= lam;
        CHECK(uniform_norm(scaled) == doctest::Approx(std::abs(lam) * uniform_norm(a)));
    }
}

TEST_CASE("extract_segment windows") {
    // f(kh) = k with r = 2h
    const TimeGrid g = TimeGrid::make(1.0, 2.0, 6.0);
    Trajectory tr = Trajectory::zeros(g, 1);
    for (int k = 0; k < g.total_nodes(); ++k) tr.node(k)[0] = k - g.n_r;

    const SegmentPath s0 = extract_segment(tr, 0.0);
    CHECK(s0.values == std::vector<double>{-2, -1, 0});
    CHECK(s0.anchor == 0.0);

    const SegmentPath s4 = extract_segment(tr, 4.0);
    CHECK(s4.values == std::vector<double>{2, 3, 4});

    const SegmentPath sT = extract_segment(tr, 6.0);
    CHECK(sT.values == std::vector<double>{4, 5, 6});

    CHECK_THROWS_AS(extract_segment(tr, -1.0), InvalidInput);
    CHECK_THROWS_AS(extract_segment(tr, 6.5), InvalidInput);

    // node identity: window node k equals trajectory node t/h - n_r + k
    for (int k = 0; k <= g.n_r; ++k)
        CHECK(s4.node(k)[0] == tr.node(4 + g.n_r - g.n_r + k)[0]);
}

TEST_CASE("segment sup distance") {
    const TimeGrid g = TimeGrid::make(1.0, 2.0, 1.0);
    SegmentPath a{g, 0.0, 1, {0, 0, 0}};
    SegmentPath b{g, 0.0, 1, {1, -2, 1}};
    CHECK(segment_sup_distance(a, a) == 0.0);
    CHECK(segment_sup_distance(a, b) == 2.0);

    SegmentPath c{g, 0.0, 1, {3, 3, 3}};
    CHECK(segment_sup_distance(a, c) == 3.0);

    const TimeGrid g2 = TimeGrid::make(1.0, 3.0, 1.0);
    SegmentPath d{g2, 0.0, 1, {0, 0, 0, 0}};
    CHECK_THROWS_AS(segment_sup_distance(a, d), InvalidInput);

    // zero distance iff node-wise equality
    SegmentPath e = b;
    CHECK(segment_sup_distance(b, e) == 0.0);
    e.values[1] += 1e-9;
    CHECK(segment_sup_distance(b, e) > 0.0);
}

TEST_CASE("trajectory csv dump") {
    const TimeGrid g = TimeGrid::make(0.5, 0.5, 1.0);
    Trajectory tr = Trajectory::zeros(g, 2);
    tr.node(3)[0] = 1.25;
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    const std::string s = os.str();
    CHECK(s.substr(0, s.find('\n')) == "t,x_1,x_2");
    CHECK(s.find("1.25") != std::string::npos);
    CHECK(s.find("-0.5,0,0") != std::string::npos);
}

} // TEST_SUITE
