#include "doctest.h"

#include <cmath>
#include <set>

#include "mvsde/rng.hpp"

using namespace mvsde;

TEST_SUITE("rng") {

// Known-answer vectors from the Random123 distribution (philox4x32, 10 rounds).
TEST_CASE("philox4x32-10 known-answer vectors") {
    {
        const auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
        CHECK(out[0] == 0x6627e8d5u);
        CHECK(out[1] == 0xe169c58du);
        CHECK(out[2] == 0xbc57ac4cu);
        CHECK(out[3] == 0x9b00dbd8u);
    }
    {
        const auto out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                           {0xffffffffu, 0xffffffffu});
        CHECK(out[0] == 0x408f276du);
        CHECK(out[1] == 0x41c83b0eu);
        CHECK(out[2] == 0xa20bc7c6u);
        CHECK(out[3] == 0x6d5451fdu);
    }
    {
        const auto out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                           {0xa4093822u, 0x299f31d0u});
        CHECK(out[0] == 0xd16cfe09u);
        CHECK(out[1] == 0x94fdccebu);
        CHECK(out[2] == 0x5001e420u);
        CHECK(out[3] == 0x24126ea1u);
    }
}

TEST_CASE("streams are stateless and addressable") {
    const GaussianStream s(12345);
    const double a = s.normal(7, 11, StreamClass::increments, 0);
    const double b = s.normal(7, 11, StreamClass::increments, 0);
    CHECK(a == b); // pure function of the address
    CHECK(s.normal(7, 11, StreamClass::increments, 1) != a);
    CHECK(s.normal(8, 11, StreamClass::increments, 0) != a);
    CHECK(s.normal(7, 12, StreamClass::increments, 0) != a);
    CHECK(s.normal(7, 11, StreamClass::initial, 0) != a);
    const GaussianStream other(54321);
    CHECK(other.normal(7, 11, StreamClass::increments, 0) != a);
}

TEST_CASE("fill_normal matches per-component access") {
    const GaussianStream s(99);
    double buf[5];
    s.fill_normal(3, 17, StreamClass::increments, buf, 5);
    for (uint32_t c = 0; c < 5; ++c)
        CHECK(buf[c] == s.normal(3, 17, StreamClass::increments, c));
}

TEST_CASE("moments of the gaussian output") {
    const GaussianStream s(2024);
    const int n = 200000;
    double m1 = 0, m2 = 0, m4 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal(static_cast<uint32_t>(i), 0, StreamClass::increments, 0);
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) < 0.01);
    CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
    CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

} // TEST_SUITE
