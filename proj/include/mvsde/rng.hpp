#pragma once

// Counter-based random streams (Philox4x32-10, Salmon et al. SC 2011).
// Every Gaussian increment is addressed by (seed, particle, step, component),
// so particle updates can run on any number of worker threads, in any order,
// and still produce bitwise-identical trajectories. The same addressing gives
// common random numbers across solver modes and Picard sweeps.

#include <array>
#include <cmath>
#include <cstdint>

namespace mvsde {

struct Philox4x32 {
    using Counter = std::array<uint32_t, 4>;
    using Key = std::array<uint32_t, 2>;

    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            ctr = one_round(ctr, key);
            key[0] += 0x9E3779B9u; // golden-ratio Weyl constants
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static Counter one_round(const Counter& c, const Key& k) {
        const uint64_t p0 = uint64_t(0xD2511F53u) * c[0];
        const uint64_t p1 = uint64_t(0xCD9E8D57u) * c[2];
        const auto lo0 = static_cast<uint32_t>(p0), hi0 = static_cast<uint32_t>(p0 >> 32);
        const auto lo1 = static_cast<uint32_t>(p1), hi1 = static_cast<uint32_t>(p1 >> 32);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Which independent family of draws a counter belongs to.
enum class StreamClass : uint32_t {
    increments = 0, // Brownian increments, step-indexed
    initial = 1,    // initial-segment draws, step field unused
};

/// Stateless Gaussian source. All methods are const and reentrant.
class GaussianStream {
public:
    explicit GaussianStream(uint64_t seed)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)} {}

    /// Standard normal for (particle, step, component). Components 2j and 2j+1
    /// share one Philox block through the Box-Muller pair.
    double normal(uint32_t particle, uint32_t step, StreamClass cls, uint32_t component) const {
        double z[2];
        normal_pair(particle, step, cls, component / 2, z);
        return z[component % 2];
    }

    /// Fill out[0..dim) with standard normals for one (particle, step).
    void fill_normal(uint32_t particle, uint32_t step, StreamClass cls, double* out, int dim) const {
        for (int j = 0; 2 * j < dim; ++j) {
            double z[2];
            normal_pair(particle, step, cls, static_cast<uint32_t>(j), z);
            out[2 * j] = z[0];
            if (2 * j + 1 < dim) out[2 * j + 1] = z[1];
        }
    }

    uint64_t seed() const { return (uint64_t(key_[1]) << 32) | key_[0]; }

private:
    void normal_pair(uint32_t particle, uint32_t step, StreamClass cls, uint32_t blk, double* z) const {
        const auto words = Philox4x32::block({blk, step, particle, static_cast<uint32_t>(cls)}, key_);
        const double u1 = to_open_unit(words[0], words[1]);
        const double u2 = to_open_unit(words[2], words[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * M_PI * u2;
        z[0] = rad * std::cos(ang);
        z[1] = rad * std::sin(ang);
    }

    // 53-bit uniform strictly inside (0,1); the +0.5 offset keeps log() finite.
    static double to_open_unit(uint32_t hi, uint32_t lo) {
        const uint64_t x = (uint64_t(hi) << 32) | lo;
        return (double(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    Philox4x32::Key key_;
};

} // namespace mvsde
