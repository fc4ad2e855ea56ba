#pragma once

// Euler-Maruyama particle simulation with segment-dependent drift, in three
// modes: frozen-law (reduced SDE with a fixed law flow), synchronous
// interacting particles (empirical-law surrogate of the true law), and the
// lagged-law Picard iteration with per-sweep mollification.
//
// Determinism contract: Gaussian increments are addressed by (seed, particle,
// step) only, particles update into disjoint slots, and every cross-particle
// reduction runs in index order after the parallel phase, so results are
// bitwise identical for any worker-thread count and increments are shared
// across modes and sweeps (common random numbers).

#include <cstdint>
#include <utility>
#include <vector>

#include "mvsde/coeffs.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/segment.hpp"

namespace mvsde {

enum class Mode { frozen_law, interacting, picard };

struct SolverConfig {
    TimeGrid grid;
    int particles = 10000;
    uint64_t seed = 42;
    Mode mode = Mode::interacting;
    int picard_sweeps = 1;
    std::vector<int> mollify_levels; // per sweep; defaults to {4,16,64,64,...}
    double theta = 2.0;
    SupportKind law_support = SupportKind::endpoint;
    int threads = 1;
    bool record_flow = true;
    double blowup_threshold = 1e8;
    MollifyOptions mollify_opts;

    void validate() const;
    int mollify_level(int sweep) const; // 1-based sweep
};

/// Initial segment sampler: constant-in-s segments with an optional Gaussian
/// endpoint and an additive shift (for synchronously coupled initial pairs).
struct InitialLaw {
    enum class Kind { constant, gaussian };
    Kind kind = Kind::constant;
    std::vector<double> value;  // mean / constant value, one per dimension
    double stddev = 0;          // gaussian kind only
    std::vector<double> shift;  // optional additive offset (coupled pair gap)
    // mixture of base and shifted law: particle i is shifted iff
    // (i % mixture_mod) < mixture_count; mixture_mod == 0 shifts everyone
    int mixture_mod = 0;
    int mixture_count = 0;

    static InitialLaw constant(std::vector<double> value);
    static InitialLaw gaussian(std::vector<double> mean, double stddev);
    InitialLaw shifted(const std::vector<double>& gap) const;

    /// Endpoint value of particle i's (constant) initial segment.
    void draw(const GaussianStream& stream, uint32_t particle, double* out, int dim) const;
    double expected_sq_gap() const; // ||shift||^2, the coupled-pair bound input
};

struct ParticleEnsemble {
    TimeGrid grid;
    int dim = 0;
    std::vector<Trajectory> trajs;

    int particles() const { return static_cast<int>(trajs.size()); }
};

struct LawFlow {
    TimeGrid grid;
    SupportKind kind = SupportKind::endpoint;
    double theta = 2.0;
    std::vector<EmpiricalLaw> laws; // node 0..n_T

    const EmpiricalLaw& at_step(int k) const { return laws[static_cast<size_t>(k)]; }
};

ParticleEnsemble init_ensemble(const SolverConfig& cfg, int dim, const InitialLaw& initial);

/// One explicit step from grid step k to k+1 with the given (pre-step) law.
void euler_step(ParticleEnsemble& ens, const CoefficientSet& set, const EmpiricalLaw& law,
                int step, const GaussianStream& stream, const SolverConfig& cfg);

/// Empirical law of the ensemble at trajectory step k (time k*h).
EmpiricalLaw law_of_ensemble(const ParticleEnsemble& ens, int step, SupportKind kind, double theta);

ParticleEnsemble run_frozen_law(const CoefficientSet& set, const LawFlow& flow,
                                const SolverConfig& cfg, const InitialLaw& initial);

std::pair<ParticleEnsemble, LawFlow> run_interacting(const CoefficientSet& set,
                                                     const SolverConfig& cfg,
                                                     const InitialLaw& initial);

struct PicardResult {
    std::vector<LawFlow> flows;              // sweep 0 (initial-law flow) .. sweep P
    ParticleEnsemble final_ensemble;         // ensemble of the last sweep
    std::vector<double> sweep_distances;     // sup-node W_theta between consecutive flows
    std::vector<std::vector<double>> node_distances; // per sweep pair, per node
    bool nondecreasing_warning = false;
};

PicardResult run_picard(const CoefficientSet& set, const SolverConfig& cfg,
                        const InitialLaw& initial);

/// sup over grid nodes of W_theta between the two flows' laws.
double law_flow_distance(const LawFlow& a, const LawFlow& b, double theta);

/// W_theta with automatic kernel choice: sorted matching when eligible, exact
/// under the cap, entropic beyond it.
double wasserstein_auto(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta);

/// Constant-in-time flow whose every node is the law of the initial segment.
LawFlow initial_law_flow(const SolverConfig& cfg, int dim, const InitialLaw& initial);

} // namespace mvsde
