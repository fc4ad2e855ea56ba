#pragma once

// Change-of-measure machinery: exponential weights, the shift coupling
// gamma / Phi-bar / R-bar / beta of the shift-Harnack proof, and the
// log-Harnack coupling drift. Discrete stochastic integrals use left-endpoint
// (Ito) sums on the solver's own increments; the shifted path uses
// forward-difference gamma', which makes the discrete change of measure exact
// in law (only Monte Carlo error remains in the identity checks).

#include <vector>

#include "mvsde/coeffs.hpp"
#include "mvsde/solver.hpp"
#include "mvsde/stats.hpp"

namespace mvsde {

/// Running discrete Girsanov weight R = exp(-I - Q/2) for one particle.
struct GirsanovAccumulator {
    double ito = 0;  // sum <u(t_k), dW_k>
    double quad = 0; // sum |u(t_k)|^2 h

    void add(const double* u, const double* dw, double h, int dim) {
        double dot = 0, sq = 0;
        for (int i = 0; i < dim; ++i) {
            dot += u[i] * dw[i];
            sq += u[i] * u[i];
        }
        ito += dot;
        quad += sq * h;
    }
    double log_weight() const { return -ito - 0.5 * quad; }
    double weight() const { return std::exp(log_weight()); }
};

/// Terminal shift eta in C^1([-r, 0]); values and derivative tabulated on the
/// window nodes.
struct Eta {
    int dim = 0;
    std::vector<double> values; // (n_r+1) * dim
    std::vector<double> deriv;  // (n_r+1) * dim

    static Eta zero(const TimeGrid& grid, int dim);
    /// eta(s) = c0 + c1 * s
    static Eta affine(const TimeGrid& grid, std::vector<double> c0, std::vector<double> c1);

    const double* at(int node) const { return values.data() + static_cast<size_t>(node) * dim; }
    const double* d_at(int node) const { return deriv.data() + static_cast<size_t>(node) * dim; }
    int nodes() const { return static_cast<int>(values.size()) / std::max(1, dim); }
    double sup_norm() const;
    /// trapezoid of |eta'|^2 over [-r, 0]
    double deriv_sq_integral(double h) const;
    bool is_zero() const;
};

/// gamma(s) = (s+ / (T-r)) eta(-r) on [-r, T-r], eta(s-T) on (T-r, T].
struct ShiftCoupling {
    TimeGrid grid;
    int dim = 0;
    std::vector<double> gamma;        // (n_r + n_T + 1) * dim, nodes on [-r, T]
    std::vector<double> gamma_fd;     // n_T * dim, forward differences / h on steps
    std::vector<double> gamma_deriv;  // (n_T + 1) * dim, analytic branch derivative on [0, T]

    const double* gamma_at(int node) const { return gamma.data() + static_cast<size_t>(node) * dim; }
    const double* fd_at(int step) const { return gamma_fd.data() + static_cast<size_t>(step) * dim; }
};

ShiftCoupling shift_gamma(const Eta& eta, const TimeGrid& grid);

struct BetaBound {
    double comp_initial = 0; // |eta(-r)|^2 / (T - r)
    double comp_deriv = 0;   // int |eta'|^2
    double comp_phi = 0;     // T phi^2(C ||eta||)
    double comp_norm = 0;    // T ||eta||^2
    double C = 2;
    double sigma_inv_norm = 1;
    double total = 0;
};

BetaBound beta_bound(const Eta& eta, const TimeGrid& grid, const DiniModulus& phi, double C,
                     double sigma_inv_norm);

struct CoupledShiftResult {
    ParticleEnsemble x;             // base frozen-law run
    ShiftCoupling coupling;
    Eta eta;
    std::vector<double> log_weight; // log R-bar per particle
    std::vector<double> int_phi_sq; // int |sigma^{-1} Phi-bar|^2 per particle

    /// X-bar segment at on-grid time t: the X segment shifted by gamma.
    SegmentPath xbar_segment(int particle, double t) const;
    /// Full shifted ensemble (X-bar = X + gamma node-wise).
    ParticleEnsemble materialize_xbar() const;
};

/// Simulates X on the frozen flow, couples X-bar = X + gamma, and accumulates
/// the Girsanov weight with drift sigma^{-1} Phi-bar against the same
/// increments. Requires state-free sigma.
CoupledShiftResult coupled_shift_run(const CoefficientSet& set, const SolverConfig& cfg,
                                     const InitialLaw& initial, const LawFlow& mu_flow,
                                     const Eta& eta);

/// [sigma* (sigma sigma*)^{-1}](t, x) [b(t,x,mu)-b(t,x,nu)+B(t,xs,mu)-B(t,xs,nu)].
std::vector<double> log_harnack_drift(const CoefficientSet& set, double t, const double* x,
                                      SegmentView xs, const EmpiricalLaw& mu,
                                      const EmpiricalLaw& nu);

struct WeightMoment {
    StatEstimate estimate;
    bool overflow = false;
    double max_exponent = 0;
};

/// Monte Carlo E R^s from per-particle log weights, with overflow diagnostics.
WeightMoment weight_moment(const std::vector<double>& log_weights, double s);

/// Smallest C >= 0 making the path-wise envelope
///   max_i int|sigma^{-1} Phi|^2_i <= |sigma^{-1}|^2 C (c1 + c2 + T phi^2(C||eta||) + T ||eta||^2)
/// hold; bisection over C (the phi term is monotone in C).
double implied_envelope_C(double max_int_phi_sq, const Eta& eta, const TimeGrid& grid,
                          const DiniModulus& phi, double sigma_inv_norm);

} // namespace mvsde
