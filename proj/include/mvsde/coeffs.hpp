#pragma once

// Coefficient models (B, b, sigma) with their regularity metadata, Dini
// moduli, the d/p + 2/q pair class, mixed L^q_p norms on a declared box, and
// the kernel mollification used by the approximation scheme.

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "mvsde/measure.hpp"
#include "mvsde/segment.hpp"

namespace mvsde {

/// Increasing modulus phi with phi(0) = 0, phi^2 concave, and a finite Dini
/// integral. Built-ins: scale * s^alpha and scale / log^(1+delta)(c + 1/s).
class DiniModulus {
public:
    static DiniModulus power(double alpha, double scale = 1.0);
    static DiniModulus log_power(double delta, double c, double scale = 1.0);
    static DiniModulus table(std::vector<double> s, std::vector<double> phi);
    static DiniModulus zero();

    double operator()(double s) const;
    double dini_integral() const;
    bool is_zero() const { return kind_ == Kind::zero; }
    std::string describe() const;

private:
    enum class Kind { zero, power, log_power, table };
    Kind kind_ = Kind::zero;
    double alpha_ = 0, delta_ = 0, c_ = 0, scale_ = 1;
    std::vector<double> ts_, tphi_;

    void validate() const;
};

std::pair<bool, bool> pair_in_K(double p, double q, int d);

struct PairClassK {
    double p = 2, q = 2;
    int d = 1;
    bool in_K() const { return pair_in_K(p, q, d).first; }
    bool strict_sub_one() const { return pair_in_K(p, q, d).second; }
};

/// Rectangular evaluation box for L^q_p quadrature.
struct LqpBox {
    double t0 = 0, t1 = 1;
    std::vector<std::array<double, 2>> x; // per-dimension [lo, hi]
};

/// Midpoint-rule evaluation of ( int_0^T ( int |f|^p dx )^{q/p} dt )^{1/q} on
/// the declared box; callers must declare f compactly supported in the box or
/// read the result as a lower bound.
double lqp_norm(const std::function<double(double, const double*)>& f, const LqpBox& box,
                int nt, int nx_per_dim, double p, double q);

struct CoefficientSet {
    int dim = 1;
    std::string name;

    // B(t, segment, law), b(t, x, law), sigma(t, x, law) row-major dim x dim.
    std::function<void(double, SegmentView, const EmpiricalLaw&, double*)> B;
    std::function<void(double, const double*, const EmpiricalLaw&, double*)> b;
    std::function<void(double, const double*, const EmpiricalLaw&, double*)> sigma;

    // Declared regularity metadata; probe-checked by tests, never enforced in
    // the hot path.
    double K = 1.0 + 1e-9; // ellipticity / bound constant, > 1
    double L0 = 0;         // segment-Lipschitz constant of B
    double L = 0;          // measure-Lipschitz constant of b, sigma, B
    double B_bound = 0;    // sup |B| over the probe range
    DiniModulus phi = DiniModulus::zero();
    std::function<double(double, const double*)> F; // singular envelope, may be null
    double F_p = 0, F_q = 0;                        // declared (p, q) certificate for F
    double F_norm_T1 = 0;                           // declared ||F||_{L^q_p(1)}

    bool sigma_distribution_free = true;
    bool sigma_state_free = true;
    bool distribution_free = false; // none of B, b, sigma reads the law

    void eval_B(double t, SegmentView xs, const EmpiricalLaw& mu, double* out) const;
    void eval_b(double t, const double* x, const EmpiricalLaw& mu, double* out) const;
    void eval_sigma(double t, const double* x, const EmpiricalLaw& mu, double* out) const;
};

/// Built-in models: brownian, meanfield-ou, delay-linear, dini-drift,
/// singular-drift. Parameters come from the config's model object.
CoefficientSet model_zoo(const std::string& name, const nlohmann::json& params = nlohmann::json::object());

struct MollifyOptions {
    int quad_points = 8; // Gauss-Legendre points per axis
};

/// Kernel averages of b and a = sigma sigma* at scale 1/level with the
/// extension b := 0, a := I outside [0, T]; sigma^n is the principal square
/// root of a^n. B passes through unmollified, as does the law argument.
CoefficientSet mollify(const CoefficientSet& set, int level, double T,
                       const MollifyOptions& opts = {});

} // namespace mvsde
