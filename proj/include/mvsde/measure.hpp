#pragma once

// Empirical laws on endpoint space R^d or on segment space, the W_theta
// distance, and coupling extraction. Exact solvers: sorted matching for 1-d
// endpoint clouds with uniform equal-size weights, shortest-augmenting-path
// assignment for equal-size uniform clouds, transportation simplex otherwise
// (capped at exact_cap atoms per side). Entropic: log-domain Sinkhorn with a
// feasibility-rounded plan and a c-transform dual bound, so the returned value
// brackets the exact one within the reported duality gap.

#include <iosfwd>
#include <vector>

#include "mvsde/segment.hpp"

namespace mvsde {

enum class SupportKind { endpoint, segment };

class EmpiricalLaw {
public:
    EmpiricalLaw() = default;

    static EmpiricalLaw endpoint(int dim, std::vector<double> samples_flat,
                                 std::vector<double> weights = {}, double theta = 2.0);
    static EmpiricalLaw segment(const TimeGrid& grid, int dim, std::vector<double> samples_flat,
                                std::vector<double> weights = {}, double theta = 2.0);

    SupportKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int n() const { return n_; }
    /// Length of one flattened sample (dim for endpoint, nodes*dim for segment).
    int sample_len() const { return sample_len_; }
    int nodes() const { return nodes_; }
    double theta() const { return theta_; }
    const TimeGrid& grid() const { return grid_; }
    bool uniform_weights() const { return uniform_; }

    const double* sample(int i) const { return samples_.data() + static_cast<size_t>(i) * sample_len_; }
    double weight(int i) const { return uniform_ ? 1.0 / n_ : weights_[static_cast<size_t>(i)]; }
    const std::vector<double>& samples_flat() const { return samples_; }

    /// Support norm of atom i: Euclidean (endpoint) or window sup (segment).
    double sample_norm(int i) const;
    /// Ground cost between atom i of *this and atom j of other.
    double distance(int i, const EmpiricalLaw& other, int j) const;

    double theta_moment() const;
    /// Mean endpoint value (the final node for segment support).
    std::vector<double> mean_endpoint() const;

    bool same_support(const EmpiricalLaw& o) const;

private:
    SupportKind kind_ = SupportKind::endpoint;
    int dim_ = 0;
    int n_ = 0;
    int sample_len_ = 0;
    int nodes_ = 1;
    double theta_ = 2.0;
    bool uniform_ = true;
    TimeGrid grid_;
    std::vector<double> samples_;
    std::vector<double> weights_;
    std::vector<double> mean_endpoint_; // cached at construction

    void finish_init();
};

struct TransportPlan {
    int rows = 0;
    int cols = 0;
    std::vector<double> mass; // row-major rows*cols

    double at(int i, int j) const { return mass[static_cast<size_t>(i) * cols + j]; }
    double& at(int i, int j) { return mass[static_cast<size_t>(i) * cols + j]; }
    double cost_against(const std::vector<double>& cost) const;
};

enum class OtMethod { exact, entropic };

struct WassersteinOptions {
    OtMethod method = OtMethod::exact;
    int exact_cap = 512;
    double entropic_eps_scale = 0.01; // eps = scale * median pairwise cost
    int entropic_max_iters = 2000;
    double entropic_marginal_tol = 1e-8;
};

struct WassersteinResult {
    double value = 0;        // W_theta
    double duality_gap = 0;  // 0 for exact
    int iterations = 0;
};

double wasserstein_theta(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta,
                         const WassersteinOptions& opts = {});
WassersteinResult wasserstein_theta_full(const EmpiricalLaw& mu, const EmpiricalLaw& nu,
                                         double theta, const WassersteinOptions& opts = {});

/// Exact optimal plan attaining W_theta^theta; sizes capped at exact_cap.
TransportPlan optimal_plan(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta,
                           const WassersteinOptions& opts = {});

double theta_moment(const EmpiricalLaw& mu);

/// CSV: `weight,x_1,..` (endpoint) or `weight,v_0_1,..,v_{n_r}_d` (segment).
void write_law_csv(std::ostream& os, const EmpiricalLaw& law);
EmpiricalLaw read_law_csv(std::istream& is, double theta = 2.0);

// Low-level exact kernels, exposed for tests.
namespace ot {
/// Min-cost perfect matching on an n*n cost matrix; returns total cost, fills
/// row_to_col. Shortest augmenting path with potentials, O(n^3).
double solve_assignment(const std::vector<double>& cost, int n, std::vector<int>& row_to_col);
/// Transportation simplex for general nonnegative weights summing to 1 each.
TransportPlan solve_transport(const std::vector<double>& mu_w, const std::vector<double>& nu_w,
                              const std::vector<double>& cost);
} // namespace ot

} // namespace mvsde
