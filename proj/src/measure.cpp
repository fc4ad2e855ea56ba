#include "mvsde/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mvsde/errors.hpp"

namespace mvsde {

namespace {

constexpr double kWeightSumTol = 1e-12;

double euclidean(const double* a, const double* b, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
        const double di = a[i] - b[i];
        s += di * di;
    }
    return std::sqrt(s);
}

} // namespace

EmpiricalLaw EmpiricalLaw::endpoint(int dim, std::vector<double> samples_flat,
                                    std::vector<double> weights, double theta) {
    if (dim <= 0) throw InvalidInput("law dimension must be positive");
    EmpiricalLaw law;
    law.kind_ = SupportKind::endpoint;
    law.dim_ = dim;
    law.sample_len_ = dim;
    law.nodes_ = 1;
    law.theta_ = theta;
    law.samples_ = std::move(samples_flat);
    law.weights_ = std::move(weights);
    law.finish_init();
    return law;
}

EmpiricalLaw EmpiricalLaw::segment(const TimeGrid& grid, int dim, std::vector<double> samples_flat,
                                   std::vector<double> weights, double theta) {
    if (dim <= 0) throw InvalidInput("law dimension must be positive");
    EmpiricalLaw law;
    law.kind_ = SupportKind::segment;
    law.dim_ = dim;
    law.nodes_ = grid.n_r + 1;
    law.sample_len_ = law.nodes_ * dim;
    law.grid_ = grid;
    law.theta_ = theta;
    law.samples_ = std::move(samples_flat);
    law.weights_ = std::move(weights);
    law.finish_init();
    return law;
}

void EmpiricalLaw::finish_init() {
    if (theta_ < 1.0) throw InvalidInput("theta must be >= 1");
    if (sample_len_ <= 0 || samples_.size() % sample_len_ != 0)
        throw InvalidInput("law sample buffer size must be a multiple of the sample length");
    n_ = static_cast<int>(samples_.size() / sample_len_);
    if (n_ < 1) throw InvalidInput("law needs at least one atom");
    if (weights_.empty()) {
        uniform_ = true;
    } else {
        if (static_cast<int>(weights_.size()) != n_)
            throw InvalidInput("weights count must match atom count");
        double sum = 0;
        for (double w : weights_) {
            if (w < 0) throw InvalidInput("weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > kWeightSumTol * n_)
            throw InvalidInput("weights must sum to 1 (got " + std::to_string(sum) + ")");
        uniform_ = false;
    }
    mean_endpoint_.assign(dim_, 0.0);
    const int last = (nodes_ - 1) * dim_;
    for (int i = 0; i < n_; ++i) {
        const double* s = sample(i) + last;
        const double w = weight(i);
        for (int k = 0; k < dim_; ++k) mean_endpoint_[k] += w * s[k];
    }
}

double EmpiricalLaw::sample_norm(int i) const {
    const double* s = sample(i);
    if (kind_ == SupportKind::endpoint) {
        double sq = 0;
        for (int k = 0; k < dim_; ++k) sq += s[k] * s[k];
        return std::sqrt(sq);
    }
    return uniform_norm(SegmentView{s, nodes_, dim_});
}

double EmpiricalLaw::distance(int i, const EmpiricalLaw& other, int j) const {
    const double* a = sample(i);
    const double* b = other.sample(j);
    if (kind_ == SupportKind::endpoint) return euclidean(a, b, dim_);
    return segment_sup_distance(SegmentView{a, nodes_, dim_}, SegmentView{b, other.nodes_, dim_});
}

double EmpiricalLaw::theta_moment() const {
    double s = 0;
    for (int i = 0; i < n_; ++i) s += weight(i) * std::pow(sample_norm(i), theta_);
    return s;
}

std::vector<double> EmpiricalLaw::mean_endpoint() const { return mean_endpoint_; }

bool EmpiricalLaw::same_support(const EmpiricalLaw& o) const {
    return kind_ == o.kind_ && dim_ == o.dim_ && nodes_ == o.nodes_;
}

double theta_moment(const EmpiricalLaw& mu) { return mu.theta_moment(); }

double TransportPlan::cost_against(const std::vector<double>& cost) const {
    double s = 0;
    for (size_t k = 0; k < mass.size(); ++k) s += mass[k] * cost[k];
    return s;
}

// ---------------------------------------------------------------------------
// exact kernels

namespace ot {

double solve_assignment(const std::vector<double>& cost, int n, std::vector<int>& row_to_col) {
    // Shortest augmenting path with dual potentials (Jonker-Volgenant style).
    // 1-based internals; p[j] = row matched to column j.
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), INF);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = INF;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    row_to_col.assign(n, -1);
    double total = 0;
    for (int j = 1; j <= n; ++j) {
        row_to_col[p[j] - 1] = j - 1;
        total += cost[static_cast<size_t>(p[j] - 1) * n + (j - 1)];
    }
    return total;
}

namespace {

// Basis tree bookkeeping for the transportation simplex. Nodes 0..n-1 are
// rows, n..n+m-1 are columns.
struct SimplexState {
    int n, m;
    std::vector<std::pair<int, int>> basis; // basic cells (i, j)
    std::vector<double> x;                  // mass per basic cell
    std::vector<std::vector<int>> adj;      // node -> indices into basis
    std::vector<int> parent, parent_arc;    // tree rooted at node 0
    std::vector<int> order;                 // BFS order

    void rebuild_tree() {
        const int N = n + m;
        adj.assign(N, {});
        for (int k = 0; k < static_cast<int>(basis.size()); ++k) {
            adj[basis[k].first].push_back(k);
            adj[n + basis[k].second].push_back(k);
        }
        parent.assign(N, -1);
        parent_arc.assign(N, -1);
        order.clear();
        order.reserve(N);
        std::vector<char> seen(N, 0);
        order.push_back(0);
        seen[0] = 1;
        for (size_t head = 0; head < order.size(); ++head) {
            const int v = order[head];
            for (int k : adj[v]) {
                const int other = (v < n) ? n + basis[k].second : basis[k].first;
                if (!seen[other]) {
                    seen[other] = 1;
                    parent[other] = v;
                    parent_arc[other] = k;
                    order.push_back(other);
                }
            }
        }
        if (static_cast<int>(order.size()) != N)
            throw Error("transport simplex: basis is not a spanning tree");
    }
};

} // namespace

TransportPlan solve_transport(const std::vector<double>& mu_w, const std::vector<double>& nu_w,
                              const std::vector<double>& cost) {
    const int n = static_cast<int>(mu_w.size());
    const int m = static_cast<int>(nu_w.size());
    if (n == 0 || m == 0) throw InvalidInput("transport needs nonempty marginals");

    // Tiny lexicographic perturbation keeps degenerate pivots from cycling;
    // it moves the optimal value by O(eps * n * max cost), far below the 1e-9
    // contract.
    const double eps = 1e-14 / n;
    std::vector<double> a(mu_w), b(nu_w);
    double bump = 0;
    for (int i = 0; i < n; ++i) {
        a[i] += eps * (i + 1);
        bump += eps * (i + 1);
    }
    b[m - 1] += bump;

    SimplexState st;
    st.n = n;
    st.m = m;

    // Northwest-corner start: exactly n+m-1 basic cells.
    {
        std::vector<double> ra(a), rb(b);
        int i = 0, j = 0;
        while (true) {
            const double t = std::min(ra[i], rb[j]);
            st.basis.emplace_back(i, j);
            st.x.push_back(t);
            ra[i] -= t;
            rb[j] -= t;
            if (i == n - 1 && j == m - 1) break;
            if (ra[i] <= rb[j] && i < n - 1)
                ++i;
            else if (j < m - 1)
                ++j;
            else
                ++i;
        }
    }

    const double cmax = *std::max_element(cost.begin(), cost.end());
    const double tol = std::max(1e-13, 1e-13 * cmax);
    const int max_pivots = 200 * (n + m) + 1000;

    std::vector<double> u(n), v(m);
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
        st.rebuild_tree();
        // potentials from u_0 = 0 along the tree
        for (int node : st.order) {
            if (node == 0) {
                u[0] = 0;
                continue;
            }
            const auto [bi, bj] = st.basis[st.parent_arc[node]];
            const double c = cost[static_cast<size_t>(bi) * m + bj];
            if (node < n)
                u[node] = c - v[bj];
            else
                v[node - n] = c - u[bi];
        }
        // entering arc: most negative reduced cost
        int ei = -1, ej = -1;
        double best = -tol;
        for (int i = 0; i < n; ++i) {
            const double ui = u[i];
            const double* crow = cost.data() + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) {
                const double rc = crow[j] - ui - v[j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                }
            }
        }
        if (ei < 0) break; // optimal

        // cycle: tree path from row node ei to column node n+ej
        std::vector<int> path_arcs;
        {
            const int NA = n + m;
            std::vector<int> depth(NA, 0);
            for (int node : st.order)
                if (node != 0) depth[node] = depth[st.parent[node]] + 1;
            int x1 = ei, x2 = n + ej;
            std::vector<int> arcs1, arcs2;
            while (x1 != x2) {
                if (depth[x1] >= depth[x2]) {
                    arcs1.push_back(st.parent_arc[x1]);
                    x1 = st.parent[x1];
                } else {
                    arcs2.push_back(st.parent_arc[x2]);
                    x2 = st.parent[x2];
                }
            }
            path_arcs = arcs1;
            path_arcs.insert(path_arcs.end(), arcs2.rbegin(), arcs2.rend());
        }
        // The cycle is the entering cell (+) followed by path_arcs in order
        // from the row end; bipartite alternation makes signs -,+,-,... along
        // the path.
        double theta = std::numeric_limits<double>::infinity();
        int leave = -1;
        for (size_t k = 0; k < path_arcs.size(); k += 2) {
            if (st.x[path_arcs[k]] < theta) {
                theta = st.x[path_arcs[k]];
                leave = path_arcs[k];
            }
        }
        if (leave < 0) throw Error("transport simplex: no leaving arc");
        // apply theta around the cycle
        for (size_t k = 0; k < path_arcs.size(); ++k) {
            if (k % 2 == 0)
                st.x[path_arcs[k]] -= theta;
            else
                st.x[path_arcs[k]] += theta;
        }
        st.basis[leave] = {ei, ej};
        st.x[leave] = theta;
        if (pivot + 1 == max_pivots)
            throw ConvergenceError("transport simplex exceeded pivot budget", best);
    }

    TransportPlan plan;
    plan.rows = n;
    plan.cols = m;
    plan.mass.assign(static_cast<size_t>(n) * m, 0.0);
    for (size_t k = 0; k < st.basis.size(); ++k) {
        const auto [i, j] = st.basis[k];
        plan.at(i, j) += std::max(0.0, st.x[k]);
    }
    return plan;
}

} // namespace ot

// ---------------------------------------------------------------------------
// W_theta dispatch

namespace {

std::vector<double> cost_matrix(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta) {
    std::vector<double> c(static_cast<size_t>(mu.n()) * nu.n());
    for (int i = 0; i < mu.n(); ++i)
        for (int j = 0; j < nu.n(); ++j)
            c[static_cast<size_t>(i) * nu.n() + j] = std::pow(mu.distance(i, nu, j), theta);
    return c;
}

void check_pair(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta) {
    if (!mu.same_support(nu)) throw InvalidInput("W_theta needs matching support kind and shape");
    if (theta < 1.0) throw InvalidInput("theta must be >= 1");
}

bool sorted_eligible(const EmpiricalLaw& mu, const EmpiricalLaw& nu) {
    return mu.kind() == SupportKind::endpoint && mu.dim() == 1 && mu.uniform_weights() &&
           nu.uniform_weights() && mu.n() == nu.n();
}

double sorted_matching_power_cost(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta) {
    std::vector<double> a(mu.samples_flat()), b(nu.samples_flat());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[i]), theta);
    return s / double(a.size());
}

struct SinkhornOutput {
    double primal_power = 0;
    double dual_power = 0;
    int iterations = 0;
    TransportPlan plan;
};

SinkhornOutput sinkhorn(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta,
                        const WassersteinOptions& opts) {
    const int n = mu.n(), m = nu.n();
    std::vector<double> C = cost_matrix(mu, nu, theta);
    std::vector<double> a(n), b(m);
    for (int i = 0; i < n; ++i) a[i] = mu.weight(i);
    for (int j = 0; j < m; ++j) b[j] = nu.weight(j);

    std::vector<double> med(C);
    std::nth_element(med.begin(), med.begin() + med.size() / 2, med.end());
    double eps = opts.entropic_eps_scale * med[med.size() / 2];
    if (!(eps > 0)) {
        const double mean = std::accumulate(C.begin(), C.end(), 0.0) / double(C.size());
        eps = std::max(opts.entropic_eps_scale * mean, 1e-12);
    }

    std::vector<double> f(n, 0.0), g(m, 0.0), log_a(n), log_b(m);
    for (int i = 0; i < n; ++i) log_a[i] = std::log(std::max(a[i], 1e-300));
    for (int j = 0; j < m; ++j) log_b[j] = std::log(std::max(b[j], 1e-300));

    auto lse_row = [&](int i) {
        double best = -std::numeric_limits<double>::infinity();
        const double* crow = C.data() + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) best = std::max(best, (g[j] - crow[j]) / eps);
        double s = 0;
        for (int j = 0; j < m; ++j) s += std::exp((g[j] - crow[j]) / eps - best);
        return best + std::log(s);
    };
    auto lse_col = [&](int j) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            best = std::max(best, (f[i] - C[static_cast<size_t>(i) * m + j]) / eps);
        double s = 0;
        for (int i = 0; i < n; ++i)
            s += std::exp((f[i] - C[static_cast<size_t>(i) * m + j]) / eps - best);
        return best + std::log(s);
    };

    double viol = std::numeric_limits<double>::infinity();
    int it = 0;
    std::vector<double> P(static_cast<size_t>(n) * m);
    for (; it < opts.entropic_max_iters; ++it) {
        for (int i = 0; i < n; ++i) f[i] = eps * (log_a[i] - lse_row(i));
        for (int j = 0; j < m; ++j) g[j] = eps * (log_b[j] - lse_col(j));
        // marginal violation of the implied plan
        viol = 0;
        for (int i = 0; i < n; ++i) {
            double rs = 0;
            for (int j = 0; j < m; ++j) {
                const double p = std::exp((f[i] + g[j] - C[static_cast<size_t>(i) * m + j]) / eps);
                P[static_cast<size_t>(i) * m + j] = p;
                rs += p;
            }
            viol += std::abs(rs - a[i]);
        }
        // column sums match exactly after the g-update; row violation decides
        if (viol < opts.entropic_marginal_tol) break;
    }
    if (viol >= opts.entropic_marginal_tol && it == opts.entropic_max_iters)
        throw ConvergenceError("sinkhorn did not reach marginal tolerance", viol);

    // Round to an exactly feasible plan (Altschuler-Weed-Rigollet).
    for (int i = 0; i < n; ++i) {
        double rs = 0;
        for (int j = 0; j < m; ++j) rs += P[static_cast<size_t>(i) * m + j];
        const double s = rs > a[i] ? a[i] / rs : 1.0;
        for (int j = 0; j < m; ++j) P[static_cast<size_t>(i) * m + j] *= s;
    }
    for (int j = 0; j < m; ++j) {
        double cs = 0;
        for (int i = 0; i < n; ++i) cs += P[static_cast<size_t>(i) * m + j];
        const double s = cs > b[j] ? b[j] / cs : 1.0;
        for (int i = 0; i < n; ++i) P[static_cast<size_t>(i) * m + j] *= s;
    }
    std::vector<double> ra(n), cb(m);
    double defect = 0;
    for (int i = 0; i < n; ++i) {
        double rs = 0;
        for (int j = 0; j < m; ++j) rs += P[static_cast<size_t>(i) * m + j];
        ra[i] = a[i] - rs;
        defect += ra[i];
    }
    for (int j = 0; j < m; ++j) {
        double cs = 0;
        for (int i = 0; i < n; ++i) cs += P[static_cast<size_t>(i) * m + j];
        cb[j] = b[j] - cs;
    }
    if (defect > 0) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                P[static_cast<size_t>(i) * m + j] += ra[i] * cb[j] / defect;
    }

    SinkhornOutput out;
    out.iterations = it + 1;
    out.plan.rows = n;
    out.plan.cols = m;
    out.plan.mass = P;
    out.primal_power = out.plan.cost_against(C);
    // c-transform dual bound for the unregularized problem
    double dual = 0;
    for (int i = 0; i < n; ++i) dual += a[i] * f[i];
    for (int j = 0; j < m; ++j) {
        double h = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) h = std::min(h, C[static_cast<size_t>(i) * m + j] - f[i]);
        dual += b[j] * h;
    }
    out.dual_power = dual;
    return out;
}

double exact_power_cost(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta,
                        const WassersteinOptions& opts, TransportPlan* plan_out) {
    const int n = mu.n(), m = nu.n();
    if (sorted_eligible(mu, nu) && plan_out == nullptr)
        return sorted_matching_power_cost(mu, nu, theta);
    if (n > opts.exact_cap || m > opts.exact_cap)
        throw UnsupportedSize("exact OT capped at " + std::to_string(opts.exact_cap) +
                              " atoms per side");

    const std::vector<double> C = cost_matrix(mu, nu, theta);
    if (mu.uniform_weights() && nu.uniform_weights() && n == m) {
        std::vector<int> match;
        const double total = ot::solve_assignment(C, n, match);
        if (plan_out) {
            plan_out->rows = n;
            plan_out->cols = m;
            plan_out->mass.assign(static_cast<size_t>(n) * m, 0.0);
            for (int i = 0; i < n; ++i) plan_out->at(i, match[i]) = 1.0 / n;
        }
        return total / n;
    }
    std::vector<double> a(n), b(m);
    for (int i = 0; i < n; ++i) a[i] = mu.weight(i);
    for (int j = 0; j < m; ++j) b[j] = nu.weight(j);
    TransportPlan plan = ot::solve_transport(a, b, C);
    const double value = plan.cost_against(C);
    if (plan_out) *plan_out = std::move(plan);
    return value;
}

} // namespace

WassersteinResult wasserstein_theta_full(const EmpiricalLaw& mu, const EmpiricalLaw& nu,
                                         double theta, const WassersteinOptions& opts) {
    check_pair(mu, nu, theta);
    WassersteinResult res;
    if (opts.method == OtMethod::exact) {
        res.value = std::pow(exact_power_cost(mu, nu, theta, opts, nullptr), 1.0 / theta);
        return res;
    }
    const SinkhornOutput out = sinkhorn(mu, nu, theta, opts);
    res.value = std::pow(std::max(out.primal_power, 0.0), 1.0 / theta);
    const double dual_root = std::pow(std::max(out.dual_power, 0.0), 1.0 / theta);
    res.duality_gap = std::max(0.0, res.value - dual_root);
    res.iterations = out.iterations;
    return res;
}

double wasserstein_theta(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta,
                         const WassersteinOptions& opts) {
    return wasserstein_theta_full(mu, nu, theta, opts).value;
}

TransportPlan optimal_plan(const EmpiricalLaw& mu, const EmpiricalLaw& nu, double theta,
                           const WassersteinOptions& opts) {
    check_pair(mu, nu, theta);
    TransportPlan plan;
    exact_power_cost(mu, nu, theta, opts, &plan);
    return plan;
}

// ---------------------------------------------------------------------------
// CSV

void write_law_csv(std::ostream& os, const EmpiricalLaw& law) {
    os << "weight";
    if (law.kind() == SupportKind::endpoint) {
        for (int i = 1; i <= law.dim(); ++i) os << ",x_" << i;
    } else {
        for (int k = 0; k < law.nodes(); ++k)
            for (int i = 1; i <= law.dim(); ++i) os << ",v_" << k << '_' << i;
    }
    os << "\n";
    char buf[64];
    for (int i = 0; i < law.n(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", law.weight(i));
        os << buf;
        const double* s = law.sample(i);
        for (int k = 0; k < law.sample_len(); ++k) {
            std::snprintf(buf, sizeof buf, "%.12g", s[k]);
            os << ',' << buf;
        }
        os << "\n";
    }
}

EmpiricalLaw read_law_csv(std::istream& is, double theta) {
    std::string header;
    if (!std::getline(is, header)) throw InvalidInput("law CSV: missing header");
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    if (cols.empty() || cols[0] != "weight") throw InvalidInput("law CSV: header must start with 'weight'");
    const bool is_segment = cols.size() > 1 && cols[1].rfind("v_", 0) == 0;
    int dim = 0, nodes = 1;
    if (is_segment) {
        for (size_t k = 1; k < cols.size(); ++k) {
            int node = 0, comp = 0;
            if (std::sscanf(cols[k].c_str(), "v_%d_%d", &node, &comp) != 2)
                throw InvalidInput("law CSV: bad segment column " + cols[k]);
            nodes = std::max(nodes, node + 1);
            dim = std::max(dim, comp);
        }
    } else {
        dim = static_cast<int>(cols.size()) - 1;
    }
    if (dim <= 0) throw InvalidInput("law CSV: no value columns");

    std::vector<double> weights, samples;
    std::string line;
    const size_t want = cols.size();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != want) throw InvalidInput("law CSV: row width mismatch");
        weights.push_back(row[0]);
        samples.insert(samples.end(), row.begin() + 1, row.end());
    }
    if (weights.empty()) throw InvalidInput("law CSV: no atoms");
    bool uniform = true;
    for (double w : weights)
        if (std::abs(w - weights[0]) > 1e-15) uniform = false;
    std::vector<double> w = uniform ? std::vector<double>{} : weights;
    if (!is_segment) return EmpiricalLaw::endpoint(dim, std::move(samples), std::move(w), theta);
    const TimeGrid grid = TimeGrid::make(1.0, double(nodes - 1), 1.0);
    return EmpiricalLaw::segment(grid, dim, std::move(samples), std::move(w), theta);
}

} // namespace mvsde
