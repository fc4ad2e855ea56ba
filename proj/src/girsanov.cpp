#include "mvsde/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/Dense>

#include "mvsde/errors.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

Eta Eta::zero(const TimeGrid& grid, int dim) {
    Eta e;
    e.dim = dim;
    e.values.assign(static_cast<size_t>(grid.n_r + 1) * dim, 0.0);
    e.deriv.assign(static_cast<size_t>(grid.n_r + 1) * dim, 0.0);
    return e;
}

Eta Eta::affine(const TimeGrid& grid, std::vector<double> c0, std::vector<double> c1) {
    Eta e;
    e.dim = static_cast<int>(c0.size());
    if (c1.size() != c0.size()) throw InvalidInput("eta affine coefficients must match dims");
    e.values.resize(static_cast<size_t>(grid.n_r + 1) * e.dim);
    e.deriv.resize(e.values.size());
    for (int k = 0; k <= grid.n_r; ++k) {
        const double s = (k - grid.n_r) * grid.h; // s in [-r, 0]
        for (int i = 0; i < e.dim; ++i) {
            e.values[static_cast<size_t>(k) * e.dim + i] = c0[static_cast<size_t>(i)] + c1[static_cast<size_t>(i)] * s;
            e.deriv[static_cast<size_t>(k) * e.dim + i] = c1[static_cast<size_t>(i)];
        }
    }
    return e;
}

double Eta::sup_norm() const {
    double best = 0;
    const int n = nodes();
    for (int k = 0; k < n; ++k) {
        double sq = 0;
        for (int i = 0; i < dim; ++i) sq += at(k)[i] * at(k)[i];
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

double Eta::deriv_sq_integral(double h) const {
    const int n = nodes();
    double s = 0;
    for (int k = 0; k < n; ++k) {
        double sq = 0;
        for (int i = 0; i < dim; ++i) sq += d_at(k)[i] * d_at(k)[i];
        s += sq * ((k == 0 || k == n - 1) ? 0.5 : 1.0);
    }
    return s * h;
}

bool Eta::is_zero() const {
    for (double v : values)
        if (v != 0) return false;
    return true;
}

ShiftCoupling shift_gamma(const Eta& eta, const TimeGrid& grid) {
    if (!(grid.T > grid.r)) throw InvalidInput("shift coupling needs horizon T > r");
    if (eta.nodes() != grid.n_r + 1) throw InvalidInput("eta must be tabulated on the window grid");
    ShiftCoupling sc;
    sc.grid = grid;
    sc.dim = eta.dim;
    const int d = eta.dim;
    const int total = grid.total_nodes();
    sc.gamma.assign(static_cast<size_t>(total) * d, 0.0);
    const double span = grid.T - grid.r;
    const double* eta_tail = eta.at(0); // eta(-r)

    for (int k = 0; k < total; ++k) {
        const double s = grid.node_time(k);
        double* g = sc.gamma.data() + static_cast<size_t>(k) * d;
        if (s <= span) {
            const double f = std::max(s, 0.0) / span; // s^+ / (T - r)
            for (int i = 0; i < d; ++i) g[i] = f * eta_tail[i];
        } else {
            // s in (T-r, T]: gamma = eta(s - T); s - T in (-r, 0] is on the window grid
            const int node = static_cast<int>(std::lround((s - grid.T) / grid.h)) + grid.n_r;
            const double* ev = eta.at(node);
            for (int i = 0; i < d; ++i) g[i] = ev[i];
        }
    }

    sc.gamma_fd.resize(static_cast<size_t>(grid.n_T) * d);
    for (int k = 0; k < grid.n_T; ++k) {
        const double* g0 = sc.gamma_at(grid.n_r + k);
        const double* g1 = sc.gamma_at(grid.n_r + k + 1);
        for (int i = 0; i < d; ++i)
            sc.gamma_fd[static_cast<size_t>(k) * d + i] = (g1[i] - g0[i]) / grid.h;
    }

    sc.gamma_deriv.resize(static_cast<size_t>(grid.n_T + 1) * d);
    for (int k = 0; k <= grid.n_T; ++k) {
        const double s = k * grid.h;
        double* gd = sc.gamma_deriv.data() + static_cast<size_t>(k) * d;
        if (s < span) {
            for (int i = 0; i < d; ++i) gd[i] = eta_tail[i] / span;
        } else {
            const int node = static_cast<int>(std::lround((s - grid.T) / grid.h)) + grid.n_r;
            const double* ed = eta.d_at(node);
            for (int i = 0; i < d; ++i) gd[i] = ed[i];
        }
    }
    return sc;
}

BetaBound beta_bound(const Eta& eta, const TimeGrid& grid, const DiniModulus& phi, double C,
                     double sigma_inv_norm) {
    if (!(grid.T > grid.r)) throw InvalidInput("beta bound needs T > r");
    BetaBound b;
    b.C = C;
    b.sigma_inv_norm = sigma_inv_norm;
    double tail_sq = 0;
    for (int i = 0; i < eta.dim; ++i) tail_sq += eta.at(0)[i] * eta.at(0)[i];
    const double sup = eta.sup_norm();
    b.comp_initial = tail_sq / (grid.T - grid.r);
    b.comp_deriv = eta.deriv_sq_integral(grid.h);
    const double pv = phi(C * sup);
    b.comp_phi = grid.T * pv * pv;
    b.comp_norm = grid.T * sup * sup;
    b.total = sigma_inv_norm * sigma_inv_norm * C *
              (b.comp_initial + b.comp_deriv + b.comp_phi + b.comp_norm);
    return b;
}

namespace {

struct SigmaInverse {
    std::vector<double> inv; // row-major d*d
};

SigmaInverse invert_sigma(const double* sig, int d) {
    SigmaInverse si;
    si.inv.resize(static_cast<size_t>(d) * d);
    if (d == 1) {
        if (std::abs(sig[0]) < 1e-12) throw ConditioningError("sigma is numerically singular");
        si.inv[0] = 1.0 / sig[0];
        return si;
    }
    Eigen::MatrixXd S(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S(i, j) = sig[static_cast<size_t>(i) * d + j];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    if (!lu.isInvertible()) throw ConditioningError("sigma is numerically singular");
    Eigen::MatrixXd I = lu.inverse();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) si.inv[static_cast<size_t>(i) * d + j] = I(i, j);
    return si;
}

} // namespace

SegmentPath CoupledShiftResult::xbar_segment(int particle, double t) const {
    SegmentPath seg = extract_segment(x.trajs[static_cast<size_t>(particle)], t);
    const int anchor = x.grid.index_of(t);
    const int d = x.dim;
    for (int j = 0; j <= x.grid.n_r; ++j) {
        const double* g = coupling.gamma_at(anchor - x.grid.n_r + j);
        for (int i = 0; i < d; ++i) seg.node(j)[i] += g[i];
    }
    return seg;
}

ParticleEnsemble CoupledShiftResult::materialize_xbar() const {
    ParticleEnsemble out = x;
    const int d = x.dim;
    for (auto& tr : out.trajs)
        for (int k = 0; k < x.grid.total_nodes(); ++k) {
            const double* g = coupling.gamma_at(k);
            for (int i = 0; i < d; ++i) tr.node(k)[i] += g[i];
        }
    return out;
}

CoupledShiftResult coupled_shift_run(const CoefficientSet& set, const SolverConfig& cfg,
                                     const InitialLaw& initial, const LawFlow& mu_flow,
                                     const Eta& eta) {
    if (!set.sigma_state_free)
        throw InvalidInput("shift coupling needs state-free sigma (model '" + set.name + "')");
    CoupledShiftResult res;
    res.eta = eta;
    res.coupling = shift_gamma(eta, cfg.grid);
    res.x = run_frozen_law(set, mu_flow, cfg, initial);

    const int d = set.dim;
    const int M = res.x.particles();
    const double h = cfg.grid.h;
    const double sqh = std::sqrt(h);
    const GaussianStream stream(cfg.seed);

    // state-free sigma: one inverse per step
    std::vector<SigmaInverse> sig_inv(static_cast<size_t>(cfg.grid.n_T));
    {
        std::vector<double> sig(static_cast<size_t>(d) * d);
        const std::vector<double> zero(d, 0.0);
        for (int k = 0; k < cfg.grid.n_T; ++k) {
            set.eval_sigma(k * h, zero.data(), mu_flow.at_step(k), sig.data());
            sig_inv[static_cast<size_t>(k)] = invert_sigma(sig.data(), d);
        }
    }

    res.log_weight.assign(M, 0.0);
    res.int_phi_sq.assign(M, 0.0);
    const bool has_B = static_cast<bool>(set.B);

    std::exception_ptr err;
    std::mutex err_mu;
    parallel_for(M, cfg.threads, [&](int64_t lo, int64_t hi) {
        try {
            std::vector<double> b0(d), b1(d), B0(d), B1(d), phi_bar(d), u(d), dw(d), g(d);
            std::vector<double> xbar(d);
            std::vector<double> shifted_window(static_cast<size_t>(cfg.grid.n_r + 1) * d);
            for (int64_t i = lo; i < hi; ++i) {
                const Trajectory& tr = res.x.trajs[static_cast<size_t>(i)];
                GirsanovAccumulator acc;
                for (int k = 0; k < cfg.grid.n_T; ++k) {
                    const double t = k * h;
                    const int node = cfg.grid.n_r + k;
                    const EmpiricalLaw& law = mu_flow.at_step(k);
                    const double* xv = tr.node(node);
                    const double* gam = res.coupling.gamma_at(node);
                    for (int c = 0; c < d; ++c) xbar[c] = xv[c] + gam[c];

                    set.eval_b(t, xv, law, b0.data());
                    set.eval_b(t, xbar.data(), law, b1.data());
                    for (int c = 0; c < d; ++c) phi_bar[c] = b0[c] - b1[c];

                    if (has_B) {
                        const SegmentView xs = segment_view(tr, node);
                        set.eval_B(t, xs, law, B0.data());
                        for (int j = 0; j <= cfg.grid.n_r; ++j) {
                            const double* gj = res.coupling.gamma_at(node - cfg.grid.n_r + j);
                            const double* xj = xs.node(j);
                            for (int c = 0; c < d; ++c)
                                shifted_window[static_cast<size_t>(j) * d + c] = xj[c] + gj[c];
                        }
                        set.eval_B(t, SegmentView{shifted_window.data(), cfg.grid.n_r + 1, d}, law,
                                   B1.data());
                        for (int c = 0; c < d; ++c) phi_bar[c] += B0[c] - B1[c];
                    }
                    const double* gfd = res.coupling.fd_at(k);
                    for (int c = 0; c < d; ++c) phi_bar[c] += gfd[c];

                    const auto& inv = sig_inv[static_cast<size_t>(k)].inv;
                    for (int c = 0; c < d; ++c) {
                        double s = 0;
                        for (int l = 0; l < d; ++l) s += inv[static_cast<size_t>(c) * d + l] * phi_bar[l];
                        u[c] = s;
                    }
                    stream.fill_normal(static_cast<uint32_t>(i), static_cast<uint32_t>(k),
                                       StreamClass::increments, g.data(), d);
                    for (int c = 0; c < d; ++c) dw[c] = sqh * g[c];
                    acc.add(u.data(), dw.data(), h, d);
                }
                res.log_weight[static_cast<size_t>(i)] = acc.log_weight();
                res.int_phi_sq[static_cast<size_t>(i)] = acc.quad;
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!err) err = std::current_exception();
        }
    });
    if (err) std::rethrow_exception(err);
    return res;
}

std::vector<double> log_harnack_drift(const CoefficientSet& set, double t, const double* x,
                                      SegmentView xs, const EmpiricalLaw& mu,
                                      const EmpiricalLaw& nu) {
    if (!set.sigma_distribution_free)
        throw InvalidInput("log-Harnack drift needs distribution-free sigma");
    const int d = set.dim;
    std::vector<double> diff(d), tmp(d);
    set.eval_b(t, x, mu, diff.data());
    set.eval_b(t, x, nu, tmp.data());
    for (int i = 0; i < d; ++i) diff[i] -= tmp[i];
    if (set.B) {
        std::vector<double> Ba(d), Bb(d);
        set.eval_B(t, xs, mu, Ba.data());
        set.eval_B(t, xs, nu, Bb.data());
        for (int i = 0; i < d; ++i) diff[i] += Ba[i] - Bb[i];
    }
    std::vector<double> sig(static_cast<size_t>(d) * d);
    set.eval_sigma(t, x, mu, sig.data());
    if (d == 1) {
        const double a = sig[0] * sig[0];
        if (a < 1e-24) throw ConditioningError("sigma sigma* is singular");
        return {sig[0] * diff[0] / a};
    }
    Eigen::MatrixXd S(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S(i, j) = sig[static_cast<size_t>(i) * d + j];
    Eigen::MatrixXd A = S * S.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw ConditioningError("sigma sigma* is singular");
    Eigen::VectorXd rhs(d);
    for (int i = 0; i < d; ++i) rhs(i) = diff[static_cast<size_t>(i)];
    Eigen::VectorXd out = S.transpose() * lu.solve(rhs);
    std::vector<double> res(d);
    for (int i = 0; i < d; ++i) res[static_cast<size_t>(i)] = out(i);
    return res;
}

WeightMoment weight_moment(const std::vector<double>& log_weights, double s) {
    if (s < 1) throw InvalidInput("weight moment exponent must be >= 1");
    if (log_weights.empty()) throw InvalidInput("weight moment needs samples");
    WeightMoment wm;
    double max_e = -1e300;
    for (double lw : log_weights) max_e = std::max(max_e, s * lw);
    wm.max_exponent = max_e;
    if (max_e > 700.0) {
        wm.overflow = true;
        wm.estimate = StatEstimate::exact(std::numeric_limits<double>::infinity(),
                                          static_cast<int64_t>(log_weights.size()));
        return wm;
    }
    wm.estimate = batch_mean_fn(static_cast<int64_t>(log_weights.size()), [&](int64_t i) {
        return std::exp(s * log_weights[static_cast<size_t>(i)]);
    });
    return wm;
}

double implied_envelope_C(double max_int_phi_sq, const Eta& eta, const TimeGrid& grid,
                          const DiniModulus& phi, double sigma_inv_norm) {
    if (max_int_phi_sq <= 0) return 0;
    const auto envelope = [&](double C) {
        return beta_bound(eta, grid, phi, C, sigma_inv_norm).total;
    };
    // envelope(C) is increasing and envelope(0) = 0; expand then bisect
    double hi = 1;
    while (envelope(hi) < max_int_phi_sq && hi < 1e12) hi *= 2;
    if (envelope(hi) < max_int_phi_sq) return std::numeric_limits<double>::infinity();
    double lo = 0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (envelope(mid) >= max_int_phi_sq)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

} // namespace mvsde
