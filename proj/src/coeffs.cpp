#include "mvsde/coeffs.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mvsde/errors.hpp"
#include "mvsde/quadrature.hpp"

namespace mvsde {

// ---------------------------------------------------------------------------
// quadrature helpers

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
    if (a == b) return 0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    // Newton iteration on Legendre polynomials; standard Golub-Welsch-free
    // construction, plenty for n <= 64.
    nodes.assign(n, 0);
    weights.assign(n, 0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) * x * p1 - j * p2) / (j + 1);
            }
            pp = n * (x * p0 - p1) / (x * x - 1);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = 2.0 / ((1 - x * x) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
}

// ---------------------------------------------------------------------------
// DiniModulus

DiniModulus DiniModulus::power(double alpha, double scale) {
    if (!(alpha > 0) || alpha > 0.5)
        throw InvalidInput("power Dini modulus needs alpha in (0, 0.5]");
    if (!(scale > 0)) throw InvalidInput("Dini modulus scale must be > 0");
    DiniModulus m;
    m.kind_ = Kind::power;
    m.alpha_ = alpha;
    m.scale_ = scale;
    return m;
}

DiniModulus DiniModulus::log_power(double delta, double c, double scale) {
    if (!(delta > 0)) throw InvalidInput("log-power Dini modulus needs delta > 0");
    if (!(c > 1)) throw InvalidInput("log-power Dini modulus needs c > 1");
    DiniModulus m;
    m.kind_ = Kind::log_power;
    m.delta_ = delta;
    m.c_ = c;
    m.scale_ = scale;
    m.validate();
    return m;
}

DiniModulus DiniModulus::table(std::vector<double> s, std::vector<double> phi) {
    if (s.size() != phi.size() || s.size() < 2)
        throw InvalidInput("table Dini modulus needs matching arrays of >= 2 points");
    DiniModulus m;
    m.kind_ = Kind::table;
    m.ts_ = std::move(s);
    m.tphi_ = std::move(phi);
    if (m.ts_.front() <= 0) throw InvalidInput("table abscissae must be positive");
    for (size_t i = 1; i < m.ts_.size(); ++i)
        if (m.ts_[i] <= m.ts_[i - 1]) throw InvalidInput("table abscissae must increase");
    m.validate();
    return m;
}

DiniModulus DiniModulus::zero() { return DiniModulus{}; }

void DiniModulus::validate() const {
    // Numerical checks: increasing, phi(0+) -> 0, phi^2 concave. The table
    // kind is checked at its own nodes (linear interpolation makes phi^2
    // convex inside segments by construction, which is harmless).
    if (kind_ == Kind::table) {
        std::vector<double> s{0.0}, sq{0.0};
        for (size_t i = 0; i < ts_.size(); ++i) {
            if (i > 0 && tphi_[i] + 1e-12 < tphi_[i - 1])
                throw InvalidInput("Dini modulus must be increasing");
            s.push_back(ts_[i]);
            sq.push_back(tphi_[i] * tphi_[i]);
        }
        for (size_t i = 1; i + 1 < s.size(); ++i) {
            const double left = (sq[i] - sq[i - 1]) / (s[i] - s[i - 1]);
            const double right = (sq[i + 1] - sq[i]) / (s[i + 1] - s[i]);
            if (right > left * (1 + 1e-9) + 1e-12)
                throw InvalidInput("Dini modulus: phi^2 is not concave on (0,1]");
        }
        return;
    }
    const int N = 200;
    double prev = 0;
    std::vector<double> sq(N);
    for (int i = 0; i < N; ++i) {
        const double s = (i + 1) / double(N);
        const double v = (*this)(s);
        if (v + 1e-12 < prev) throw InvalidInput("Dini modulus must be increasing");
        prev = v;
        sq[static_cast<size_t>(i)] = v * v;
    }
    for (int i = 1; i + 1 < N; ++i) {
        if (sq[static_cast<size_t>(i + 1)] - 2 * sq[static_cast<size_t>(i)] +
                sq[static_cast<size_t>(i - 1)] >
            1e-9 * std::max(1.0, sq[static_cast<size_t>(i)]))
            throw InvalidInput("Dini modulus: phi^2 is not concave on (0,1]");
    }
    // phi(0) = 0 exactly and clear decay toward 0 (log-power vanishes slowly)
    if ((*this)(0.0) != 0.0 || (*this)(1e-300) > 0.5 * (*this)(1.0))
        throw InvalidInput("Dini modulus must vanish at 0");
}

double DiniModulus::operator()(double s) const {
    if (s <= 0) return 0;
    switch (kind_) {
        case Kind::zero:
            return 0;
        case Kind::power:
            return scale_ * std::pow(s, alpha_);
        case Kind::log_power:
            return scale_ / std::pow(std::log(c_ + 1.0 / s), 1.0 + delta_);
        case Kind::table: {
            if (s <= ts_.front()) return tphi_.front() * (s / ts_.front());
            if (s >= ts_.back()) return tphi_.back();
            const auto it = std::upper_bound(ts_.begin(), ts_.end(), s);
            const size_t k = static_cast<size_t>(it - ts_.begin());
            const double w = (s - ts_[k - 1]) / (ts_[k] - ts_[k - 1]);
            return tphi_[k - 1] + w * (tphi_[k] - tphi_[k - 1]);
        }
    }
    return 0;
}

double DiniModulus::dini_integral() const {
    switch (kind_) {
        case Kind::zero:
            return 0;
        case Kind::power:
            return scale_ / alpha_; // closed form of int_0^1 s^(a-1) ds
        case Kind::log_power: {
            // substitute s = e^-u: integral becomes int_0^inf du / log^(1+d)(c + e^u);
            // beyond U the integrand is u^-(1+d) to ~1e-20, so add the exact tail.
            const double U = 50;
            const auto g = [&](double u) {
                return scale_ / std::pow(std::log(c_ + std::exp(u)), 1.0 + delta_);
            };
            const double head = adaptive_simpson(g, 0, U, 1e-10);
            const double tail = scale_ * std::pow(U, -delta_) / delta_;
            return head + tail;
        }
        case Kind::table: {
            // Divergence probe: fit the small-end exponent of phi; a fit that
            // does not vanish at 0 makes phi(s)/s non-integrable.
            const double s0 = ts_[0], s1 = ts_[1];
            const double p0 = tphi_[0], p1 = tphi_[1];
            if (p0 > 1e-6) {
                const double expo =
                    p1 > p0 ? std::log(p1 / p0) / std::log(s1 / s0) : 0.0;
                if (expo <= 1e-6)
                    throw DivergenceError("table modulus does not vanish at 0 (fit exponent " +
                                          std::to_string(expo) + ")");
            }
            // below the first node phi is linear, so phi(s)/s is constant there
            double total = tphi_[0];
            const auto g = [&](double s) { return (*this)(s) / s; };
            total += adaptive_simpson(g, ts_.front(), std::min(1.0, ts_.back()), 1e-10);
            if (ts_.back() < 1.0)
                total += adaptive_simpson(g, ts_.back(), 1.0, 1e-10);
            return total;
        }
    }
    return 0;
}

std::string DiniModulus::describe() const {
    switch (kind_) {
        case Kind::zero:
            return "zero";
        case Kind::power:
            return "power(alpha=" + std::to_string(alpha_) + ", scale=" + std::to_string(scale_) + ")";
        case Kind::log_power:
            return "log-power(delta=" + std::to_string(delta_) + ", c=" + std::to_string(c_) + ")";
        case Kind::table:
            return "table(" + std::to_string(ts_.size()) + " points)";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// pair class and L^q_p

std::pair<bool, bool> pair_in_K(double p, double q, int d) {
    if (!(p > 1) || !(q > 1)) throw InvalidInput("pair class needs p, q > 1");
    const double s = double(d) / p + 2.0 / q;
    return {s < 2.0, s < 1.0};
}

double lqp_norm(const std::function<double(double, const double*)>& f, const LqpBox& box,
                int nt, int nx_per_dim, double p, double q) {
    if (p < 1 || q < 1) throw InvalidInput("lqp_norm needs p, q >= 1");
    if (nt < 1 || nx_per_dim < 1) throw InvalidInput("lqp_norm needs positive grid sizes");
    const int d = static_cast<int>(box.x.size());
    if (d < 1) throw InvalidInput("lqp_norm needs at least one space dimension");

    const double dt = (box.t1 - box.t0) / nt;
    double cell_vol = 1;
    std::vector<double> dx(d);
    for (int k = 0; k < d; ++k) {
        dx[k] = (box.x[k][1] - box.x[k][0]) / nx_per_dim;
        cell_vol *= dx[k];
    }

    std::vector<double> xpt(d);
    std::vector<int> idx(d, 0);
    double outer = 0;
    for (int it = 0; it < nt; ++it) {
        const double t = box.t0 + (it + 0.5) * dt;
        double inner = 0;
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int k = 0; k < d; ++k) xpt[k] = box.x[k][0] + (idx[k] + 0.5) * dx[k];
            inner += std::pow(std::abs(f(t, xpt.data())), p) * cell_vol;
            int k = 0;
            while (k < d && ++idx[k] == nx_per_dim) idx[k++] = 0;
            if (k == d) break;
        }
        outer += std::pow(inner, q / p) * dt;
    }
    return std::pow(outer, 1.0 / q);
}

// ---------------------------------------------------------------------------
// CoefficientSet

void CoefficientSet::eval_B(double t, SegmentView xs, const EmpiricalLaw& mu, double* out) const {
    if (B) {
        B(t, xs, mu, out);
    } else {
        std::fill(out, out + dim, 0.0);
    }
}

void CoefficientSet::eval_b(double t, const double* x, const EmpiricalLaw& mu, double* out) const {
    if (b) {
        b(t, x, mu, out);
    } else {
        std::fill(out, out + dim, 0.0);
    }
}

void CoefficientSet::eval_sigma(double t, const double* x, const EmpiricalLaw& mu, double* out) const {
    if (sigma) {
        sigma(t, x, mu, out);
    } else {
        std::fill(out, out + static_cast<size_t>(dim) * dim, 0.0);
        for (int i = 0; i < dim; ++i) out[static_cast<size_t>(i) * dim + i] = 1.0;
    }
}

// ---------------------------------------------------------------------------
// model zoo

namespace {

void identity_matrix(double* out, int d) {
    std::fill(out, out + static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) out[static_cast<size_t>(i) * d + i] = 1.0;
}

double param(const nlohmann::json& j, const char* key, double def) {
    return j.contains(key) ? j.at(key).get<double>() : def;
}

} // namespace

CoefficientSet model_zoo(const std::string& name, const nlohmann::json& params) {
    const int d = static_cast<int>(param(params, "d", 1));
    if (d < 1) throw InvalidInput("model dimension must be >= 1");
    CoefficientSet set;
    set.dim = d;
    set.name = name;
    set.sigma = [d](double, const double*, const EmpiricalLaw&, double* out) {
        identity_matrix(out, d);
    };

    if (name == "brownian") {
        set.distribution_free = true;
        return set;
    }
    if (name == "meanfield-ou") {
        const double a = param(params, "a", 1.0);
        set.b = [a, d](double, const double* x, const EmpiricalLaw& mu, double* out) {
            const auto& m = mu.mean_endpoint();
            for (int i = 0; i < d; ++i) out[i] = a * (m[i] - x[i]);
        };
        set.K = std::max(1.0, a) + 1e-9;
        set.L = a;
        set.phi = DiniModulus::power(0.5, std::max(a, 1e-12));
        return set;
    }
    if (name == "delay-linear") {
        const double c = param(params, "c", 1.0);
        set.B = [c, d](double, SegmentView xs, const EmpiricalLaw&, double* out) {
            const double* tail = xs.node(0); // value at s = -r
            for (int i = 0; i < d; ++i) out[i] = c * tail[i];
        };
        set.distribution_free = true;
        set.L0 = std::abs(c);
        set.B_bound = std::abs(c); // over the unit probe range
        return set;
    }
    if (name == "dini-drift") {
        const double alpha = param(params, "alpha", 0.25);
        const double kappa = param(params, "kappa", 0.5);
        set.b = [alpha, kappa, d](double, const double* x, const EmpiricalLaw& mu, double* out) {
            double nx = 0;
            for (int i = 0; i < d; ++i) nx += x[i] * x[i];
            nx = std::min(std::sqrt(nx), 1.0);
            const auto& m = mu.mean_endpoint();
            for (int i = 0; i < d; ++i) out[i] = kappa * m[i];
            out[0] += std::pow(nx, alpha);
        };
        set.K = 4.0;
        set.L = kappa;
        set.phi = DiniModulus::power(alpha);
        return set;
    }
    if (name == "singular-drift") {
        if (d != 1) throw InvalidInput("singular-drift is a d=1 model");
        const double beta = param(params, "beta", 0.25);
        const double cap = param(params, "cap", 100.0);
        if (!(beta > 0) || beta >= 0.5) throw InvalidInput("singular-drift needs beta in (0, 1/2)");
        set.b = [beta, cap](double, const double* x, const EmpiricalLaw&, double* out) {
            const double ax = std::abs(x[0]);
            out[0] = (ax <= 1.0 && ax > 0)
                         ? std::copysign(std::min(std::pow(ax, -beta), cap), x[0])
                         : 0.0;
        };
        set.distribution_free = true;
        set.K = 1.0 + 1e-9;
        set.F = [beta](double, const double* x) {
            const double ax = std::abs(x[0]);
            return (ax <= 1.0 && ax > 0) ? std::pow(ax, -2 * beta) : 0.0;
        };
        // certificate: (p, q) in K with 2*beta*p < 1 so F is integrable
        set.F_p = 1.8;
        set.F_q = 3.0;
        const double inner = 2.0 / (1.0 - 2 * beta * set.F_p); // int_{-1}^{1} |x|^(-2 b p) dx
        set.F_norm_T1 = std::pow(std::pow(inner, set.F_q / set.F_p), 1.0 / set.F_q);
        return set;
    }
    throw InvalidInput("unknown model '" + name + "'");
}

// ---------------------------------------------------------------------------
// mollification

namespace {

/// Normalized discrete kernel: tensor Gauss-Legendre nodes on the scaled
/// support, weighted by the bump kernel and normalized to total mass 1, so a
/// constant mollifies to itself exactly and every output is a convex average
/// over the 1/n ball.
struct KernelQuadrature {
    std::vector<std::vector<double>> offsets; // each (1+d): (tau, y...)
    std::vector<double> weights;

    KernelQuadrature(int level, int d, int q_points) {
        std::vector<double> gl_x, gl_w;
        gauss_legendre(q_points, gl_x, gl_w);
        const double radius = 1.0 / level;
        // product of a 1d bump in t and a radial bump in x, arguments scaled
        // by sqrt(2) so the support sits inside the unit ball before scaling
        const auto bump = [](double u) {
            const double z = u * u;
            return z < 1.0 ? std::exp(-1.0 / (1.0 - z)) : 0.0;
        };
        std::vector<int> idx(1 + d, 0);
        std::vector<double> pt(1 + d);
        double total = 0;
        while (true) {
            double w = 1;
            for (int k = 0; k < 1 + d; ++k) {
                pt[k] = gl_x[idx[k]] * radius / std::sqrt(2.0);
                w *= gl_w[idx[k]];
            }
            double ynorm = 0;
            for (int k = 1; k < 1 + d; ++k) ynorm += pt[k] * pt[k];
            ynorm = std::sqrt(ynorm);
            const double density =
                bump(pt[0] * std::sqrt(2.0) * level) * bump(ynorm * std::sqrt(2.0) * level);
            if (density > 0) {
                offsets.push_back(pt);
                weights.push_back(w * density);
                total += w * density;
            }
            int k = 0;
            while (k < 1 + d && ++idx[k] == q_points) idx[k++] = 0;
            if (k == 1 + d) break;
        }
        for (auto& w : weights) w /= total;
    }
};

} // namespace

CoefficientSet mollify(const CoefficientSet& set, int level, double T, const MollifyOptions& opts) {
    if (level < 1) throw InvalidInput("mollification level must be >= 1");
    if (opts.quad_points < 2 || opts.quad_points > 64)
        throw Error("mollifier quadrature budget out of range [2, 64]");
    const int d = set.dim;
    auto base = std::make_shared<CoefficientSet>(set);
    auto quad = std::make_shared<KernelQuadrature>(level, d, opts.quad_points);
    const double floor_eig = 0.5 / set.K;

    CoefficientSet out = set;
    out.name = set.name + "+mollified(" + std::to_string(level) + ")";

    out.b = [base, quad, d, T](double t, const double* x, const EmpiricalLaw& mu, double* res) {
        std::fill(res, res + d, 0.0);
        std::vector<double> xp(d), tmp(d);
        for (size_t k = 0; k < quad->weights.size(); ++k) {
            const double ts = t - quad->offsets[k][0];
            if (ts < 0 || ts > T) continue; // b := 0 outside [0, T]
            for (int i = 0; i < d; ++i) xp[i] = x[i] - quad->offsets[k][1 + i];
            base->eval_b(ts, xp.data(), mu, tmp.data());
            const double w = quad->weights[k];
            for (int i = 0; i < d; ++i) res[i] += w * tmp[i];
        }
    };

    out.sigma = [base, quad, d, T, floor_eig](double t, const double* x, const EmpiricalLaw& mu,
                                              double* res) {
        std::vector<double> a(static_cast<size_t>(d) * d, 0.0);
        std::vector<double> xp(d), sig(static_cast<size_t>(d) * d);
        for (size_t k = 0; k < quad->weights.size(); ++k) {
            const double ts = t - quad->offsets[k][0];
            const double w = quad->weights[k];
            if (ts < 0 || ts > T) {
                for (int i = 0; i < d; ++i) a[static_cast<size_t>(i) * d + i] += w; // a := I outside
                continue;
            }
            for (int i = 0; i < d; ++i) xp[i] = x[i] - quad->offsets[k][1 + i];
            base->eval_sigma(ts, xp.data(), mu, sig.data());
            // a += w * sigma sigma^T
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double s = 0;
                    for (int l = 0; l < d; ++l)
                        s += sig[static_cast<size_t>(i) * d + l] * sig[static_cast<size_t>(j) * d + l];
                    a[static_cast<size_t>(i) * d + j] += w * s;
                }
        }
        if (d == 1) {
            res[0] = std::sqrt(std::max(a[0], floor_eig));
            return;
        }
        Eigen::Map<const Eigen::MatrixXd> A(a.data(), d, d);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor_eig).cwiseSqrt();
        Eigen::MatrixXd S = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) res[static_cast<size_t>(i) * d + j] = S(i, j);
    };
    return out;
}

} // namespace mvsde
