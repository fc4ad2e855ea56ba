#include "mvsde/segment.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mvsde {

namespace {

bool near_integer(double x, double tol, long long& out) {
    const double rounded = std::nearbyint(x);
    if (std::abs(x - rounded) > tol * std::max(1.0, std::abs(x))) return false;
    out = static_cast<long long>(rounded);
    return true;
}

double sq_norm(const double* x, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += x[i] * x[i];
    return s;
}

} // namespace

TimeGrid TimeGrid::make(double h, double r, double T) {
    if (!(h > 0)) throw InvalidInput("grid step h must be > 0");
    if (r < 0) throw InvalidInput("delay r must be >= 0");
    if (!(T > 0)) throw InvalidInput("horizon T must be > 0");
    long long nr = 0, nT = 0;
    if (!near_integer(r / h, 1e-9, nr))
        throw InvalidInput("h must divide r exactly (r=" + std::to_string(r) +
                           ", h=" + std::to_string(h) + ")");
    if (!near_integer(T / h, 1e-9, nT))
        throw InvalidInput("h must divide T exactly (T=" + std::to_string(T) +
                           ", h=" + std::to_string(h) + ")");
    TimeGrid g;
    g.h = h;
    g.r = r;
    g.T = T;
    g.n_r = static_cast<int>(nr);
    g.n_T = static_cast<int>(nT);
    return g;
}

int TimeGrid::index_of(double t) const {
    long long k = 0;
    if (!near_integer(t / h, 1e-9, k) || k < -n_r || k > n_T)
        throw InvalidInput("time " + std::to_string(t) + " is not a grid node in [-r, T]");
    return static_cast<int>(k) + n_r;
}

bool TimeGrid::same(const TimeGrid& o) const {
    return h == o.h && n_r == o.n_r && n_T == o.n_T;
}

Trajectory Trajectory::zeros(const TimeGrid& grid, int dim) {
    Trajectory t;
    t.grid = grid;
    t.dim = dim;
    t.values.assign(static_cast<size_t>(grid.total_nodes()) * dim, 0.0);
    return t;
}

double uniform_norm(SegmentView view) {
    if (view.n_nodes <= 0 || view.dim <= 0) throw InvalidInput("empty segment");
    double best = 0;
    for (int j = 0; j < view.n_nodes; ++j) best = std::max(best, sq_norm(view.node(j), view.dim));
    return std::sqrt(best);
}

double uniform_norm(const SegmentPath& path) {
    if (path.values.empty()) throw InvalidInput("empty segment");
    return uniform_norm(SegmentView{path.values.data(), path.nodes(), path.dim});
}

SegmentView segment_view(const Trajectory& traj, int node_index) {
    return SegmentView{traj.node(node_index - traj.grid.n_r), traj.grid.n_r + 1, traj.dim};
}

SegmentPath extract_segment(const Trajectory& traj, double t) {
    const int k = traj.grid.index_of(t);
    if (k < traj.grid.n_r)
        throw InvalidInput("segment anchor must be in [0, T], got t=" + std::to_string(t));
    SegmentPath seg;
    seg.grid = traj.grid;
    seg.anchor = t;
    seg.dim = traj.dim;
    const auto first = traj.values.begin() + static_cast<size_t>(k - traj.grid.n_r) * traj.dim;
    seg.values.assign(first, first + static_cast<size_t>(traj.grid.n_r + 1) * traj.dim);
    return seg;
}

double segment_sup_distance(SegmentView a, SegmentView b) {
    if (a.n_nodes != b.n_nodes || a.dim != b.dim)
        throw InvalidInput("segment sup distance needs matching grids");
    double best = 0;
    for (int j = 0; j < a.n_nodes; ++j) {
        double s = 0;
        const double* pa = a.node(j);
        const double* pb = b.node(j);
        for (int i = 0; i < a.dim; ++i) {
            const double di = pa[i] - pb[i];
            s += di * di;
        }
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

double segment_sup_distance(const SegmentPath& a, const SegmentPath& b) {
    if (!a.grid.same(b.grid)) throw InvalidInput("segment sup distance needs matching grids");
    return segment_sup_distance(SegmentView{a.values.data(), a.nodes(), a.dim},
                                SegmentView{b.values.data(), b.nodes(), b.dim});
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t";
    for (int i = 1; i <= traj.dim; ++i) os << ",x_" << i;
    os << "\n";
    char buf[64];
    for (int k = 0; k < traj.grid.total_nodes(); ++k) {
        std::snprintf(buf, sizeof buf, "%.12g", traj.grid.node_time(k));
        os << buf;
        for (int i = 0; i < traj.dim; ++i) {
            std::snprintf(buf, sizeof buf, "%.12g", traj.node(k)[i]);
            os << ',' << buf;
        }
        os << "\n";
    }
}

} // namespace mvsde
