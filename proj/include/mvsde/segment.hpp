#pragma once

// Discretized segment paths: a path window [t-r, t] sampled on a uniform grid.
// The grid step must divide the delay r and the horizon T exactly, so delay
// lookups and window extraction never interpolate. Norms and distances are
// evaluated on nodes; that is the discretization convention for the
// piecewise-linear representative (its sup over a grid-aligned window is
// attained at a node).

#include <iosfwd>
#include <vector>

#include "mvsde/errors.hpp"

namespace mvsde {

struct TimeGrid {
    double h = 0;
    double r = 0;
    double T = 0;
    int n_r = 0; // r / h
    int n_T = 0; // T / h

    /// Validates h > 0, r >= 0, T > 0 and exact divisibility of r and T by h.
    static TimeGrid make(double h, double r, double T);

    int total_nodes() const { return n_r + n_T + 1; }
    /// Time of trajectory node k, k in [0, n_r + n_T]; node n_r is t = 0.
    double node_time(int k) const { return (k - n_r) * h; }
    /// Trajectory node index for an on-grid time t in [-r, T]; throws if off-grid.
    int index_of(double t) const;
    bool same(const TimeGrid& o) const;
};

/// Path window on [t-r, t]; values are (n_r+1) d-vectors, node j holds the
/// value at time anchor - r + j*h.
struct SegmentPath {
    TimeGrid grid;
    double anchor = 0;
    int dim = 0;
    std::vector<double> values; // (n_r+1) * dim, node-major

    const double* node(int j) const { return values.data() + static_cast<size_t>(j) * dim; }
    double* node(int j) { return values.data() + static_cast<size_t>(j) * dim; }
    int nodes() const { return grid.n_r + 1; }
};

/// Full path on [-r, T]; node k holds the value at time (k - n_r) * h.
struct Trajectory {
    TimeGrid grid;
    int dim = 0;
    std::vector<double> values; // (n_r + n_T + 1) * dim, node-major

    static Trajectory zeros(const TimeGrid& grid, int dim);
    const double* node(int k) const { return values.data() + static_cast<size_t>(k) * dim; }
    double* node(int k) { return values.data() + static_cast<size_t>(k) * dim; }
};

/// Non-owning window used in solver hot paths; nodes() d-vectors ending at the
/// anchor node.
struct SegmentView {
    const double* data = nullptr;
    int n_nodes = 0;
    int dim = 0;

    const double* node(int j) const { return data + static_cast<size_t>(j) * dim; }
    int nodes() const { return n_nodes; }
};

double uniform_norm(const SegmentPath& path);
double uniform_norm(SegmentView view);

/// Window of n_r+1 values ending at on-grid time t in [0, T].
SegmentPath extract_segment(const Trajectory& traj, double t);
/// View of the window ending at trajectory node k (k >= n_r).
SegmentView segment_view(const Trajectory& traj, int node_index);

double segment_sup_distance(const SegmentPath& a, const SegmentPath& b);
double segment_sup_distance(SegmentView a, SegmentView b);

/// CSV dump: header `t,x_1,...,x_d`, one row per node, 12 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

} // namespace mvsde
