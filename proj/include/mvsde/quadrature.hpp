#pragma once

// Small quadrature helpers shared by the coefficient module and test oracles.

#include <cmath>
#include <functional>
#include <vector>

namespace mvsde {

/// Adaptive Simpson on [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 50);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace mvsde
