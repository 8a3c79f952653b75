#pragma once

#include <functional>
#include <vector>

namespace kpx {

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
    int size() const { return static_cast<int>(x.size()); }
};

// Gauss–Legendre on [a, b].
Rule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Nodes/weights for E[f(Z)], Z ~ N(0,1). Weights sum to 1.
const Rule& gauss_hermite_normal(int n);

// Composite Simpson weights on n (odd) equispaced nodes over [a, b].
std::vector<double> simpson_weights(int n, double a, double b);

// Trapezoid rule on [a, b] with n intervals (n+1 nodes). Spectrally accurate
// for integrands that decay smoothly to zero at both ends.
double trapezoid(const std::function<double(double)>& f, double a, double b, int n);

// 2D trapezoid over a rectangle.
double trapezoid2(const std::function<double(double, double)>& f, double ax, double bx,
                  double ay, double by, int nx, int ny);

// Gauss–Legendre on [a, b] with nested doubling until relative change < tol.
// Throws NumericalError when max_nodes is reached first.
double adaptive_gl(const std::function<double(double)>& f, double a, double b, double tol,
                   int max_nodes = 4096);

}  // namespace kpx
