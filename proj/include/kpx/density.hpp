#pragma once

#include "kpx/geometry.hpp"

#include <string>

namespace kpx {

// Tensor grid y = center + L u, u ∈ [−h, h]^2 (d = 1 only), L lower triangular.
struct ForwardGrid {
    PhasePoint center = PhasePoint::d1(0.0, 0.0);
    Mat2 L = Mat2::Identity();
    int n = 41;
    double half_width = 7.0;

    double u(int i) const { return -half_width + 2.0 * half_width * i / (n - 1); }
    PhasePoint point(int i1, int i2) const;
    PhasePoint point_u(double u1, double u2) const;
    // whitened coordinates of y
    Vec2 whiten(const PhasePoint& y) const;
    double cell_weight() const;  // trapezoid weight of an interior node
    int size() const { return n * n; }
};

struct DensityField {
    double s = 0.0;
    double t = 0.0;
    PhasePoint x = PhasePoint::d1(0.0, 0.0);
    std::string source;
    ForwardGrid grid;
    std::vector<double> values;   // index i1 * n + i2
    std::vector<double> grad_x1;  // empty when not computed
    std::vector<double> trace;    // iteration trace of the producing solver
    int iterations = 0;
    bool converged = true;

    double at(int i1, int i2) const { return values[static_cast<size_t>(i1) * grid.n + i2]; }
    double mass() const;
    PhasePoint mean() const;
    double min_value() const;
    // writes i1, i2, y1, y2, value[, grad] rows
    void write_csv(const std::string& path) const;
};

}  // namespace kpx
