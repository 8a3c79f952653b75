#pragma once

#include "kpx/geometry.hpp"
#include "kpx/quadrature.hpp"

#include <functional>
#include <memory>

namespace kpx {

using FieldFn = std::function<Vec(double, const PhasePoint&)>;
using JacobianFn = std::function<Mat(double, const PhasePoint&)>;

struct VectorFieldSpec {
    int d = 1;
    FieldFn F1;
    FieldFn F2;
    JacobianFn gradF2;  // ∇_{x1} F2, d x d
    bool piecewise_constant_time = false;
    std::vector<double> time_breaks;
    // F1 and F2 affine in x with time-independent gradients; mollification is then the identity.
    bool affine = false;

    Vec eval(double t, const PhasePoint& x) const;  // stacked (F1, F2)
    void check_hormander(double t, const PhasePoint& x, double lo, double hi) const;
    static VectorFieldSpec kinetic(int d = 1);  // F = (0, x1)
    static VectorFieldSpec zero(int d = 1);
};

// Tensor bump ∝ exp(-1/(1-x_i^2)) on |x_i| < 1: normalized 1D GL nodes/weights.
const Rule& bump_rule();
double bump_density_1d(double x);

VectorFieldSpec mollify_field(const VectorFieldSpec& F, double eps1, double eps2);

struct FlowPath {
    double s = 0.0;
    double t_end = 0.0;
    std::vector<double> times;
    std::vector<PhasePoint> states;
    std::vector<Vec> slopes;  // field values at nodes, for Hermite dense output
    double step = 0.0;
    double error_estimate = 0.0;  // Richardson estimate at the endpoint

    PhasePoint at(double t) const;
    const PhasePoint& end() const { return states.back(); }
};

// RK4 for x' = F(t, x) from (s, x) to t (t < s integrates backward); default 256 steps.
FlowPath integrate_flow_path(const VectorFieldSpec& F, double s, double t, const PhasePoint& x, int steps = 256);
PhasePoint integrate_flow(const VectorFieldSpec& F, double t, double s, const PhasePoint& x, int steps = 256);

// θ̃_{t,s}(x): flow of (F1 * ρ_1, F2 * ρ_{|t-s|^{3/2}}), scale frozen at the start time.
PhasePoint mollified_flow(const VectorFieldSpec& F, double t, double s, const PhasePoint& x);

// Smallest κ >= 1 with
// κ^{-1}(|T^{-1}_{t-s}(x - θ_{v,t}(y))| - 1) <= |T^{-1}_{t-s}(θ_{t,v}(x) - y)| <= κ(|T^{-1}_{t-s}(x - θ_{v,t}(y))| + 1).
double flow_equivalence_defect(const VectorFieldSpec& F, double s, double v, double t, const PhasePoint& x,
                               const PhasePoint& y);

}  // namespace kpx
