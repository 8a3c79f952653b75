#pragma once

#include "kpx/cauchy.hpp"
#include "kpx/density.hpp"
#include "kpx/envelope.hpp"
#include "kpx/model.hpp"
#include "kpx/proxy_solver.hpp"

#include <cstdint>
#include <functional>

namespace kpx {

struct SimConfig {
    double s = 0.0;
    double t = 1.0;
    PhasePoint x = PhasePoint::d1(0.0, 0.0);
    long N = 100000;
    int M = 1024;
    std::uint64_t seed = 1;
    int n = 0;  // drift level; <= 0 drops the drift
    std::vector<double> record_times;  // snapped to the step grid
    // accumulated as ∫_s^· f(r, X_r) dr (trapezoid) and recorded with the states
    std::function<double(double, const PhasePoint&)> integrand;
    int jobs = 1;
    // each step draws `coarsen` normals and uses their sum / √coarsen, so a run with M/k steps and
    // coarsen = k follows the same Brownian path as the M-step run with the same seed
    int coarsen = 1;
};

// Terminal (and recorded) states, d = 1. Path i uses its own generator seeded by (seed, i).
struct SimulationRun {
    double s = 0.0, t = 1.0;
    int M = 0;
    int n = 0;
    std::uint64_t seed = 0;
    std::vector<double> x1, x2, integral;
    std::vector<double> record_times;
    std::vector<std::vector<double>> rec_x1, rec_x2, rec_integral;

    long size() const { return static_cast<long>(x1.size()); }
    Vec2 mean() const;
    Mat2 covariance() const;
    // binary dump: magic "KPXSAMP1", uint64 N, M, seed, float64 s, t, then N x1 and N x2 (float64, little-endian)
    void write_samples(const std::string& path) const;
};

// Explicit Euler–Maruyama for X1 with coefficients at the left endpoint; X2 with the
// trapezoidal update x2 += Δt (F2(x1_old) + F2(x1_new)) / 2.
SimulationRun euler_maruyama(const ModelSpec& model, const SimConfig& cfg);

// Binned Gaussian KDE in coordinates whitened by the sample covariance, bandwidth
// scale · N^{−1/6}, evaluated on the grid.
DensityField kde_density(const SimulationRun& run, const ForwardGrid& grid, double scale = 1.0, int bins = 512);

struct BoundReport {
    SandwichFit fit;
    PhasePoint flow_point = PhasePoint::d1(0.0, 0.0);  // θ̃_{t,s}(x)
    double tail_ratio = 0.0;  // max p / (C_upper g_{λ_upper}) on 3 < |u| <= 5
    double grad_C = NAN;      // sup |∂_{x1}p| √(t−s) / g_λ (when the field carries a gradient)
    double grad_lambda = NAN;
    bool finite() const { return std::isfinite(fit.C) && std::isfinite(fit.lambda); }
};

// θ̃_{t,s}(x): mollified flow of F + b^(n) (b dropped for n <= 0).
PhasePoint transported_mean(const ModelSpec& model, int n, double s, const PhasePoint& x, double t);

// Two-sided sandwich around the mollified flow of F + b^(n) on the central region |u|_∞ <= central
// of the grid's whitened coordinates.
BoundReport aronson_fit(const DensityField& density, const ModelSpec& model, int n, double central = 3.0);

enum class HolderVariable { backward_x2, backward_gradient, forward };

// Increments of f(x, y) under perturbations of x (backward) or y (forward) over two decades,
// envelope (t−s)^{η/2} |·|_d^{-η} (g(x, y) + g(x', y')) increments. For backward_x2 the slope
// is taken against |x2 − x2'|; otherwise against the |·|_d distance (minimum over directions).
ProbeResult holder_probe(const std::function<double(const PhasePoint&, const PhasePoint&)>& f,
                         HolderVariable var, double eta, double s, double t, const PhasePoint& x,
                         const std::vector<PhasePoint>& ys,
                         const std::function<double(const PhasePoint&, const PhasePoint&)>& kernel);

struct DefectResult {
    std::vector<std::string> features;
    std::vector<double> mean;  // E[(M_T − M_{t1}) w(X_{t1})], first entry is the unconditional M_T − M_0
    std::vector<double> se;
    double max_abs_t = 0.0;    // max |mean / se|
    long N = 0;
};

// M_r = u(r, X_r) − u(s, x) − ∫_s^r g(v, X_v) dv along simulated paths at drift level n, with
// u from the Cauchy solver; conditional mean of the late increment tested against features of
// X at the ladder node `mid`.
DefectResult martingale_defect(const ModelSpec& model, int n, const MildSolution& u, const CauchyData& data,
                               SimConfig cfg, int mid);

// one-sample Kolmogorov–Smirnov distance against a continuous CDF
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace kpx
