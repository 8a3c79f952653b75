#pragma once

#include "kpx/density.hpp"
#include "kpx/frozen_proxy.hpp"

#include <memory>
#include <optional>

namespace kpx {

struct ProxyOptions {
    int time_nodes = 24;       // per target, split over two substituted halves
    int gh_nodes = 32;         // Gauss–Hermite per axis
    int lattice_time_nodes = 12;  // cheaper rules inside the lattice iteration
    int lattice_gh_nodes = 16;
    int slices = 10;           // lattice slices in √(v − s)
    int lattice = 25;          // whitened nodes per axis per slice
    double lattice_half_width = 6.0;
    int time_power = 0;        // 0: ceil(2 / Hölder exponent of σ)
    int max_iter = 30;
    double tol = 1e-4;
    bool with_gradient = true;
    int moment_nodes = 65;     // Simpson nodes for non-closed-form moments
};

// Linear-Gaussian frozen transition for d = 1, fixed-size.
struct Gauss2 {
    Mat2 R = Mat2::Identity();
    Vec2 m = Vec2::Zero();
    Mat2 K = Mat2::Zero();
    Mat2 P = Mat2::Zero();
    Mat2 Kh = Mat2::Zero();  // T^{-1} K T^{-1}
    double dt = 0.0;
    double norm = 0.0;  // (2π)^{-1} det K^{-1/2}

    static Gauss2 from(const Mat2& R, const Vec2& m, const Mat2& K, double dt);
    Vec2 mean(const Vec2& x) const { return R * x + m; }
    double density(const Vec2& x, const Vec2& y) const;
    double grad_x1(const Vec2& x, const Vec2& y) const;
};

// Transition density p_{F,σ}(s, x, ·, ·) for fixed (s, x) on (s, t_max] via Picard
// iteration of the backward Duhamel form around the proxy frozen at each target.
class ProxySolver {
public:
    ProxySolver(const ModelSpec& model, double s, const PhasePoint& x, double t_max, ProxyOptions opt = {});

    // Runs the lattice iteration; throws DivergenceError on non-contraction.
    void solve();

    double density(double t, const PhasePoint& y) const;
    double gradient_x1(double t, const PhasePoint& y) const;
    // density (and gradient when enabled) on a grid; one Picard step beyond the lattice iterate
    DensityField field(double t, const ForwardGrid& grid) const;

    // Proxy frozen at (s, x): its mean and covariance at time t.
    Gauss2 reference(double t) const;
    ForwardGrid default_grid(double t, int n = 41, double half_width = 7.0) const;

    const std::vector<double>& trace() const { return trace_; }
    int iterations() const { return static_cast<int>(trace_.size()); }
    bool converged() const { return converged_; }
    bool trivial() const { return trivial_; }
    double s() const { return s_; }
    const PhasePoint& x() const { return x_; }
    double t_max() const { return t_max_; }

private:
    struct Frame;
    struct Target;
    Gauss2 frozen_at(double tau, const Vec2& xi, double t, double s, const FrozenProxy* fp) const;
    Frame frame(double v) const;
    std::vector<std::pair<double, double>> time_rule(double t, int n) const;
    double lattice_value(const std::vector<double>& tab, double v, const Frame& f, const Vec2& u) const;
    std::pair<double, double> apply(const std::vector<double>* q, const std::vector<double>* qg, double t,
                                    const Vec2& y, const std::vector<std::pair<double, double>>& rule,
                                    const std::vector<Frame>& frames, int gh_nodes) const;

    const ModelSpec* model_;
    double s_, t_max_;
    PhasePoint x_;
    Vec2 xv_;
    ProxyOptions opt_;
    int power_;
    bool trivial_;
    bool converged_ = false;
    bool solved_ = false;
    std::unique_ptr<FrozenProxy> ref_proxy_;
    std::vector<double> q_, qg_;  // lattice ratios, (slices + 1) × lattice²
    Vec2 grad_limit_ = Vec2::Zero();
    std::vector<double> trace_;
};

DensityField proxy_density_series(const ModelSpec& model, double s, const PhasePoint& x, double t,
                                  const ForwardGrid& grid, int K_terms, ProxyOptions opt = {});
Vec proxy_gradient(const ModelSpec& model, double s, const PhasePoint& x, double t, const PhasePoint& y,
                   ProxyOptions opt = {});

enum class ProbeKind { backward, forward, mixed };

struct ProbeResult {
    double slope = 0.0;     // log-log slope of increment against distance
    double constant = 0.0;  // sup of increment / (distance^η · envelope)
    double r2 = 0.0;
    std::vector<double> distances;
    std::vector<double> increments;
};

// Increments of the density at (s, x, t, y) along a geometric ladder of 2 decades
// (|·|_d distances from 1e-1 down to 1e-3 relative to √(t−s)) in each phase direction.
ProbeResult proxy_regularity_probe(const ModelSpec& model, ProbeKind kind, double eta, double s,
                                   const PhasePoint& x, double t, const std::vector<PhasePoint>& battery,
                                   ProxyOptions opt = {});

}  // namespace kpx
