#pragma once

#include "kpx/model.hpp"

namespace kpx {

// Linear-Gaussian data of the frozen system between s and t:
// X_t = R X_s + m + N(0, K).
struct FrozenMoments {
    double s = 0.0;
    double t = 0.0;
    Mat R;
    Vec m;
    Mat K;
    Mat K_hat;      // T^{-1} K T^{-1}, T = ScaleMatrix(t - s)
    Mat precision;  // K^{-1}
    double log_det = 0.0;
    Vec hat_eigenvalues;

    PhasePoint mean(const PhasePoint& x) const;  // ϑ_{t,s}(x)
    double density(const PhasePoint& x, const PhasePoint& y) const;
    Vec grad_x1(const PhasePoint& x, const PhasePoint& y) const;
    // ∇_x and ∇²_x of the density (x = backward point), stacked 2d coordinates
    Vec grad_x(const PhasePoint& x, const PhasePoint& y) const;
    Mat hess_x(const PhasePoint& x, const PhasePoint& y) const;
};

class FrozenProxy {
public:
    // Reference curve r ↦ θ_{r,τ}(ξ) stored on [t_lo, t_hi] ∋ τ.
    FrozenProxy(const ModelSpec& model, double tau, const PhasePoint& xi, double t_lo, double t_hi,
                int path_steps = 256);

    double tau() const { return tau_; }
    const PhasePoint& xi() const { return xi_; }
    PhasePoint theta(double r) const;

    Mat resolvent(double t, double s) const;
    PhasePoint frozen_mean(double t, double s, const PhasePoint& x) const;
    Mat frozen_cov(double t, double s) const;
    // Composite Simpson with `nodes` (odd) points on [s, t]; throws NumericalError when
    // the scaled covariance loses definiteness.
    FrozenMoments moments(double t, double s, int nodes = 129) const;

    double frozen_density(double s, const PhasePoint& x, double t, const PhasePoint& y) const;
    Vec frozen_density_grad_x1(double s, const PhasePoint& x, double t, const PhasePoint& y) const;

    // (A_v − Ã_v) applied in w to p̃(v, w, t, y).
    double generator_gap_apply(double v, const PhasePoint& w, double t, const PhasePoint& y) const;
    double generator_gap_apply(const FrozenMoments& mo, const PhasePoint& w, const PhasePoint& y) const;

private:
    const ModelSpec* model_;
    double tau_;
    PhasePoint xi_;
    double t_lo_, t_hi_;
    FlowPath back_, fwd_;
    bool has_back_ = false, has_fwd_ = false;
};

struct ScalingDefect {
    double kappa = 1.0;      // two-sided quadratic-form and resolvent equivalence over the sample
    double kappa_form = 1.0;
    double kappa_resolvent = 1.0;
    double condition = 1.0;  // λ_max / λ_min of T^{-1} K T^{-1}
};

ScalingDefect scaling_defect(const FrozenProxy& proxy, double t, double s, const std::vector<PhasePoint>& sample);

}  // namespace kpx
