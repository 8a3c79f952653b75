#pragma once

#include "kpx/common.hpp"

#include <array>
#include <utility>

namespace kpx {

// x1: velocity block (noise acts here), x2: position block. Same length d.
struct PhasePoint {
    Vec x1;
    Vec x2;

    PhasePoint() = default;
    PhasePoint(Vec a, Vec b);
    static PhasePoint d1(double a, double b);
    static PhasePoint zero(int d);

    int dim() const { return static_cast<int>(x1.size()); }
    Vec stacked() const;
    static PhasePoint from_stacked(const Vec& v);

    PhasePoint operator+(const PhasePoint& o) const;
    PhasePoint operator-(const PhasePoint& o) const;
    PhasePoint operator*(double c) const;
};

// |z1| + |z2|^{1/3}
double dist_aniso(const PhasePoint& z);
double dist_aniso(double z1, double z2);

// diag(u^{1/2} I_d, u^{3/2} I_d)
class ScaleMatrix {
public:
    explicit ScaleMatrix(double u);
    double u() const { return u_; }
    PhasePoint apply(const PhasePoint& z) const;
    PhasePoint apply_inverse(const PhasePoint& z) const;
    Mat matrix(int d) const;
    Mat inverse_matrix(int d) const;

private:
    double u_;
};

enum class KernelMode { degenerate, nondegenerate };

struct GaussKernelParams {
    double lambda = 1.0;
    int d = 1;
    KernelMode mode = KernelMode::degenerate;
};

// Normalized Gaussian with covariance diag(λu I, λu³ I).
double gauss_deg(const GaussKernelParams& p, double u, const PhasePoint& z);
// Normalized Gaussian with covariance λu I_d.
double gauss_nondeg(const GaussKernelParams& p, double u, const Vec& z);

// ∂_u^i D^{j} g^d_λ(u, z) with j = (j1, j2) multi-indices over the two blocks.
// Analytic for i <= 1 and |j| <= 2; central differences for i <= 2, |j| <= 4;
// UnsupportedOrder beyond.
double gauss_deg_derivative(const GaussKernelParams& p, double u, const PhasePoint& z, int time_order,
                            const std::vector<int>& j1, const std::vector<int>& j2);

struct MomentCheck {
    double measured = 0.0;
    double envelope = 0.0;  // C_δ v^{δ/2} with C_δ the v = 1 moment
    double ratio() const { return envelope > 0 ? measured / envelope : 0.0; }
};

// ∫ g^d_1(v, x) |x|_d^δ dx.
double kernel_moment(double delta, double v, int d = 1);
MomentCheck moment_check(double delta, double v, int d = 1);

// Fitted constants of the weighted derivative bound
// |z|_d^δ |∂_v^i D^j g^d_λ(v,z)| <= C v^{δ/2 - (i + |j1|/2 + 3|j2|/2)} g^d_{κλ}(v,z).
struct DerivativeBoundFit {
    double C = 0.0;
    double kappa = 1.0;
};
DerivativeBoundFit fit_derivative_bound(double lambda, double delta, int time_order,
                                        const std::vector<int>& j1, const std::vector<int>& j2,
                                        const std::vector<double>& v_grid, int points_per_axis = 21);

}  // namespace kpx
