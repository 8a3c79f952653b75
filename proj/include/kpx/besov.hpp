#pragma once

#include "kpx/common.hpp"

#include <cstdint>
#include <string>

namespace kpx {

// Φ̂(k) = ∫ Φ(x) e^{-ikx} dx for the normalized 1D bump; tabulated, set to 0 beyond |k| = 1000 (|Φ̂| < 1e-13 there).
double bump_transform(double k);
// Direct Gauss–Legendre evaluation (slow; used to validate the table).
double bump_transform_direct(double k);

struct Wave {
    double k1 = 0.0;
    double k2 = 0.0;
    double amp = 0.0;
    double phase = 0.0;
    int shell = 0;
};

// f(x) = c0 + Σ amp cos(k1 x1 + k2 x2 + phase)
struct SpectralField {
    double c0 = 0.0;
    std::vector<Wave> waves;

    double eval(double x1, double x2) const;
    double dx1(double x1, double x2) const;
    bool is_zero() const;
    SpectralField scaled(double c) const;
    SpectralField minus(const SpectralField& o) const;  // waves with identical (k, phase) are merged
};

// Periodic samples on [-L1/2, L1/2) x [-L2/2, L2/2), row-major in x1 (index i1 * n2 + i2).
struct GridField {
    int n1 = 0, n2 = 0;
    double L1 = 1.0, L2 = 1.0;
    std::vector<double> v;

    double x1(int i) const { return -0.5 * L1 + L1 * i / n1; }
    double x2(int i) const { return -0.5 * L2 + L2 * i / n2; }
    double& at(int i1, int i2) { return v[static_cast<size_t>(i1) * n2 + i2]; }
    double at(int i1, int i2) const { return v[static_cast<size_t>(i1) * n2 + i2]; }
    double cell() const { return L1 * L2 / (double(n1) * n2); }
    static GridField sample(int n1, int n2, double L1, double L2, const std::function<double(double, double)>& f);
};

// Applies a real even multiplier m(k1, k2) on the torus via FFT.
GridField apply_multiplier(const GridField& f, const std::function<double(double, double)>& m);

enum class DriftShape { velocity, anisotropic };

struct DriftSpec {
    double beta = -0.25;
    int J_max = 10;
    std::uint64_t seed = 1;
    DriftShape shape = DriftShape::velocity;
    double amplitude = 1.0;
    int waves_per_shell = 1;
    double k1_quantum = 0.0;  // > 0: every k1 is an integer multiple of it
    std::vector<double> slice_times{0.0, 1.0};  // boundaries; slice i is [t_i, t_{i+1})
    std::vector<SpectralField> slices;

    int slice_of(double t) const;
    // n <= 0 means the unmollified field
    SpectralField field(double t, int n = 0) const;
    double eval(double t, double x1, double x2, int n = 0) const;
    double sup_bound(int n) const;  // max over slices of Σ |amp Φ̂|

    std::string to_json() const;
    static DriftSpec from_json(const std::string& text);
};

// Random-phase waves at shells j = 0..J_max with amplitudes A 2^{-jβ}.
// velocity: |k1| ∈ [2^j, 2^{j+1}), k2 = 0; anisotropic: additionally |k2| ∈ [2^{3j}, 2^{3j+1}).
// k1_quantum > 0 rounds |k1| to the nearest positive multiple (needed by the Fourier sweep).
DriftSpec sample_drift(double beta, int J_max, std::uint64_t seed, const std::vector<double>& slice_times,
                       DriftShape shape = DriftShape::velocity, double amplitude = 1.0, int waves_per_shell = 1,
                       double k1_quantum = 0.0);

// b^(n): every component multiplied by Φ̂(k1/n) Φ̂(k2/n).
SpectralField mollify_drift(const DriftSpec& spec, int n, double t);
SpectralField mollify(const SpectralField& f, double n);
GridField mollify(const GridField& f, double n);

enum class Geometry { iso, aniso };

struct BesovNormRequest {
    double theta = -0.25;
    double p = INFINITY;  // 1 or ∞
    double q = INFINITY;  // 1 or ∞
    Geometry geometry = Geometry::aniso;
    double v_min = 0.0;   // 0: 4^{-(J+2)} from the field's highest frequency
    int nodes_per_octave = 8;
};

// ‖g(1)*f‖_p + (sup_v | ∫ dv/v) v^{1−θ/2} ‖∂_v g(v)*f‖_p, heat kernel with covariance
// diag(v, v³) (aniso) or v I (iso). Spectral fields use the exact sup over R² of a trigonometric
// sum with rationally independent frequencies, Σ|a_k m(k)|; they support p = ∞ only.
double thermic_norm(const SpectralField& f, const BesovNormRequest& req);
double thermic_norm(const GridField& f, const BesovNormRequest& req);

// (Σ_j (2^{jθ} ‖R_j f‖_p)^q)^{1/q} with blocks φ_j = ψ(2^{-j}|ξ|_a) − ψ(2^{-j+1}|ξ|_a), |ξ|_a = |ξ1| + |ξ2|^{1/3}.
double lp_norm_aniso(const SpectralField& f, double theta, double p, double q);
double lp_norm_aniso(const GridField& f, double theta, double p, double q);
double lp_cutoff(double r);  // ψ: 1 on [0,1], 0 on [2,∞), C^∞ in between

// |∫ f g| / (‖f‖_{B^θ_{∞,∞}} ‖g‖_{B^{-θ}_{1,1}}), aniso thermic norms.
double duality_defect(const GridField& f, const GridField& g, double theta);

struct ProductCheck {
    double product_norm = 0.0;  // ‖fg‖_{α∧γ}
    double f_norm = 0.0;
    double g_norm = 0.0;
    double ratio() const { return f_norm * g_norm > 0 ? product_norm / (f_norm * g_norm) : 0.0; }
};
ProductCheck product_norm_check(const GridField& f, double alpha, const GridField& g, double gamma);

struct MollificationRow {
    int n = 0;
    double defect = 0.0;  // ‖b^(n) − b‖_{B^η_{∞,∞}}, max over slices
    double relative = 0.0;  // defect / ‖b‖_{B^η_{∞,∞}}
};
struct MollificationTable {
    double eta = 0.0;
    double norm_beta = 0.0;  // ‖b‖_{B^β_{∞,∞}}
    double norm_eta = 0.0;
    double fitted_C = 0.0;   // max_n defect / ‖b‖_β
    std::vector<MollificationRow> rows;
    bool non_increasing(double tol = 0.02) const;
};
MollificationTable mollification_convergence(const DriftSpec& spec, double eta, const std::vector<int>& n_list);

}  // namespace kpx
