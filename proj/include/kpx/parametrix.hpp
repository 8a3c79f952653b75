#pragma once

#include "kpx/besov.hpp"
#include "kpx/density.hpp"
#include "kpx/model.hpp"

#include <complex>
#include <memory>

namespace kpx {

struct ParametrixOptions {
    int K = 6;                 // highest series term
    int n1 = 1024;             // Fourier nodes along η1 (spacing = drift k1 quantum)
    int n2 = 128;              // Fourier nodes along ξ2
    int steps = 96;            // graded time steps per sweep
    double grading = 3.0;      // v_j = r + (t − r)(j/steps)^grading
    double prune = 1e-9;       // drop mollified waves with |amp Φ̂| below prune · Σ|amp|
    double lambda_env = 2.0;   // reference kernel p_{F,λ} for term envelopes
    double envelope_floor = 1e-6;  // ratios are taken where p_{F,λ} exceeds this fraction of its peak
    double negative_tol = 1e-6;  // relative to the peak
};

// Fields at the end of one sweep on the sheared periodic grid (y1, y2 − (t − r) y1).
struct SweepOutput {
    double r = 0.0, t = 0.0;
    PhasePoint z = PhasePoint::d1(0.0, 0.0);
    bool gradient = false;  // terms hold ∂_{z1} u_k instead of u_k
    int n1 = 0, n2 = 0;
    double L1 = 0.0, L2 = 0.0;
    double c1 = 0.0, c2 = 0.0;  // grid centre in (y1, y2 − (t − r) y1)
    std::vector<std::vector<double>> terms;  // index i1 * n2 + i2, i = 0 is the lowest coordinate
    std::vector<double> zero_mode;           // ∫ of each term (Fourier mode 0)

    double dy1() const { return L1 / n1; }
    double dy2() const { return L2 / n2; }
    double value(int k, const PhasePoint& y) const;
    double partial_sum(int K, const PhasePoint& y) const;
    // y of grid node (i1, i2)
    PhasePoint node(int i1, int i2) const;
};

// Parametrix series for p^(n) around the constant-coefficient kinetic proxy (σ constant,
// F = (0, x1)) and a velocity drift b^(n)(t, x1). Terms u_k of the density expansion solve
// ∂u_{k+1} = L_F* u_{k+1} − ∂_{y1}(b^(n) u_k), u_{k+1}(r) = 0, and are computed exactly in the
// co-moving Fourier variable (η1, ξ2) = (ξ1 + (v − r) ξ2, ξ2); b^(n) acts as shifts in η1.
class ParametrixSeries {
public:
    ParametrixSeries(const ModelSpec& model, int n, ParametrixOptions opt = {});

    int level() const { return n_; }
    const ModelSpec& model() const { return *model_; }
    const ParametrixOptions& options() const { return opt_; }
    double sigma() const { return sigma_; }
    bool trivial() const { return trivial_; }
    double drift(double t, double x1) const;  // b^(n)
    double drift_sup() const;                 // max over slices of Σ|amp|

    // u_k(r, z; t, ·) for k ≤ K, or ∂_{z1} of them.
    SweepOutput sweep(double r, const PhasePoint& z, double t, bool gradient) const;

    // Forward Duhamel form evaluated on the sweep's own data:
    // G + ∫_r^t P*_{t−v}(−∂_{y1}(b p_K(v))) dv on the output grid, one field per K' ≤ K,
    // where p_K is the partial sum up to K'. Time integral: Gauss–Legendre per drift slice,
    // with the substitution v = t − (t − a)w² on the last piece.
    std::vector<std::vector<double>> duhamel_rhs(double r, const PhasePoint& z, double t, int gl_nodes,
                                                 SweepOutput* sweep_out) const;

    // p_{F,λ}: proxy density with σσ* replaced by λ σ².
    double reference_density(double lambda, double r, const PhasePoint& z, double t, const PhasePoint& y) const;

private:
    struct Shift {
        int m = 0;                   // η1 index shift
        std::complex<double> cplus;  // multiplies U(η1 − k)
        std::complex<double> cminus; // multiplies U(η1 + k)
    };
    struct Slice {
        double c0 = 0.0;
        std::vector<Shift> shifts;
    };
    struct Grid;
    Grid make_grid(double r, const PhasePoint& z, double t) const;
    // snaps: (time, weight) pairs at which ∫ P*_{t−v} S_k(v) dv is accumulated into acc[k]
    void run(double r, const PhasePoint& z, double t, bool gradient,
             const std::vector<std::pair<double, double>>& snaps, SweepOutput& out,
             std::vector<std::vector<std::complex<double>>>* acc) const;
    int slice_index(double v) const;
    void apply_drift(int slice, const std::complex<double>* u, std::complex<double>* out) const;

    const ModelSpec* model_;
    int n_;
    ParametrixOptions opt_;
    double sigma_ = 1.0;
    double dq_ = 0.5;  // η1 spacing
    bool trivial_ = true;
    std::vector<double> slice_times_;
    std::vector<Slice> slices_;
    std::vector<SpectralField> fields_;
};

// b^(n) ∂_{z1} u_k(r, z; t, y); caches the last gradient sweep.
double phi_term(const ParametrixSeries& series, int k, double r, const PhasePoint& z, double t, const PhasePoint& y);

struct SingularDensity {
    DensityField field;
    std::vector<double> term_sup;  // sup_y |u_k|
    double tail = 0.0;             // term_sup[K] / sup p
    double mass_fourier = 0.0;     // mass of the partial sum from the zero mode
};

// Σ_{k ≤ K} u_k(s, x; t, ·) on the grid. Throws NumericalError when a value drops below
// −negative_tol · peak. with_gradient also fills field.grad_x1 = ∂_{x1} of the partial sum.
SingularDensity singular_density(const ParametrixSeries& series, double s, const PhasePoint& x, double t,
                                 const ForwardGrid& grid, int K, bool with_gradient = false);

// sup-relative residual of the forward Duhamel form, one entry per K' = 0..K.
std::vector<double> forward_duhamel_residual(const ParametrixSeries& series, double s, const PhasePoint& x,
                                             double t, int gl_nodes = 24);

struct TermEnvelope {
    std::vector<double> sup_ratio;      // sup |φ_k| / p_{F,λ} at t − r = t − s, per k
    std::vector<double> weighted;       // sup over the battery of |φ_k| / (p_{F,λ} (t−r)^{(k−1)/2})
    double K_n = 0.0;                   // sup |φ_0| (t − r)^{1/2} / p_{F,λ}
    std::vector<double> ratio;          // sup_ratio[k+2] / sup_ratio[k]
    std::vector<double> bound;          // K_n² (t − s) / ((k + 1)/2)
};

// Battery: t − r ∈ {(t−s), (t−s)/2, (t−s)/4}, z1 ∈ z1_offsets (z2 = 0 by translation invariance in x2).
TermEnvelope term_envelopes(const ParametrixSeries& series, double s, double t, int K,
                            const std::vector<double>& z1_offsets = {-0.5, 0.0, 0.5});

struct HNormPoint {
    double r = 0.0;
    double ratio_term = 0.0;   // sup p / p_{F,2λ}
    double holder_term = 0.0;  // sup over pairs
    double h() const { return ratio_term + holder_term; }
};

// h-curve of p^(n)(0, x; r, ·) for r in r_grid, λ the reference parameter, pairs sampled from
// a fixed-seed battery of `pairs` forward-point pairs (distinct by construction).
std::vector<HNormPoint> h_norm_diagnostic(const ParametrixSeries& series, const PhasePoint& x, double eta_f,
                                          const std::vector<double>& r_grid, double lambda = 1.0,
                                          int pairs = 1000, int K = 6);

// σ = 1, F = (0, x1), β = −1/4, ν = 3/4, T = 1, velocity drift on four time slices with
// shells j ≤ J_max, k1 quantized to 1/2 and amplitude normalized so that sup|b^(64)| = 1.
ModelSpec standard_rough_model(std::uint64_t seed = 7, int J_max = 6);
// constant drift c on [0, T]
ModelSpec constant_drift_model(double c, double lambda = 1.0);

}  // namespace kpx
