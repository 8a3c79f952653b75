#pragma once

#include "kpx/besov.hpp"
#include "kpx/model.hpp"
#include "kpx/proxy_solver.hpp"

#include <complex>

namespace kpx {

// Terminal datum ℓ and a source g that is piecewise constant in time.
struct CauchyData {
    SpectralField ell;
    std::vector<double> g_times{0.0, 1.0};  // slice boundaries
    std::vector<SpectralField> g_slices{SpectralField{}};

    const SpectralField& g_at(double t) const;
    CauchyData scaled(double a_ell, double a_g) const;
    static CauchyData zero(double T = 1.0);
};

// ℓ = Σ_j Σ_w 2^{−j(2+β)} cos(k·x + φ), |k1|, |k2| ∈ [2^j, 2^{j+1}) for j = 0..J.
SpectralField synth_terminal(double beta, int J, std::uint64_t seed, int waves_per_shell = 2);
// g from the drift generator: velocity waves with amplitudes 2^{−jβ} on the given time slices.
CauchyData synth_source(double beta, int J, std::uint64_t seed, const std::vector<double>& slice_times,
                        int waves_per_shell = 2, double amplitude = 1.0);

struct CauchyOptions {
    int slices = 16;        // uniform intervals on [s0, t] (drift and source breaks are added)
    int modes = 1024;       // η1 modes per family (spacing = drift k1 quantum)
    double gamma = 1.5;     // Hölder index of the contraction norm
    double tol = 1e-5;      // stop when the weighted change is below tol · weighted norm
    int max_iter = 40;
    std::vector<double> rho_ladder{1.0, 4.0, 16.0, 64.0};
    int nodes_per_octave = 4;  // thermic-norm scale grid
    double prune = 1e-13;      // modes below prune · max are dropped from norms
    bool mollify_source = false;  // use g^(n) instead of g
};

// u(s, ·) at the nodes of a time ladder, stored as co-moving Fourier modes:
// u(s, x) = Re Σ_f Σ_m U_f[m] exp(i((η_m + (t − s) k2_f) x1 + k2_f x2)), η_m = off_f + q (m − M/2).
struct MildSolution {
    struct Family {
        double k2 = 0.0;
        double off = 0.0;
    };
    double t = 1.0;
    double q = 0.5;
    int modes = 0;
    double gamma = 1.5;
    std::vector<double> times;  // ascending, times.back() = t
    std::vector<Family> families;
    std::vector<std::vector<std::complex<double>>> U;  // per node: families × modes
    std::vector<double> trace;           // weighted change per iteration (at the selected ρ)
    std::vector<std::vector<double>> diffs;  // per iteration, per node ‖w_{i+1} − w_i‖_{C^γ}
    std::vector<std::pair<double, double>> contraction;  // (ρ, factor) over the ladder
    double rho = 0.0;       // smallest ladder ρ with factor < 1
    double factor = 0.0;    // contraction factor at rho
    double residual = 0.0;  // sup-relative C^γ residual of one more Picard step
    int iterations = 0;
    bool converged = false;

    int nodes() const { return static_cast<int>(times.size()); }
    double eval(int node, const PhasePoint& x) const;
    SpectralField field(int node, double prune = 1e-13) const;
    double holder_norm(int node, double gamma, int nodes_per_octave = 4) const;
    double sup_holder_norm(double gamma) const;  // L^∞ C^γ over the ladder
    void write_csv(const std::string& path) const;  // node, s, ‖u‖_{C^γ}, u(s, 0)
};

// Exact P_{s,t}φ for constant σ and F = (0, x1); waves keep their amplitude times the Gaussian
// factor and shear k1 → k1 + (t − s) k2.
SpectralField semigroup_apply(const ModelSpec& model, double s, double t, const SpectralField& phi);
// ∫ p_{F,σ}(s, x, t, y) φ(y) dy by trapezoid quadrature on the proxy solver's whitened grid.
double semigroup_apply(const ModelSpec& model, double s, double t, const std::function<double(const PhasePoint&)>& phi,
                       const PhasePoint& x, ProxyOptions opt = {}, int grid_n = 81);

// Picard iteration of w ↦ P_{·,t}ℓ − ∫ P_{·,r}(g − b^(n) ∂_{x1} w) dr on [s0, t] (n <= 0: b ≡ 0).
// Needs constant σ, F = (0, x1) and a velocity drift with quantized k1.
MildSolution picard_solve(const ModelSpec& model, int n, const CauchyData& data, double s0, double t,
                          CauchyOptions opt = {});

struct SchauderInstance {
    double ell_norm = 0.0;  // ‖ℓ‖_{C^γ}
    double g_norm = 0.0;    // sup_r ‖g(r)‖_{C^β}
    double horizon = 0.0;   // t − s
    double u_norm = 0.0;    // ‖u‖_{L^∞ C^γ}
};
SchauderInstance schauder_instance(const MildSolution& u, const CauchyData& data, double beta);

struct SchauderFit {
    double C = 0.0;
    double exponent = 0.0;  // (2 + β − γ)/2
};
// Smallest C with u ≤ C(‖ℓ‖ + h^{(2+β−γ)/2}‖g‖) over the battery.
SchauderFit schauder_fit(const std::vector<SchauderInstance>& battery, double beta, double gamma);

struct StabilityRow {
    int n = 0;
    int n_next = 0;
    double diff = 0.0;  // max over nodes of ‖u^(n) − u^(n_next)‖_{C^γ}
    double drop = 0.0;  // diff / previous diff (0 for the first row)
};
std::vector<StabilityRow> stability_check(const ModelSpec& model, const std::vector<int>& n_ladder,
                                          const CauchyData& data, double s0, double t, CauchyOptions opt = {});

}  // namespace kpx
