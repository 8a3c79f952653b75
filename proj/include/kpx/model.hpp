#pragma once

#include "kpx/flows.hpp"

#include <memory>
#include <string>

namespace kpx {

struct DriftSpec;

using SigmaFn = std::function<Mat(double, const PhasePoint&)>;

// Coefficients of dX1 = (F1 + b) dt + σ dW, dX2 = F2 dt.
struct ModelSpec {
    std::string name;
    int d = 1;
    double T = 1.0;
    double beta = -0.25;
    double nu = 0.75;
    VectorFieldSpec F;
    SigmaFn sigma;
    bool sigma_constant = false;
    // σ depends on x1 only (and not on t); lets solvers tabulate it
    bool sigma_x1_only = false;
    // d = 1 scalar σ(t, x1, x2); set for registry models, used by the fast paths
    std::function<double(double, double, double)> sigma1;
    // F = (0, x1) exactly
    bool kinetic_base = false;
    double sigma_holder = 1.0;  // Hölder exponent of σ in x1, used to pick time substitutions
    KernelMode mode = KernelMode::degenerate;
    double hormander_lo = 0.5;
    double hormander_hi = 2.0;
    std::shared_ptr<const DriftSpec> drift;  // null means b ≡ 0

    Mat diffusion(double t, const PhasePoint& x) const;  // a = σσ*
    double sigma_scalar(double t, const PhasePoint& x) const { return sigma(t, x)(0, 0); }
    // β ∈ (−1/2, 0), ν ∈ (−2β, 1), σ elliptic at the origin, Hörmander bounds at the origin
    void validate() const;
    bool constant_coefficients() const { return sigma_constant && F.affine; }
};

// kinetic_const (σ = √λ), kinetic_smooth (σ = 2 + sin(x1)/2),
// rough_sigma (σ = 1.5 + sgn(sin x1)|sin x1|^{1/2}/2); all with F = (0, x1).
ModelSpec make_model(const std::string& name, double lambda = 1.0);
std::vector<std::string> model_names();

}  // namespace kpx
