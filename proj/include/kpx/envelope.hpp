#pragma once

#include "kpx/geometry.hpp"

namespace kpx {

// Two-sided Gaussian sandwich C^{-1} g^d_{1/λ}(Δ, z) <= p <= C g^d_λ(Δ, z).
struct SandwichFit {
    double C = INFINITY;
    double lambda = 1.0;
    // one-sided optima: p <= C_upper g_{λ_upper},  g_{λ_lower} <= C_lower p
    double C_upper = INFINITY;
    double lambda_upper = 1.0;
    double C_lower = INFINITY;
    double lambda_lower = 1.0;
};

// z are displacements (θ̃ − y or ϑ − y) and p the density values at those points.
SandwichFit fit_sandwich(const std::vector<double>& p, const std::vector<PhasePoint>& z, double dt);

// Upper envelope only: |q| <= C scale g_λ(Δ, z); returns the λ minimizing C.
SandwichFit fit_upper(const std::vector<double>& q, const std::vector<PhasePoint>& z, double dt,
                      double scale = 1.0);

}  // namespace kpx
