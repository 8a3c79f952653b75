#include "kpx/envelope.hpp"

#include <algorithm>

namespace kpx {

namespace {

// log g^d_λ(Δ, z) = -d log(2πλ) - 2d log Δ - (q/2)/λ, q = |z1|²/Δ + |z2|²/Δ³
struct LogGauss {
    double base;  // -2d log Δ - d log 2π
    int d;
};

double log_ratio_max(const std::vector<double>& lp, const std::vector<double>& q, const LogGauss& g, double lam,
                     bool upper) {
    double best = -INFINITY;
    const double lg = -g.d * std::log(lam) + g.base;
    for (size_t i = 0; i < lp.size(); ++i) {
        const double lgi = lg - 0.5 * q[i] / lam;
        best = std::max(best, upper ? lp[i] - lgi : lgi - lp[i]);
    }
    return best;
}

template <class Fn>
double golden_min(Fn f, double a, double b, double* argmin) {
    // coarse scan on log scale, then golden refinement around the best cell
    const int n = 200;
    double best = INFINITY;
    int bi = 0;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = a + (b - a) * i / (n - 1);
        const double v = f(xs[i]);
        if (v < best) {
            best = v;
            bi = i;
        }
    }
    double lo = xs[std::max(0, bi - 1)], hi = xs[std::min(n - 1, bi + 1)];
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = f(d);
        }
    }
    const double x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (fx <= best) {
        *argmin = x;
        return fx;
    }
    *argmin = xs[bi];
    return best;
}

void prepare(const std::vector<double>& p, const std::vector<PhasePoint>& z, double dt, std::vector<double>& lp,
             std::vector<double>& q, LogGauss& g) {
    if (p.size() != z.size() || p.empty()) throw ConfigError("fit_sandwich: size mismatch or empty sample");
    if (!(dt > 0)) throw DomainError("fit_sandwich: dt must be positive");
    const int d = z[0].dim();
    g = {-2.0 * d * std::log(dt) - d * std::log(2.0 * kPi), d};
    lp.resize(p.size());
    q.resize(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        lp[i] = std::log(std::abs(p[i]));
        q[i] = z[i].x1.squaredNorm() / dt + z[i].x2.squaredNorm() / (dt * dt * dt);
    }
}

}  // namespace

SandwichFit fit_sandwich(const std::vector<double>& p, const std::vector<PhasePoint>& z, double dt) {
    for (double v : p)
        if (!(v > 0)) throw DomainError("fit_sandwich: density values must be positive");
    std::vector<double> lp, q;
    LogGauss g;
    prepare(p, z, dt, lp, q, g);
    SandwichFit f;
    double a;
    f.C_upper = std::exp(golden_min([&](double L) { return log_ratio_max(lp, q, g, std::exp(L), true); },
                                    std::log(0.02), std::log(50.0), &a));
    f.lambda_upper = std::exp(a);
    f.C_lower = std::exp(golden_min([&](double L) { return log_ratio_max(lp, q, g, std::exp(L), false); },
                                    std::log(0.02), std::log(50.0), &a));
    f.lambda_lower = std::exp(a);
    // single λ >= 1 for both sides
    auto joint = [&](double L) {
        const double lam = std::exp(L);
        return std::max(log_ratio_max(lp, q, g, lam, true), log_ratio_max(lp, q, g, 1.0 / lam, false));
    };
    f.C = std::exp(golden_min(joint, 0.0, std::log(200.0), &a));
    f.lambda = std::exp(a);
    return f;
}

SandwichFit fit_upper(const std::vector<double>& qv, const std::vector<PhasePoint>& z, double dt, double scale) {
    std::vector<double> lp, q;
    LogGauss g;
    std::vector<double> scaled(qv.size());
    for (size_t i = 0; i < qv.size(); ++i) scaled[i] = std::max(std::abs(qv[i]) / scale, 1e-300);
    prepare(scaled, z, dt, lp, q, g);
    SandwichFit f;
    double a;
    f.C_upper = std::exp(golden_min([&](double L) { return log_ratio_max(lp, q, g, std::exp(L), true); },
                                    std::log(0.02), std::log(50.0), &a));
    f.lambda_upper = std::exp(a);
    f.C = f.C_upper;
    f.lambda = f.lambda_upper;
    return f;
}

}  // namespace kpx
