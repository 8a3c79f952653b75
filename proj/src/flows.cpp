#include "kpx/flows.hpp"

#include <algorithm>

namespace kpx {

Vec VectorFieldSpec::eval(double t, const PhasePoint& x) const {
    Vec v(2 * d);
    v << F1(t, x), F2(t, x);
    return v;
}

void VectorFieldSpec::check_hormander(double t, const PhasePoint& x, double lo, double hi) const {
    const Mat g = gradF2(t, x);
    const Mat sym = 0.5 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    const double mn = es.eigenvalues().minCoeff(), mx = es.eigenvalues().maxCoeff();
    if (mn < lo || mx > hi)
        throw ConfigError("grad_{x1} F2 eigenvalues [" + std::to_string(mn) + ", " + std::to_string(mx) +
                          "] leave the configured interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

VectorFieldSpec VectorFieldSpec::kinetic(int d) {
    VectorFieldSpec F;
    F.d = d;
    F.F1 = [d](double, const PhasePoint&) { return Vec::Zero(d).eval(); };
    F.F2 = [](double, const PhasePoint& x) { return x.x1; };
    F.gradF2 = [d](double, const PhasePoint&) { return Mat::Identity(d, d).eval(); };
    F.affine = true;
    return F;
}

VectorFieldSpec VectorFieldSpec::zero(int d) {
    VectorFieldSpec F;
    F.d = d;
    F.F1 = [d](double, const PhasePoint&) { return Vec::Zero(d).eval(); };
    F.F2 = [d](double, const PhasePoint&) { return Vec::Zero(d).eval(); };
    F.gradF2 = [d](double, const PhasePoint&) { return Mat::Zero(d, d).eval(); };
    F.affine = true;
    return F;
}

double bump_density_1d(double x) {
    static const double Z = [] {
        const Rule r = gauss_legendre(400, -1.0, 1.0);
        double s = 0.0;
        for (int i = 0; i < r.size(); ++i) s += r.w[i] * std::exp(-1.0 / (1.0 - r.x[i] * r.x[i]));
        return s;
    }();
    if (std::abs(x) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - x * x)) / Z;
}

const Rule& bump_rule() {
    static const Rule rule = [] {
        Rule r = gauss_legendre(32, -1.0, 1.0);
        double s = 0.0;
        for (int i = 0; i < r.size(); ++i) {
            r.w[i] *= bump_density_1d(r.x[i]);
            s += r.w[i];
        }
        for (auto& w : r.w) w /= s;
        return r;
    }();
    return rule;
}

namespace {

// ∫ f(x - ε_blockwise y) ρ(y) dy by tensor quadrature over all 2d coordinates.
template <class Out, class Fn>
Out convolve(const Fn& f, double t, const PhasePoint& x, double eps1, double eps2, Out zero) {
    const Rule& r = bump_rule();
    const int d = x.dim();
    const int m = r.size();
    const int dims = 2 * d;
    std::vector<int> idx(dims, 0);
    Out acc = zero;
    PhasePoint y = x;
    while (true) {
        double w = 1.0;
        for (int k = 0; k < dims; ++k) {
            w *= r.w[idx[k]];
            if (k < d)
                y.x1[k] = x.x1[k] - eps1 * r.x[idx[k]];
            else
                y.x2[k - d] = x.x2[k - d] - eps2 * r.x[idx[k]];
        }
        acc += w * f(t, y);
        int k = 0;
        while (k < dims && ++idx[k] == m) idx[k++] = 0;
        if (k == dims) break;
    }
    return acc;
}

}  // namespace

VectorFieldSpec mollify_field(const VectorFieldSpec& F, double eps1, double eps2) {
    if (!(eps1 > 0) || !(eps2 > 0)) throw DomainError("mollify_field: scales must be positive");
    if (F.affine) return F;  // symmetric unit-mass bump reproduces affine fields exactly
    VectorFieldSpec G = F;
    const int d = F.d;
    auto F1 = F.F1, F2 = F.F2;
    auto J = F.gradF2;
    G.F1 = [F1, eps1, eps2, d](double t, const PhasePoint& x) {
        return convolve<Vec>(F1, t, x, eps1, eps2, Vec::Zero(d));
    };
    G.F2 = [F2, eps1, eps2, d](double t, const PhasePoint& x) {
        return convolve<Vec>(F2, t, x, eps1, eps2, Vec::Zero(d));
    };
    G.gradF2 = [J, eps1, eps2, d](double t, const PhasePoint& x) {
        return convolve<Mat>(J, t, x, eps1, eps2, Mat::Zero(d, d));
    };
    return G;
}

namespace {

PhasePoint add_scaled(const PhasePoint& x, const Vec& k, double h) {
    const int d = x.dim();
    return PhasePoint(x.x1 + h * k.head(d), x.x2 + h * k.tail(d));
}

PhasePoint rk4_run(const VectorFieldSpec& F, double s, double t, const PhasePoint& x, int steps,
                   FlowPath* path) {
    const double h = (t - s) / steps;
    PhasePoint y = x;
    double tau = s;
    if (path) {
        path->times.assign(1, s);
        path->states.assign(1, x);
        path->slopes.assign(1, F.eval(s, x));
    }
    for (int i = 0; i < steps; ++i) {
        const Vec k1 = (path && i > 0) ? path->slopes.back() : F.eval(tau, y);
        const Vec k2 = F.eval(tau + 0.5 * h, add_scaled(y, k1, 0.5 * h));
        const Vec k3 = F.eval(tau + 0.5 * h, add_scaled(y, k2, 0.5 * h));
        const Vec k4 = F.eval(tau + h, add_scaled(y, k3, h));
        y = add_scaled(y, k1 + 2.0 * k2 + 2.0 * k3 + k4, h / 6.0);
        tau = s + (i + 1) * h;
        if (!y.x1.allFinite() || !y.x2.allFinite())
            throw NumericalError("integrate_flow: non-finite state at t = " + std::to_string(tau) +
                                 " (step " + std::to_string(h) + ")");
        if (path) {
            path->times.push_back(tau);
            path->states.push_back(y);
            path->slopes.push_back(F.eval(tau, y));
        }
    }
    return y;
}

}  // namespace

FlowPath integrate_flow_path(const VectorFieldSpec& F, double s, double t, const PhasePoint& x, int steps) {
    if (steps < 2) throw DomainError("integrate_flow: need at least 2 steps");
    FlowPath p;
    p.s = s;
    p.t_end = t;
    p.step = (t - s) / steps;
    if (t == s) {
        p.times = {s};
        p.states = {x};
        p.slopes = {F.eval(s, x)};
        return p;
    }
    rk4_run(F, s, t, x, steps, &p);
    const PhasePoint coarse = rk4_run(F, s, t, x, steps / 2, nullptr);
    p.error_estimate = (p.end() - coarse).stacked().norm() / 15.0;
    return p;
}

PhasePoint integrate_flow(const VectorFieldSpec& F, double t, double s, const PhasePoint& x, int steps) {
    if (t == s) return x;
    return rk4_run(F, s, t, x, steps, nullptr);
}

PhasePoint FlowPath::at(double t) const {
    const int n = static_cast<int>(times.size());
    if (n == 1) return states[0];
    const double h = step;
    double u = (t - s) / h;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, n - 2);
    const double th = u - i;
    const double h00 = 2 * th * th * th - 3 * th * th + 1, h10 = th * th * th - 2 * th * th + th;
    const double h01 = -2 * th * th * th + 3 * th * th, h11 = th * th * th - th * th;
    const Vec y = h00 * states[i].stacked() + h10 * h * slopes[i] + h01 * states[i + 1].stacked() +
                  h11 * h * slopes[i + 1];
    return PhasePoint::from_stacked(y);
}

PhasePoint mollified_flow(const VectorFieldSpec& F, double t, double s, const PhasePoint& x) {
    if (t == s) return x;
    const double eps2 = std::pow(std::abs(t - s), 1.5);
    return integrate_flow(mollify_field(F, 1.0, eps2), t, s, x);
}

double flow_equivalence_defect(const VectorFieldSpec& F, double s, double v, double t, const PhasePoint& x,
                               const PhasePoint& y) {
    if (!(s <= v && v < t)) throw DomainError("flow_equivalence_defect: need s <= v < t");
    const ScaleMatrix T(t - s);
    const PhasePoint back = integrate_flow(F, v, t, y);  // θ_{v,t}(y)
    const PhasePoint fwd = integrate_flow(F, t, v, x);   // θ_{t,v}(x)
    const double A = T.apply_inverse(x - back).stacked().norm();
    const double B = T.apply_inverse(fwd - y).stacked().norm();
    double kappa = 1.0;
    if (A > 1.0) kappa = std::max(kappa, B > 0 ? (A - 1.0) / B : INFINITY);
    kappa = std::max(kappa, B / (A + 1.0));
    return kappa;
}

}  // namespace kpx
