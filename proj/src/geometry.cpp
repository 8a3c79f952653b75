#include "kpx/geometry.hpp"

#include "kpx/quadrature.hpp"

#include <algorithm>

namespace kpx {

PhasePoint::PhasePoint(Vec a, Vec b) : x1(std::move(a)), x2(std::move(b)) {
    if (x1.size() != x2.size() || x1.size() < 1) throw DomainError("PhasePoint: blocks must share length d >= 1");
}

PhasePoint PhasePoint::d1(double a, double b) {
    Vec u(1), v(1);
    u[0] = a;
    v[0] = b;
    return PhasePoint(u, v);
}

PhasePoint PhasePoint::zero(int d) { return PhasePoint(Vec::Zero(d), Vec::Zero(d)); }

Vec PhasePoint::stacked() const {
    Vec v(2 * dim());
    v << x1, x2;
    return v;
}

PhasePoint PhasePoint::from_stacked(const Vec& v) {
    const int d = static_cast<int>(v.size() / 2);
    return PhasePoint(v.head(d), v.tail(d));
}

PhasePoint PhasePoint::operator+(const PhasePoint& o) const { return PhasePoint(x1 + o.x1, x2 + o.x2); }
PhasePoint PhasePoint::operator-(const PhasePoint& o) const { return PhasePoint(x1 - o.x1, x2 - o.x2); }
PhasePoint PhasePoint::operator*(double c) const { return PhasePoint(c * x1, c * x2); }

double dist_aniso(const PhasePoint& z) { return z.x1.norm() + std::cbrt(z.x2.norm()); }
double dist_aniso(double z1, double z2) { return std::abs(z1) + std::cbrt(std::abs(z2)); }

ScaleMatrix::ScaleMatrix(double u) : u_(u) {
    if (!(u > 0)) throw DomainError("ScaleMatrix: u must be positive");
}

PhasePoint ScaleMatrix::apply(const PhasePoint& z) const {
    return PhasePoint(std::sqrt(u_) * z.x1, u_ * std::sqrt(u_) * z.x2);
}

PhasePoint ScaleMatrix::apply_inverse(const PhasePoint& z) const {
    return PhasePoint(z.x1 / std::sqrt(u_), z.x2 / (u_ * std::sqrt(u_)));
}

Mat ScaleMatrix::matrix(int d) const {
    Mat m = Mat::Zero(2 * d, 2 * d);
    m.topLeftCorner(d, d).diagonal().setConstant(std::sqrt(u_));
    m.bottomRightCorner(d, d).diagonal().setConstant(u_ * std::sqrt(u_));
    return m;
}

Mat ScaleMatrix::inverse_matrix(int d) const {
    Mat m = Mat::Zero(2 * d, 2 * d);
    m.topLeftCorner(d, d).diagonal().setConstant(1.0 / std::sqrt(u_));
    m.bottomRightCorner(d, d).diagonal().setConstant(1.0 / (u_ * std::sqrt(u_)));
    return m;
}

namespace {

void check_params(double lambda, double u) {
    if (!(u > 0)) throw DomainError("gaussian kernel: u must be positive");
    if (!(lambda > 0)) throw DomainError("gaussian kernel: lambda must be positive");
}

struct Slot {
    int block;  // 0 -> x1, 1 -> x2
    int index;
};

std::vector<Slot> slots_of(const std::vector<int>& j1, const std::vector<int>& j2, int d) {
    if (static_cast<int>(j1.size()) > d || static_cast<int>(j2.size()) > d)
        throw DomainError("gauss_deg_derivative: multi-index longer than d");
    std::vector<Slot> s;
    for (size_t a = 0; a < j1.size(); ++a) {
        if (j1[a] < 0) throw DomainError("negative multi-index");
        for (int m = 0; m < j1[a]; ++m) s.push_back({0, static_cast<int>(a)});
    }
    for (size_t a = 0; a < j2.size(); ++a) {
        if (j2[a] < 0) throw DomainError("negative multi-index");
        for (int m = 0; m < j2[a]; ++m) s.push_back({1, static_cast<int>(a)});
    }
    return s;
}

double analytic(const GaussKernelParams& p, double u, const PhasePoint& z, int i, const std::vector<Slot>& s) {
    const double g = gauss_deg(p, u, z);
    const double a[2] = {1.0 / (p.lambda * u), 1.0 / (p.lambda * u * u * u)};
    const double k[2] = {1.0, 3.0};
    auto coord = [&](const Slot& sl) { return sl.block == 0 ? z.x1[sl.index] : z.x2[sl.index]; };
    double P = 1.0, dP = 0.0;
    if (s.size() == 1) {
        const double c = coord(s[0]);
        P = -a[s[0].block] * c;
        dP = k[s[0].block] * a[s[0].block] * c / u;
    } else if (s.size() == 2) {
        const double ab = a[s[0].block] * coord(s[0]);
        const double ab2 = a[s[1].block] * coord(s[1]);
        const bool same = s[0].block == s[1].block && s[0].index == s[1].index;
        P = ab * ab2 - (same ? a[s[0].block] : 0.0);
        dP = -(k[s[0].block] + k[s[1].block]) / u * ab * ab2 + (same ? k[s[0].block] * a[s[0].block] / u : 0.0);
    }
    if (i == 0) return P * g;
    const int d = p.d;
    const double L = -2.0 * d / u + 0.5 * a[0] * z.x1.squaredNorm() / u + 1.5 * a[1] * z.x2.squaredNorm() / u;
    return (dP + P * L) * g;
}

double derivative_rec(const GaussKernelParams& p, double u, const PhasePoint& z, int i, std::vector<Slot> s) {
    if (i <= 1 && s.size() <= 2) return analytic(p, u, z, i, s);
    if (s.size() > 2) {
        const Slot sl = s.front();
        s.erase(s.begin());
        const double scale = sl.block == 0 ? std::sqrt(u) : u * std::sqrt(u);
        const double h = scale * 1e-4;
        PhasePoint zp = z, zm = z;
        if (sl.block == 0) {
            zp.x1[sl.index] += h;
            zm.x1[sl.index] -= h;
        } else {
            zp.x2[sl.index] += h;
            zm.x2[sl.index] -= h;
        }
        return (derivative_rec(p, u, zp, i, s) - derivative_rec(p, u, zm, i, s)) / (2.0 * h);
    }
    const double h = u * 1e-4;
    return (derivative_rec(p, u + h, z, i - 1, s) - derivative_rec(p, u - h, z, i - 1, s)) / (2.0 * h);
}

}  // namespace

double gauss_deg(const GaussKernelParams& p, double u, const PhasePoint& z) {
    check_params(p.lambda, u);
    const int d = z.dim();
    const double q = z.x1.squaredNorm() / (p.lambda * u) + z.x2.squaredNorm() / (p.lambda * u * u * u);
    return std::pow(2.0 * kPi * p.lambda, -d) * std::pow(u, -2.0 * d) * std::exp(-0.5 * q);
}

double gauss_nondeg(const GaussKernelParams& p, double u, const Vec& z) {
    check_params(p.lambda, u);
    const double d = static_cast<double>(z.size());
    return std::pow(2.0 * kPi * p.lambda * u, -0.5 * d) * std::exp(-0.5 * z.squaredNorm() / (p.lambda * u));
}

double gauss_deg_derivative(const GaussKernelParams& p, double u, const PhasePoint& z, int time_order,
                            const std::vector<int>& j1, const std::vector<int>& j2) {
    check_params(p.lambda, u);
    if (time_order < 0) throw DomainError("negative time order");
    std::vector<Slot> s = slots_of(j1, j2, z.dim());
    if (time_order > 2 || s.size() > 4)
        throw UnsupportedOrder("gauss_deg_derivative: orders beyond i <= 2, |j| <= 4 are not provided");
    GaussKernelParams q = p;
    q.d = z.dim();
    return derivative_rec(q, u, z, time_order, s);
}

namespace {

// E[(|Y1| + |Y2|^{1/3})^δ] with Y1, Y2 independent standard normal in R^d, via the
// chi radial densities and the substitution r = 9 s^3 on [0, 1].
double standardized_moment(double delta, int d, int nodes) {
    const Rule r = gauss_legendre(nodes, 0.0, 1.0);
    const double lg = std::lgamma(0.5 * d);
    auto chi = [&](double rr) {
        if (rr <= 0) return d == 1 ? std::sqrt(2.0 / kPi) : 0.0;
        return std::exp((d - 1) * std::log(rr) - 0.5 * rr * rr - (0.5 * d - 1) * std::log(2.0) - lg);
    };
    double s = 0.0;
    for (int a = 0; a < nodes; ++a) {
        const double r1 = 9.0 * std::pow(r.x[a], 3), w1 = r.w[a] * 27.0 * r.x[a] * r.x[a] * chi(r1);
        for (int b = 0; b < nodes; ++b) {
            const double r2 = 9.0 * std::pow(r.x[b], 3), w2 = r.w[b] * 27.0 * r.x[b] * r.x[b] * chi(r2);
            const double dist = r1 + std::cbrt(r2);
            s += w1 * w2 * (delta == 0.0 ? 1.0 : std::pow(dist, delta));
        }
    }
    return s;
}

}  // namespace

double kernel_moment(double delta, double v, int d) {
    if (!(v > 0)) throw DomainError("kernel_moment: v must be positive");
    if (delta < 0) throw DomainError("kernel_moment: delta must be >= 0");
    // physical coordinates x = T_v y turn |x|_d into v^{1/2}|y|_d node by node
    const double a = standardized_moment(delta, d, 96);
    const double b = standardized_moment(delta, d, 192);
    if (std::abs(a - b) > 1e-8 * std::max(1.0, std::abs(b)))
        throw NumericalError("kernel_moment: quadrature did not converge");
    return std::pow(std::sqrt(v), delta) * b;
}

MomentCheck moment_check(double delta, double v, int d) {
    if (!(delta > 0)) throw DomainError("moment_check: delta must be positive");
    MomentCheck m;
    m.measured = kernel_moment(delta, v, d);
    m.envelope = kernel_moment(delta, 1.0, d) * std::pow(v, 0.5 * delta);
    return m;
}

DerivativeBoundFit fit_derivative_bound(double lambda, double delta, int time_order, const std::vector<int>& j1,
                                        const std::vector<int>& j2, const std::vector<double>& v_grid,
                                        int points_per_axis) {
    GaussKernelParams p{lambda, 1, KernelMode::degenerate};
    int a1 = 0, a2 = 0;
    for (int x : j1) a1 += x;
    for (int x : j2) a2 += x;
    const double order = time_order + 0.5 * a1 + 1.5 * a2;
    const std::vector<double> ys = linspace(-5.0, 5.0, points_per_axis);
    DerivativeBoundFit best{INFINITY, 1.0};
    for (double kappa : linspace(1.0, 6.0, 51)) {
        GaussKernelParams pk = p;
        pk.lambda = kappa * lambda;
        double C = 0.0;
        for (double v : v_grid) {
            for (double y1 : ys)
                for (double y2 : ys) {
                    const PhasePoint z = PhasePoint::d1(std::sqrt(lambda * v) * y1, std::sqrt(lambda) * v * std::sqrt(v) * y2);
                    const double lhs = std::pow(dist_aniso(z), delta) *
                                       std::abs(gauss_deg_derivative(p, v, z, time_order, j1, j2));
                    const double rhs = std::pow(v, 0.5 * delta - order) * gauss_deg(pk, v, z);
                    C = std::max(C, lhs / rhs);
                }
        }
        if (C < best.C) best = {C, kappa};
    }
    return best;
}

}  // namespace kpx
