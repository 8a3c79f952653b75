#include <doctest.h>

#include "kpx/envelope.hpp"
#include "kpx/frozen_proxy.hpp"

#include <random>

using namespace kpx;

namespace {

ModelSpec nonlinear_model() {
    ModelSpec m = make_model("kinetic_smooth");
    m.name = "nonlinear";
    m.F.F1 = [](double, const PhasePoint& x) { return Vec::Constant(1, 0.5 * std::cos(x.x2[0])); };
    m.F.F2 = [](double, const PhasePoint& x) { return Vec::Constant(1, x.x1[0] + 0.3 * std::sin(x.x1[0])); };
    m.F.gradF2 = [](double, const PhasePoint& x) { return Mat::Constant(1, 1, 1.0 + 0.3 * std::cos(x.x1[0])); };
    m.F.affine = false;
    return m;
}

}  // namespace

TEST_CASE("kinetic constant: resolvent, mean, covariance closed forms") {
    for (double lam : {1.0, 2.5}) {
        const ModelSpec m = make_model("kinetic_const", lam);
        const FrozenProxy P(m, 1.0, PhasePoint::d1(0.3, -0.4), 0.0, 1.0);
        for (double dt : {0.5, 0.1, 1e-3, 1.0}) {
            const double s = 1.0 - dt;
            const Mat R = P.resolvent(1.0, s);
            CHECK(std::abs(R(1, 0) - dt) < 1e-13);
            CHECK(R(0, 0) == 1.0);
            CHECK(R(0, 1) == 0.0);
            CHECK(R(1, 1) == 1.0);
            const Mat K = P.frozen_cov(1.0, s);
            CHECK(std::abs(K(0, 0) - lam * dt) < 1e-10);
            CHECK(std::abs(K(0, 1) - lam * dt * dt / 2) < 1e-10);
            CHECK(std::abs(K(1, 0) - lam * dt * dt / 2) < 1e-10);
            CHECK(std::abs(K(1, 1) - lam * dt * dt * dt / 3) < 1e-10);
            const PhasePoint mu = P.frozen_mean(1.0, s, PhasePoint::d1(0.7, 1.2));
            CHECK(std::abs(mu.x1[0] - 0.7) < 1e-13);
            CHECK(std::abs(mu.x2[0] - (1.2 + dt * 0.7)) < 1e-13);
        }
        CHECK((P.resolvent(0.4, 0.4) - Mat::Identity(2, 2)).norm() == 0.0);
    }
    const ModelSpec m = make_model("kinetic_const");
    const FrozenProxy P(m, 0.0, PhasePoint::d1(0, 0), 0.0, 1.0);
    const Mat K = P.frozen_cov(1e-4, 0.0);
    CHECK(K(0, 0) / 1e-4 == doctest::Approx(1.0));
    CHECK(K(1, 1) / 1e-4 < 1e-7);
}

TEST_CASE("frozen density values and mass") {
    const ModelSpec m = make_model("kinetic_const");
    const FrozenProxy P(m, 1.0, PhasePoint::d1(0, 0), 0.0, 1.0);
    const PhasePoint x = PhasePoint::d1(0.2, 0.1);
    const PhasePoint mu = P.frozen_mean(1.0, 0.0, x);
    CHECK(P.frozen_density(0.0, x, 1.0, mu) == doctest::Approx(std::sqrt(12.0) / (2 * kPi)).epsilon(1e-10));
    for (const std::string name : {"kinetic_const", "kinetic_smooth"}) {
        const ModelSpec mm = make_model(name);
        const FrozenProxy Q(mm, 0.5, PhasePoint::d1(0.4, 0.1), 0.0, 0.5);
        const FrozenMoments mo = Q.moments(0.5, 0.25);
        const PhasePoint c = mo.mean(x);
        const double s1 = std::sqrt(mo.K(0, 0)), s2 = std::sqrt(mo.K(1, 1));
        const double mass = trapezoid2(
            [&](double a, double b) { return mo.density(x, PhasePoint::d1(a, b)); }, c.x1[0] - 12 * s1,
            c.x1[0] + 12 * s1, c.x2[0] - 12 * s2, c.x2[0] + 12 * s2, 240, 240);
        CHECK(std::abs(mass - 1.0) < 1e-8);
    }
    CHECK_THROWS_AS(P.frozen_density(0.5, x, 0.5, x), DomainError);
}

TEST_CASE("nonlinear resolvent against independent quadrature") {
    const ModelSpec m = nonlinear_model();
    const PhasePoint xi = PhasePoint::d1(0.8, -0.3);
    const FrozenProxy P(m, 1.0, xi, 0.0, 1.0, 2048);
    const Mat R = P.resolvent(1.0, 0.2);
    const FlowPath ref = integrate_flow_path(m.F, 1.0, 0.0, xi, 8192);
    const double oracle = adaptive_gl([&](double r) { return 1.0 + 0.3 * std::cos(ref.at(r).x1[0]); }, 0.2, 1.0, 1e-13);
    CHECK(std::abs(R(1, 0) - oracle) < 1e-9);
}

TEST_CASE("variable sigma covariance converges under refinement") {
    const ModelSpec m = make_model("kinetic_smooth");
    const FrozenProxy P(m, 1.0, PhasePoint::d1(1.1, 0.0), 0.0, 1.0, 2048);
    const Mat K = P.moments(1.0, 0.0, 129).K;
    const Mat Kf = P.moments(1.0, 0.0, 1281).K;
    CHECK((K - Kf).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("mean consistency along the reference curve") {
    const ModelSpec m = nonlinear_model();
    const PhasePoint y = PhasePoint::d1(0.5, 0.2);
    const double t = 1.0;
    const FrozenProxy P(m, t, y, 0.0, t, 2048);
    for (double s : {0.0, 0.3, 0.9}) {
        // ϑ^{(t,y)}_{t,s}(x) − y = R(x − θ_{s,t}(y))
        const FrozenMoments mo = P.moments(t, s, 257);
        const PhasePoint x = PhasePoint::d1(-0.4, 0.9);
        const Vec lhs = mo.mean(x).stacked() - y.stacked();
        const Vec rhs = mo.R * (x - P.theta(s)).stacked();
        CHECK((lhs - rhs).norm() < 1e-8);
        CHECK((mo.mean(P.theta(s)) - y).stacked().norm() < 1e-8);
    }
    CHECK((P.frozen_mean(0.6, 0.6, y) - y).stacked().norm() == 0.0);
}

TEST_CASE("Chapman-Kolmogorov for the constant-coefficient proxy") {
    const ModelSpec m = make_model("kinetic_const");
    const FrozenProxy P(m, 1.0, PhasePoint::d1(0, 0), 0.0, 1.0);
    const FrozenMoments a = P.moments(0.6, 0.0), b = P.moments(1.0, 0.6), ab = P.moments(1.0, 0.0);
    const PhasePoint x = PhasePoint::d1(0.3, -0.2), y = PhasePoint::d1(0.1, 0.4);
    const PhasePoint c = a.mean(x);
    const double v = trapezoid2([&](double w1, double w2) {
        const PhasePoint w = PhasePoint::d1(w1, w2);
        return a.density(x, w) * b.density(w, y);
    }, c.x1[0] - 8, c.x1[0] + 8, c.x2[0] - 6, c.x2[0] + 6, 300, 300);
    CHECK(std::abs(v - ab.density(x, y)) < 1e-6);
}

TEST_CASE("scaling defect") {
    const ModelSpec m = make_model("kinetic_const");
    const FrozenProxy P(m, 1.0, PhasePoint::d1(0, 0), 0.0, 1.0);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    std::vector<PhasePoint> sample;
    for (int i = 0; i < 400; ++i) sample.push_back(PhasePoint::d1(n(rng), n(rng)));
    const auto big = scaling_defect(P, 1.0, 0.0, sample);
    std::vector<PhasePoint> small;
    const ScaleMatrix T(0.01);
    for (const auto& p : sample) small.push_back(T.apply(p));
    const auto sm = scaling_defect(P, 1.0, 0.99, small);
    // eigenvalues of [[1,1/2],[1/2,1/3]]: (4/3 ± √(13/9))/2
    const double lmax = (4.0 / 3 + std::sqrt(13.0 / 9)) / 2, lmin = (4.0 / 3 - std::sqrt(13.0 / 9)) / 2;
    CHECK(big.condition == doctest::Approx(lmax / lmin).epsilon(1e-9));
    CHECK(std::abs(big.kappa - sm.kappa) < 1e-6);
    CHECK(std::abs(big.condition - sm.condition) < 1e-6);
    CHECK(big.kappa <= 1.0 / lmin + 1e-9);

    const ModelSpec v = make_model("kinetic_smooth");
    const FrozenProxy Q(v, 1.0, PhasePoint::d1(0.5, 0), 0.0, 1.0);
    double lo = INFINITY, hi = 0;
    for (double dt : {1e-3, 1e-2, 0.1, 1.0}) {
        std::vector<PhasePoint> sc;
        for (const auto& p : sample) sc.push_back(ScaleMatrix(dt).apply(p));
        const auto k = scaling_defect(Q, 1.0, 1.0 - dt, sc);
        lo = std::min(lo, k.kappa);
        hi = std::max(hi, k.kappa);
    }
    CHECK(std::isfinite(hi));
    CHECK(hi / lo < 1.05);
}

TEST_CASE("generator gap") {
    const ModelSpec c = make_model("kinetic_const");
    const FrozenProxy P(c, 1.0, PhasePoint::d1(0.2, 0.1), 0.0, 1.0);
    CHECK(P.generator_gap_apply(0.5, PhasePoint::d1(1.0, -2.0), 1.0, PhasePoint::d1(0.2, 0.1)) == 0.0);

    const ModelSpec m = nonlinear_model();
    const double t = 1.0, v = 0.7;
    const PhasePoint y = PhasePoint::d1(0.3, 0.2);
    const FrozenProxy Q(m, t, y, 0.0, t, 2048);
    const FrozenMoments mo = Q.moments(t, v);
    const PhasePoint th = Q.theta(v);

    // on the freezing curve only the drift Taylor remainder survives, and it vanishes there too
    CHECK(std::abs(Q.generator_gap_apply(mo, th, y)) < 1e-12);

    const PhasePoint w = th + PhasePoint::d1(0.15, -0.02);
    auto f = [&](double a, double b) { return mo.density(PhasePoint::d1(a, b), y); };
    const double h1 = 1e-3, h2 = 1e-4;
    const double w1 = w.x1[0], w2 = w.x2[0];
    const double f1 = (f(w1 + h1, w2) - f(w1 - h1, w2)) / (2 * h1);
    const double f2 = (f(w1, w2 + h2) - f(w1, w2 - h2)) / (2 * h2);
    const double f11 = (f(w1 + h1, w2) - 2 * f(w1, w2) + f(w1 - h1, w2)) / (h1 * h1);
    const Vec Fw = m.F.eval(v, w), Fth = m.F.eval(v, th);
    const double G = m.F.gradF2(v, th)(0, 0);
    const double aw = m.diffusion(v, w)(0, 0), ath = m.diffusion(v, th)(0, 0);
    const double full = Fw[0] * f1 + Fw[1] * f2 + 0.5 * aw * f11;
    const double frozen = Fth[0] * f1 + (Fth[1] + G * (w1 - th.x1[0])) * f2 + 0.5 * ath * f11;
    const double gap = Q.generator_gap_apply(mo, w, y);
    CHECK(gap == doctest::Approx(full - frozen).epsilon(1e-6));
}

TEST_CASE("a-priori sandwich of the frozen density") {
    const ModelSpec m = make_model("kinetic_smooth");
    double Cmax = 0, Cmin = INFINITY;
    for (double dt : {0.05, 0.2, 1.0}) {
        const PhasePoint y = PhasePoint::d1(0.2, 0.0);
        const FrozenProxy P(m, 1.0, y, 0.0, 1.0);
        const FrozenMoments mo = P.moments(1.0, 1.0 - dt);
        std::vector<double> p, g;
        std::vector<PhasePoint> z;
        const ScaleMatrix T(dt);
        for (double a : linspace(-3, 3, 13))
            for (double b : linspace(-3, 3, 13)) {
                const PhasePoint x = P.theta(1.0 - dt) + T.apply(PhasePoint::d1(a, b));
                p.push_back(mo.density(x, y));
                g.push_back(std::sqrt(dt) * mo.grad_x1(x, y)[0]);
                z.push_back(mo.mean(x) - y);
            }
        const SandwichFit f = fit_sandwich(p, z, dt);
        const SandwichFit fg = fit_upper(g, z, dt);
        CHECK(std::isfinite(f.C));
        CHECK(std::isfinite(fg.C));
        Cmax = std::max(Cmax, f.C);
        Cmin = std::min(Cmin, f.C);
    }
    CHECK(Cmax / Cmin < 3.0);
}

TEST_CASE("sandwich self fit") {
    GaussKernelParams g{1.0, 1, KernelMode::degenerate};
    GaussKernelParams g2{1.7, 1, KernelMode::degenerate};
    std::vector<double> p, p2;
    std::vector<PhasePoint> z;
    const double dt = 0.3;
    const ScaleMatrix T(dt);
    for (double a : linspace(-3, 3, 11))
        for (double b : linspace(-3, 3, 11)) {
            z.push_back(T.apply(PhasePoint::d1(a, b)));
            p.push_back(gauss_deg(g, dt, z.back()));
            p2.push_back(gauss_deg(g2, dt, z.back()));
        }
    const SandwichFit f = fit_sandwich(p, z, dt);
    CHECK(f.C == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f.lambda == doctest::Approx(1.0).epsilon(0.01));
    const SandwichFit f2 = fit_sandwich(p2, z, dt);
    CHECK(f2.C_upper == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f2.lambda_upper == doctest::Approx(1.7).epsilon(0.01));
    CHECK(f2.lambda_lower == doctest::Approx(1.7).epsilon(0.01));
}
