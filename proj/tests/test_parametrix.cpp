#include "doctest.h"

#include "kpx/parametrix.hpp"
#include "kpx/proxy_solver.hpp"

using namespace kpx;

namespace {

double kinetic_gauss(double sig, double dt, const PhasePoint& x, const PhasePoint& y, double* grad = nullptr) {
    Mat2 K;
    K << dt, dt * dt / 2, dt * dt / 2, dt * dt * dt / 3;
    K *= sig * sig;
    const Vec2 e(y.x1[0] - x.x1[0], y.x2[0] - x.x2[0] - dt * x.x1[0]);
    const Mat2 P = K.inverse();
    const double p = std::exp(-0.5 * e.dot(P * e)) / (2 * kPi * std::sqrt(K.determinant()));
    if (grad) {
        Mat2 R;
        R << 1, 0, dt, 1;
        *grad = (R.transpose() * P * e)[0] * p;
    }
    return p;
}

ParametrixOptions small() {
    ParametrixOptions o;
    o.n1 = 256;
    o.n2 = 128;
    o.steps = 64;
    return o;
}

ForwardGrid kinetic_grid(double sig, double dt, const PhasePoint& mean, int n = 81) {
    Mat2 K;
    K << dt, dt * dt / 2, dt * dt / 2, dt * dt * dt / 3;
    K *= sig * sig;
    ForwardGrid g;
    g.center = mean;
    g.L = K.llt().matrixL();
    g.n = n;
    g.half_width = 7.0;
    return g;
}

}  // namespace

TEST_CASE("parametrix: zero drift reproduces the proxy") {
    const ModelSpec m = make_model("kinetic_const", 1.0);
    ParametrixSeries ps(m, 8, small());
    CHECK(ps.trivial());
    const PhasePoint x = PhasePoint::d1(0.4, -0.3);
    const double dt = 0.7;
    const ForwardGrid g = kinetic_grid(1.0, dt, PhasePoint::d1(0.4, -0.3 + dt * 0.4), 31);
    const SingularDensity sd = singular_density(ps, 0.0, x, dt, g, 6);
    ProxySolver proxy(m, 0.0, x, dt);
    proxy.solve();
    std::vector<double> exact;
    for (int i1 = 0; i1 < g.n; ++i1)
        for (int i2 = 0; i2 < g.n; ++i2) exact.push_back(proxy.density(dt, g.point(i1, i2)));
    CHECK(sup_relative(sd.field.values, exact) < 1e-5);
    CHECK(phi_term(ps, 2, 0.1, x, 0.8, x) == 0.0);
    for (double r : forward_duhamel_residual(ps, 0.0, x, dt)) CHECK(r == 0.0);
}

TEST_CASE("parametrix: constant drift gives the shifted Gaussian") {
    const double c = 0.6, dt = 1.0;
    const ModelSpec m = constant_drift_model(c);
    ParametrixSeries ps(m, 4, small());
    const PhasePoint x = PhasePoint::d1(-0.2, 0.5);
    const PhasePoint mean = PhasePoint::d1(-0.2 + c * dt, 0.5 - 0.2 * dt + c * dt * dt / 2);
    const ForwardGrid g = kinetic_grid(1.0, dt, mean, 41);
    const SingularDensity sd = singular_density(ps, 0.0, x, dt, g, 6);
    std::vector<double> exact;
    for (int i1 = 0; i1 < g.n; ++i1)
        for (int i2 = 0; i2 < g.n; ++i2) {
            const PhasePoint y = g.point(i1, i2);
            exact.push_back(kinetic_gauss(1.0, dt, x, PhasePoint::d1(y.x1[0] - c * dt, y.x2[0] - c * dt * dt / 2)));
        }
    CHECK(sup_relative(sd.field.values, exact) < 1e-3);
    CHECK(std::abs(sd.field.mass() - 1.0) < 1e-6);
    CHECK(std::abs(sd.mass_fourier - 1.0) < 1e-12);

    SUBCASE("phi_0 is c times the exact gradient on the sweep nodes") {
        const double r = 0.2, t = 0.9;
        const PhasePoint z = PhasePoint::d1(0.1, 0.3);
        const SweepOutput sw = ps.sweep(r, z, t, true);
        double err = 0.0, top = 0.0;
        for (int i1 = 0; i1 < sw.n1; i1 += 3)
            for (int i2 = 0; i2 < sw.n2; i2 += 3) {
                const PhasePoint y = sw.node(i1, i2);
                double grad = 0.0;
                kinetic_gauss(1.0, t - r, z, y, &grad);
                err = std::max(err, std::abs(phi_term(ps, 0, r, z, t, y) - c * grad));
                top = std::max(top, std::abs(c * grad));
            }
        CHECK(err / top < 1e-8);
    }
    SUBCASE("forward Duhamel residual falls with K") {
        const std::vector<double> res = forward_duhamel_residual(ps, 0.0, x, dt);
        for (size_t k = 1; k < res.size(); ++k) CHECK(res[k] < res[k - 1]);
        CHECK(res.back() < 1e-3);
    }
}

TEST_CASE("parametrix: rough drift keeps mass and positivity") {
    const ModelSpec m = standard_rough_model(11, 3);
    for (int n : {4, 16}) {
        ParametrixSeries ps(m, n, small());
        const ForwardGrid g = kinetic_grid(1.0, 1.0, PhasePoint::d1(0.0, 0.0), 81);
        const SingularDensity sd = singular_density(ps, 0.0, PhasePoint::d1(0.0, 0.0), 1.0, g, 6);
        CHECK(std::abs(sd.field.mass() - 1.0) < 2e-3);
        CHECK(sd.field.min_value() > -1e-6);
        CHECK(sd.tail < 1e-4);
        const std::vector<double> res = forward_duhamel_residual(ps, 0.0, PhasePoint::d1(0.0, 0.0), 1.0);
        CHECK(res.back() < 5e-3);
        CHECK(res[3] < res[0]);
    }
}

TEST_CASE("parametrix: envelope of phi terms on a small model") {
    const ModelSpec m = standard_rough_model(11, 3);
    ParametrixSeries ps(m, 8, small());
    const TermEnvelope e = term_envelopes(ps, 0.0, 1.0, 4, {0.0, 0.5});
    CHECK(e.K_n > 0.0);
    REQUIRE(e.ratio.size() == 3);
    for (size_t k = 0; k < e.ratio.size(); ++k) CHECK(e.ratio[k] <= 2.0 * e.bound[k]);
    CHECK(e.sup_ratio[1] <= e.K_n * e.K_n);
}

TEST_CASE("parametrix: h-norm curve for zero drift") {
    const ModelSpec m = make_model("kinetic_const", 1.0);
    ParametrixSeries ps(m, 4, small());
    const auto curve = h_norm_diagnostic(ps, PhasePoint::d1(0.0, 0.0), 0.4, {0.25, 0.5, 1.0}, 1.0, 200, 0);
    REQUIRE(curve.size() == 3);
    // p_{F,1} / p_{F,2} peaks at 2 (the determinant ratio)
    for (const HNormPoint& h : curve) {
        CHECK(h.ratio_term == doctest::Approx(2.0).epsilon(1e-3));
        CHECK(h.holder_term > 0.0);
        CHECK(h.holder_term < 10.0);
    }
}

TEST_CASE("parametrix: argument checks") {
    const ModelSpec smooth = make_model("kinetic_smooth");
    CHECK_THROWS_AS(ParametrixSeries(smooth, 4), ConfigError);
    ModelSpec m = make_model("kinetic_const", 1.0);
    m.drift = std::make_shared<const DriftSpec>(sample_drift(-0.25, 2, 3, {0.0, 1.0}));
    CHECK_THROWS_AS(ParametrixSeries(m, 4), ConfigError);  // k1 not on the lattice
    const ModelSpec r = standard_rough_model(11, 3);
    CHECK_THROWS_AS(ParametrixSeries(r, 0), DomainError);
    ParametrixSeries ps(r, 4, small());
    CHECK_THROWS_AS(ps.sweep(0.5, PhasePoint::d1(0, 0), 0.5, false), DomainError);
    CHECK_THROWS_AS(phi_term(ps, 7, 0.0, PhasePoint::d1(0, 0), 1.0, PhasePoint::d1(0, 0)), DomainError);
    CHECK_THROWS_AS(h_norm_diagnostic(ps, PhasePoint::d1(0, 0), 1.5, {0.5}), DomainError);
}
