#include <doctest.h>

#include "kpx/geometry.hpp"
#include "kpx/quadrature.hpp"

#include <random>

using namespace kpx;

TEST_CASE("dist_aniso examples") {
    CHECK(dist_aniso(PhasePoint::d1(4, 8)) == doctest::Approx(6.0));
    CHECK(dist_aniso(PhasePoint::d1(0, 0)) == 0.0);
    CHECK(dist_aniso(PhasePoint::d1(3, 0.001)) == doctest::Approx(3.1).epsilon(1e-12));
}

TEST_CASE("dist_aniso quasi-triangle on random battery") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 3.0);
    double K = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const PhasePoint a = PhasePoint::d1(n(rng), n(rng)), b = PhasePoint::d1(n(rng), n(rng));
        K = std::max(K, dist_aniso(a + b) / (dist_aniso(a) + dist_aniso(b)));
    }
    CHECK(K <= 1.0 + 1e-12);
}

TEST_CASE("PhasePoint rejects mismatched blocks") {
    CHECK_THROWS_AS(PhasePoint(Vec::Zero(2), Vec::Zero(1)), DomainError);
}

TEST_CASE("ScaleMatrix round trip") {
    const ScaleMatrix T(0.37);
    const PhasePoint z = PhasePoint::d1(1.3, -2.7);
    const PhasePoint back = T.apply_inverse(T.apply(z));
    CHECK(std::abs(back.x1[0] - 1.3) < 1e-15);
    CHECK(std::abs(back.x2[0] + 2.7) < 1e-15);
    CHECK_THROWS_AS(ScaleMatrix(0.0), DomainError);
}

TEST_CASE("gauss kernels: point values") {
    GaussKernelParams p{1.0, 1, KernelMode::degenerate};
    CHECK(gauss_deg(p, 1.0, PhasePoint::d1(0, 0)) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-14));
    // normalized kernel, see README
    CHECK(gauss_deg(p, 1.0, PhasePoint::d1(1, 1)) == doctest::Approx(std::exp(-1.0) / (2 * kPi)).epsilon(1e-14));
    CHECK(gauss_nondeg(p, 1.0, Vec::Zero(1)) == doctest::Approx(0.398942280401).epsilon(1e-10));
    CHECK(gauss_nondeg(p, 1.0, Vec::Zero(2)) == doctest::Approx(1.0 / (2 * kPi)).epsilon(1e-14));
    CHECK_THROWS_AS(gauss_deg(p, 0.0, PhasePoint::d1(0, 0)), DomainError);
    p.lambda = -1;
    CHECK_THROWS_AS(gauss_deg(p, 1.0, PhasePoint::d1(0, 0)), DomainError);
}

TEST_CASE("gauss kernels: unit mass") {
    for (double u : {0.01, 0.1, 1.0}) {
        for (double lam : {0.5, 2.0}) {
            GaussKernelParams p{lam, 1, KernelMode::degenerate};
            const double s1 = std::sqrt(lam * u), s2 = std::sqrt(lam * u * u * u);
            const double m = trapezoid2([&](double a, double b) { return gauss_deg(p, u, PhasePoint::d1(a, b)); },
                                        -12 * s1, 12 * s1, -12 * s2, 12 * s2, 200, 200);
            CHECK(std::abs(m - 1.0) < 1e-8);
            Vec z(1);
            const double m1 = trapezoid([&](double a) { z[0] = a; return gauss_nondeg(p, u, z); }, -12 * s1, 12 * s1, 200);
            CHECK(std::abs(m1 - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("gauss_deg scaling identity") {
    GaussKernelParams p{1.7, 1, KernelMode::degenerate};
    const PhasePoint z = PhasePoint::d1(0.3, -0.05);
    for (double u : {0.01, 0.3, 2.0}) {
        const double lhs = gauss_deg(p, u, z);
        const double rhs = std::pow(u, -2.0) * gauss_deg(p, 1.0, ScaleMatrix(u).apply_inverse(z));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("g^e semigroup") {
    GaussKernelParams p{1.0, 1, KernelMode::nondegenerate};
    Vec a(1), b(1);
    for (double x : {0.0, 0.7, -1.9}) {
        const double conv = trapezoid([&](double y) {
            a[0] = x - y;
            b[0] = y;
            return gauss_nondeg(p, 0.3, a) * gauss_nondeg(p, 0.5, b);
        }, -10, 10, 400);
        a[0] = x;
        CHECK(std::abs(conv - gauss_nondeg(p, 0.8, a)) < 1e-6);
    }
}

TEST_CASE("gauss_deg_derivative") {
    GaussKernelParams p{1.0, 1, KernelMode::degenerate};
    const PhasePoint c = PhasePoint::d1(0, 0);
    CHECK(gauss_deg_derivative(p, 1.0, c, 0, {}, {}) == doctest::Approx(gauss_deg(p, 1.0, c)));
    CHECK(std::abs(gauss_deg_derivative(p, 1.0, c, 0, {1}, {0})) < 1e-15);
    CHECK(gauss_deg_derivative(p, 1.0, c, 1, {}, {}) == doctest::Approx(-2.0 / (2 * kPi)).epsilon(1e-12));
    CHECK_THROWS_AS(gauss_deg_derivative(p, 1.0, c, 3, {}, {}), UnsupportedOrder);
    CHECK_THROWS_AS(gauss_deg_derivative(p, 1.0, c, 0, {3}, {2}), UnsupportedOrder);

    // analytic orders against finite differences of the closed form
    const PhasePoint z = PhasePoint::d1(0.4, -0.3);
    const double u = 0.7, h = 1e-5;
    auto g = [&](double uu, double a, double b) { return gauss_deg(p, uu, PhasePoint::d1(a, b)); };
    const double d1 = (g(u, 0.4 + h, -0.3) - g(u, 0.4 - h, -0.3)) / (2 * h);
    CHECK(gauss_deg_derivative(p, u, z, 0, {1}, {}) == doctest::Approx(d1).epsilon(1e-7));
    const double d2 = (g(u, 0.4, -0.3 + h) - g(u, 0.4, -0.3 - h)) / (2 * h);
    CHECK(gauss_deg_derivative(p, u, z, 0, {}, {1}) == doctest::Approx(d2).epsilon(1e-7));
    const double dt = (g(u + h, 0.4, -0.3) - g(u - h, 0.4, -0.3)) / (2 * h);
    CHECK(gauss_deg_derivative(p, u, z, 1, {}, {}) == doctest::Approx(dt).epsilon(1e-7));
    const double d11 = (g(u, 0.4 + h, -0.3) - 2 * g(u, 0.4, -0.3) + g(u, 0.4 - h, -0.3)) / (h * h);
    CHECK(gauss_deg_derivative(p, u, z, 0, {2}, {}) == doctest::Approx(d11).epsilon(1e-4));
    const double d12t = (gauss_deg_derivative(p, u + h, z, 0, {1}, {1}) - gauss_deg_derivative(p, u - h, z, 0, {1}, {1})) / (2 * h);
    CHECK(gauss_deg_derivative(p, u, z, 1, {1}, {1}) == doctest::Approx(d12t).epsilon(1e-6));
    // FD branch: third x1-derivative of exp(-x²/2σ²) type kernel
    const double d3 = (gauss_deg_derivative(p, u, PhasePoint::d1(0.4 + h, -0.3), 0, {2}, {}) -
                       gauss_deg_derivative(p, u, PhasePoint::d1(0.4 - h, -0.3), 0, {2}, {})) / (2 * h);
    CHECK(gauss_deg_derivative(p, u, z, 0, {3}, {}) == doctest::Approx(d3).epsilon(1e-5));
}

TEST_CASE("moments") {
    CHECK(kernel_moment(0.0, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kernel_moment(0.0, 0.2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kernel_moment(2.0, 4.0) / kernel_moment(2.0, 1.0) == doctest::Approx(4.0).epsilon(1e-10));
    for (double v : {0.01, 0.5, 7.0}) CHECK(moment_check(1.5, v).ratio() == doctest::Approx(1.0).epsilon(0.05));
    CHECK_THROWS_AS(moment_check(0.0, 1.0), DomainError);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    const int N = 1000000;
    double s = 0, s2 = 0;
    for (int i = 0; i < N; ++i) {
        const double d = dist_aniso(n(rng), n(rng));
        s += d;
        s2 += d * d;
    }
    const double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    CHECK(std::abs(kernel_moment(1.0, 1.0) - mean) < 4 * se);
}

TEST_CASE("derivative bound fit is finite and global over v") {
    const auto grid = logspace(1e-3, 1.0, 7);
    const auto f = fit_derivative_bound(1.0, 0.5, 1, {1}, {}, grid, 15);
    CHECK(std::isfinite(f.C));
    CHECK(f.kappa >= 1.0);
    const auto f2 = fit_derivative_bound(1.0, 0.5, 1, {1}, {}, logspace(1e-2, 1.0, 3), 15);
    CHECK(f2.C <= f.C * (1 + 1e-9));
}
