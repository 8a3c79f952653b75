#include "doctest.h"

#include "kpx/envelope.hpp"
#include "kpx/proxy_solver.hpp"
#include "kpx/quadrature.hpp"

#include <random>

using namespace kpx;

namespace {

ProxyOptions light() {
    ProxyOptions o;
    o.slices = 8;
    o.lattice = 21;
    o.lattice_time_nodes = 8;
    o.lattice_gh_nodes = 12;
    o.time_nodes = 16;
    o.gh_nodes = 20;
    return o;
}

// exact kinetic Gaussian with σ constant
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

}  // namespace

TEST_CASE("proxy: constant coefficients give the exact Gaussian in one step") {
    const ModelSpec m = make_model("kinetic_const", 2.0);
    const PhasePoint x = PhasePoint::d1(0.4, -0.2);
    ProxySolver S(m, 0.0, x, 0.3);
    S.solve();
    CHECK(S.trivial());
    CHECK(S.iterations() == 1);
    CHECK(S.trace()[0] == 0.0);
    const DensityField F = S.field(0.3, S.default_grid(0.3, 21, 7.0));
    double err = 0, gerr = 0, gmax = 0;
    for (int i = 0; i < F.grid.n; ++i)
        for (int j = 0; j < F.grid.n; ++j) {
            double g;
            const double p = kinetic_gauss(std::sqrt(2.0), 0.3, x, F.grid.point(i, j), &g);
            err = std::max(err, std::abs(p - F.at(i, j)));
            gerr = std::max(gerr, std::abs(g - F.grad_x1[i * F.grid.n + j]));
            gmax = std::max(gmax, std::abs(g));
        }
    CHECK(err < 1e-8);
    CHECK(gerr < 1e-8 * std::max(1.0, gmax));
    CHECK(F.mass() == doctest::Approx(1.0).epsilon(1e-6));
    const Vec g = proxy_gradient(m, 0.0, x, 0.3, PhasePoint::d1(0.5, 0.0));
    double gx;
    kinetic_gauss(std::sqrt(2.0), 0.3, x, PhasePoint::d1(0.5, 0.0), &gx);
    CHECK(g[0] == doctest::Approx(gx).epsilon(1e-8));
}

TEST_CASE("proxy: kinetic smooth sigma, mass and Monte-Carlo moments") {
    const ModelSpec m = make_model("kinetic_smooth");
    const PhasePoint x = PhasePoint::d1(0.3, 0.1);
    const double T = 0.25;
    ProxySolver S(m, 0.0, x, T);
    S.solve();
    CHECK(S.converged());
    const DensityField F = S.field(T, S.default_grid(T, 41, 7.0));
    CHECK(F.mass() == doctest::Approx(1.0).epsilon(1e-3));
    double mx = 0;
    for (double v : F.values) mx = std::max(mx, v);
    CHECK(F.min_value() > -1e-6 * mx);

    // moments by grid quadrature
    double m1 = 0, m2 = 0, v1 = 0, z = 0;
    for (int i = 0; i < F.grid.n; ++i)
        for (int j = 0; j < F.grid.n; ++j) {
            const PhasePoint y = F.grid.point(i, j);
            const double p = F.at(i, j);
            z += p;
            m1 += p * y.x1[0];
            m2 += p * y.x2[0];
            v1 += p * y.x1[0] * y.x1[0];
        }
    m1 /= z;
    m2 /= z;
    v1 = v1 / z - m1 * m1;

    // Euler–Maruyama oracle, 10^6 paths, trapezoidal position update
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> N;
    const int paths = 1000000, steps = 100;
    const double h = T / steps, sh = std::sqrt(h);
    double s1 = 0, s2 = 0, q1 = 0, q2 = 0, w1 = 0, w11 = 0;
    for (int p = 0; p < paths; ++p) {
        double a = x.x1[0], b = x.x2[0];
        for (int k = 0; k < steps; ++k) {
            const double an = a + m.sigma1(0, a, b) * sh * N(rng);
            b += 0.5 * h * (a + an);
            a = an;
        }
        s1 += a;
        q1 += a * a;
        s2 += b;
        q2 += b * b;
        w1 += a * a;
        w11 += a * a * a * a;
    }
    const double e1 = s1 / paths, e2 = s2 / paths;
    const double se1 = std::sqrt((q1 / paths - e1 * e1) / paths), se2 = std::sqrt((q2 / paths - e2 * e2) / paths);
    CHECK(std::abs(m1 - e1) < 3 * se1);
    CHECK(std::abs(m2 - e2) < 3 * se2);
    const double ev = w1 / paths - e1 * e1;
    const double sev = std::sqrt((w11 / paths - sqr(w1 / paths)) / paths);
    INFO("variance quad " << v1 << " mc " << ev << " se " << sev);
    CHECK(std::abs(v1 - ev) < 3 * sev + 2e-3 * ev);  // EM weak error O(h)
}

TEST_CASE("proxy: quadrature refinement changes the solution by < 1e-3") {
    const ModelSpec m = make_model("kinetic_smooth");
    const PhasePoint x = PhasePoint::d1(0.3, 0.0);
    ProxyOptions a;
    a.with_gradient = false;
    ProxyOptions b = a;
    b.lattice_time_nodes *= 2;
    b.lattice_gh_nodes *= 2;
    b.time_nodes *= 2;
    b.gh_nodes *= 2;
    ProxySolver Sa(m, 0.0, x, 0.25, a), Sb(m, 0.0, x, 0.25, b);
    Sa.solve();
    Sb.solve();
    const ForwardGrid g = Sa.default_grid(0.25, 17, 6.0);
    const DensityField Fa = Sa.field(0.25, g), Fb = Sb.field(0.25, g);
    const double d = sup_relative(Fa.values, Fb.values);
    MESSAGE("refinement change " << d);
    CHECK(d < 1e-3);
}

TEST_CASE("proxy: Picard change decays geometrically") {
    const ModelSpec m = make_model("kinetic_smooth");
    ProxyOptions o = light();
    o.tol = 1e-9;
    o.max_iter = 6;
    ProxySolver S(m, 0.0, PhasePoint::d1(0.0, 0.0), 0.5, o);
    S.solve();
    const auto& tr = S.trace();
    REQUIRE(tr.size() >= 3);
    for (size_t k = 1; k < tr.size(); ++k)
        if (tr[k - 1] > 1e-12) CHECK(tr[k] < 0.5 * tr[k - 1]);
}

TEST_CASE("proxy: gradient vanishes at the transported mean and obeys a stable bound") {
    const ModelSpec m = make_model("kinetic_smooth");
    const PhasePoint x = PhasePoint::d1(0.0, 0.0);
    std::vector<double> Cs;
    for (double dt : {0.05, 0.1, 0.25}) {
        ProxySolver S(m, 0.0, x, dt, light());
        S.solve();
        const DensityField F = S.field(dt, S.default_grid(dt, 25, 6.0));
        double peak = 0;
        std::vector<double> q;
        std::vector<PhasePoint> z;
        for (int i = 0; i < F.grid.n; ++i)
            for (int j = 0; j < F.grid.n; ++j) {
                const double g = F.grad_x1[i * F.grid.n + j];
                peak = std::max(peak, std::abs(g));
                q.push_back(std::abs(g) * std::sqrt(dt));
                z.push_back(F.grid.point(i, j) - F.grid.center);
            }
        const double g0 = S.gradient_x1(dt, F.grid.center);
        // the asymmetry from σ'(x1) grows like √Δ; at Δ = 0.25 it is 6% of the peak
        if (dt <= 0.1) CHECK(std::abs(g0) < 0.05 * peak);
        if (dt == 0.25) {
            const double h = 1e-3;
            ProxySolver A(m, 0.0, PhasePoint::d1(h, 0), dt, light()), B(m, 0.0, PhasePoint::d1(-h, 0), dt, light());
            A.solve();
            B.solve();
            const double fd = (A.density(dt, F.grid.center) - B.density(dt, F.grid.center)) / (2 * h);
            CHECK(g0 == doctest::Approx(fd).epsilon(0.03));
        }
        const SandwichFit fit = fit_upper(q, z, dt);
        Cs.push_back(fit.C_upper);
    }
    const double hi = *std::max_element(Cs.begin(), Cs.end()), lo = *std::min_element(Cs.begin(), Cs.end());
    MESSAGE("gradient constants " << Cs[0] << " " << Cs[1] << " " << Cs[2]);
    CHECK(hi / lo < 1.5);
}

TEST_CASE("proxy: two-sided Gaussian bound with one (C, lambda) per model") {
    const ModelSpec m = make_model("kinetic_smooth");
    struct Cfg {
        double s, t, x1;
    };
    std::vector<SandwichFit> fits;
    for (Cfg c : {Cfg{0.0, 0.1, 0.0}, Cfg{0.0, 0.3, 0.7}, Cfg{0.2, 0.45, -0.5}}) {
        ProxySolver S(m, c.s, PhasePoint::d1(c.x1, 0.2), c.t, light());
        S.solve();
        const DensityField F = S.field(c.t, S.default_grid(c.t, 21, 5.0));
        std::vector<double> p;
        std::vector<PhasePoint> z;
        const PhasePoint th = PhasePoint::d1(c.x1, 0.2 + (c.t - c.s) * c.x1);  // kinetic flow
        for (int i = 0; i < F.grid.n; ++i)
            for (int j = 0; j < F.grid.n; ++j) {
                if (std::max(std::abs(F.grid.u(i)), std::abs(F.grid.u(j))) > 3.0) continue;  // central region
                p.push_back(F.at(i, j));
                z.push_back(th - F.grid.point(i, j));
            }
        fits.push_back(fit_sandwich(p, z, c.t - c.s));
    }
    double C = 0, lam = 0;
    for (const auto& f : fits) {
        C = std::max(C, f.C);
        lam = std::max(lam, f.lambda);
    }
    MESSAGE("sandwich C " << C << " lambda " << lam);
    CHECK(std::isfinite(C));
    CHECK(C < 50);
    CHECK(lam < 10);
}

TEST_CASE("proxy: Chapman-Kolmogorov defect on the kinetic model") {
    const ModelSpec m = make_model("kinetic_smooth");
    const PhasePoint x = PhasePoint::d1(0.2, 0.0);
    const double s = 0.0, r = 0.15, t = 0.3, h = t - r;
    ProxyOptions o = light();
    o.with_gradient = false;
    ProxySolver first(m, s, x, r, o), whole(m, s, x, t, o);
    first.solve();
    whole.solve();
    const Gauss2 g1 = first.reference(r);
    const Vec2 mu1 = g1.mean(Vec2(x.x1[0], x.x2[0]));
    const Mat2 Q1 = g1.K.inverse();
    const int nq = 10;
    const Rule& gh = gauss_hermite_normal(nq);
    const ForwardGrid wg = whole.default_grid(t, 3, 1.0);
    std::vector<double> ck, direct;
    for (const PhasePoint& y : {wg.point(1, 1), wg.point(0, 2), wg.point(2, 1)}) {
        // Gauss–Hermite in the product of the two frozen Gaussians seen as functions of z;
        // z1 depends on the first node only and x2-translation invariance lets one
        // solver per z1 serve every z2
        const double sg = m.sigma1(0, y.x1[0], y.x2[0]);
        Mat2 R, K2;
        R << 1, 0, h, 1;
        K2 << h, h * h / 2, h * h / 2, h * h * h / 3;
        const Mat2 P2 = (sg * sg * K2).inverse();
        const Vec2 yv(y.x1[0], y.x2[0]);
        const Mat2 C = (Q1 + R.transpose() * P2 * R).inverse();
        const Vec2 mus = C * (Q1 * mu1 + R.transpose() * P2 * yv);
        const Mat2 L = Eigen::LLT<Mat2>(C).matrixL().toDenseMatrix();
        double acc = 0;
        for (int a = 0; a < nq; ++a) {
            ProxySolver second(m, r, PhasePoint::d1(mus[0] + L(0, 0) * gh.x[a], 0.0), t, o);
            second.solve();
            for (int b = 0; b < nq; ++b) {
                const Vec2 z = mus + L * Vec2(gh.x[a], gh.x[b]);
                const double wq =
                    gh.w[a] * gh.w[b] * L.determinant() * 2 * kPi * std::exp(0.5 * (sqr(gh.x[a]) + sqr(gh.x[b])));
                acc += wq * first.density(r, PhasePoint::d1(z[0], z[1])) *
                       second.density(t, PhasePoint::d1(y.x1[0], y.x2[0] - z[1]));
            }
        }
        ck.push_back(acc);
        direct.push_back(whole.density(t, y));
    }
    const double defect = sup_relative(ck, direct);
    MESSAGE("CK defect " << defect);
    CHECK(defect < 5e-3);
}

TEST_CASE("proxy: regularity probes") {
    SUBCASE("exact Gaussian forward slope saturates at 1") {
        const ModelSpec m = make_model("kinetic_const");
        const std::vector<PhasePoint> bat = {PhasePoint::d1(0.3, 0.05), PhasePoint::d1(-0.2, 0.0)};
        const ProbeResult r = proxy_regularity_probe(m, ProbeKind::forward, 0.8, 0.0, PhasePoint::d1(0, 0), 0.25, bat);
        CHECK(r.slope == doctest::Approx(1.0).epsilon(0.05));
    }
    SUBCASE("rough sigma forward probe") {
        const ModelSpec m = make_model("rough_sigma");
        const std::vector<PhasePoint> bat = {PhasePoint::d1(0.3, 0.05), PhasePoint::d1(0.01, 0.0),
                                             PhasePoint::d1(-0.2, -0.02)};
        const ProbeResult r =
            proxy_regularity_probe(m, ProbeKind::forward, 0.4, 0.0, PhasePoint::d1(0, 0), 0.25, bat, light());
        MESSAGE("rough forward slope " << r.slope);
        CHECK(r.slope >= 0.3);
    }
    SUBCASE("mixed probe constant is stable under battery resampling") {
        const ModelSpec m = make_model("kinetic_smooth");
        ProxyOptions o = light();
        const std::vector<PhasePoint> b1 = {PhasePoint::d1(0.2, 0.02), PhasePoint::d1(-0.3, -0.01)};
        const std::vector<PhasePoint> b2 = {PhasePoint::d1(0.24, 0.024), PhasePoint::d1(-0.36, -0.008)};
        const ProbeResult r1 = proxy_regularity_probe(m, ProbeKind::mixed, 1.0, 0.0, PhasePoint::d1(0, 0), 0.25, b1, o);
        const ProbeResult r2 = proxy_regularity_probe(m, ProbeKind::mixed, 1.0, 0.0, PhasePoint::d1(0, 0), 0.25, b2, o);
        MESSAGE("mixed constants " << r1.constant << " " << r2.constant << " slopes " << r1.slope);
        CHECK(r1.slope >= 0.9);
        CHECK(r1.constant / r2.constant < 1.5);
        CHECK(r2.constant / r1.constant < 1.5);
    }
}

TEST_CASE("proxy: argument checks") {
    const ModelSpec m = make_model("kinetic_smooth");
    CHECK_THROWS_AS(ProxySolver(m, 0.3, PhasePoint::d1(0, 0), 0.3), DomainError);
    ProxySolver S(m, 0.0, PhasePoint::d1(0, 0), 0.1, light());
    CHECK_THROWS_AS(S.density(0.1, PhasePoint::d1(0, 0)), ConfigError);
}
