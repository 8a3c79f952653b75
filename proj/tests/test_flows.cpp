#include <doctest.h>

#include "kpx/flows.hpp"

#include <random>

using namespace kpx;

namespace {

VectorFieldSpec cos_field() {
    VectorFieldSpec F;
    F.F1 = [](double, const PhasePoint& x) { return Vec::Constant(1, std::cos(x.x2[0])); };
    F.F2 = [](double, const PhasePoint& x) { return x.x1; };
    F.gradF2 = [](double, const PhasePoint&) { return Mat::Identity(1, 1).eval(); };
    return F;
}

}  // namespace

TEST_CASE("linear kinetic flow is exact") {
    const auto F = VectorFieldSpec::kinetic();
    PhasePoint y = integrate_flow(F, 1.0, 0.0, PhasePoint::d1(1, 0));
    CHECK(std::abs(y.x1[0] - 1) < 1e-14);
    CHECK(std::abs(y.x2[0] - 1) < 1e-14);
    y = integrate_flow(F, 0.5, 0.0, PhasePoint::d1(1, 2));
    CHECK(std::abs(y.x2[0] - 2.5) < 1e-14);
    y = integrate_flow(F, 0.0, 0.5, PhasePoint::d1(1, 2.5));  // backward
    CHECK(std::abs(y.x2[0] - 2.0) < 1e-14);
    const PhasePoint x = PhasePoint::d1(0.3, 0.2);
    y = integrate_flow(F, 0.7, 0.7, x);
    CHECK(y.x1[0] == x.x1[0]);
    CHECK(y.x2[0] == x.x2[0]);
}

TEST_CASE("nonlinear flow against a fine reference") {
    const auto F = cos_field();
    const PhasePoint a = integrate_flow(F, 0.25, 0.0, PhasePoint::d1(0, 0), 256);
    const PhasePoint ref = integrate_flow(F, 0.25, 0.0, PhasePoint::d1(0, 0), 8192);
    CHECK(std::abs(a.x1[0] - ref.x1[0]) < 1e-9);
    CHECK(std::abs(a.x2[0] - ref.x2[0]) < 1e-9);
    // x1' = cos(x2), x2' = x1, from 0: x1 ≈ t, x2 ≈ t²/2
    CHECK(a.x1[0] == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("flow composition and dense output") {
    const auto F = cos_field();
    const PhasePoint x = PhasePoint::d1(0.4, -0.2);
    const PhasePoint mid = integrate_flow(F, 0.3, 0.0, x, 300);
    const PhasePoint two = integrate_flow(F, 0.8, 0.3, mid, 500);
    const PhasePoint one = integrate_flow(F, 0.8, 0.0, x, 800);
    CHECK((two - one).stacked().norm() < 1e-8);
    const FlowPath path = integrate_flow_path(F, 0.0, 0.8, x, 800);
    CHECK((path.at(0.3) - mid).stacked().norm() < 1e-8);
    CHECK(path.error_estimate < 1e-8);
    CHECK((path.at(0.0) - x).stacked().norm() == 0.0);
}

TEST_CASE("mollify_field") {
    VectorFieldSpec F;
    F.F1 = [](double, const PhasePoint&) { return Vec::Constant(1, 2.5); };
    F.F2 = [](double, const PhasePoint& x) { return x.x1; };
    F.gradF2 = [](double, const PhasePoint&) { return Mat::Identity(1, 1).eval(); };
    const auto G = mollify_field(F, 0.3, 0.2);
    const PhasePoint x = PhasePoint::d1(0.7, -1.1);
    CHECK(G.F1(0, x)[0] == doctest::Approx(2.5).epsilon(1e-13));
    CHECK(G.F2(0, x)[0] == doctest::Approx(0.7).epsilon(1e-13));

    VectorFieldSpec A;
    A.F1 = [](double, const PhasePoint& x) { return Vec::Constant(1, std::abs(x.x1[0])); };
    A.F2 = F.F2;
    A.gradF2 = F.gradF2;
    const double eps = 0.1;
    const double v = mollify_field(A, eps, 0.1).F1(0, PhasePoint::d1(0, 0))[0];
    const double oracle = adaptive_gl([&](double y) { return std::abs(eps * y) * bump_density_1d(y); }, -1, 0, 1e-12) * 2;
    CHECK(v > 0);
    CHECK(v < eps);
    CHECK(v == doctest::Approx(oracle).epsilon(1e-3));

    // translation commutes
    VectorFieldSpec S;
    S.F1 = [](double, const PhasePoint& x) { return Vec::Constant(1, std::sin(3 * x.x1[0]) * x.x2[0]); };
    S.F2 = F.F2;
    S.gradF2 = F.gradF2;
    VectorFieldSpec Sh = S;
    Sh.F1 = [](double, const PhasePoint& x) { return Vec::Constant(1, std::sin(3 * (x.x1[0] + 0.4)) * (x.x2[0] - 0.2)); };
    const double a = mollify_field(Sh, 0.2, 0.1).F1(0, x)[0];
    const double b = mollify_field(S, 0.2, 0.1).F1(0, PhasePoint::d1(0.7 + 0.4, -1.1 - 0.2))[0];
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK_THROWS_AS(mollify_field(S, 0.0, 0.1), DomainError);
}

TEST_CASE("flow equivalence defect") {
    const auto Z = VectorFieldSpec::zero();
    CHECK(flow_equivalence_defect(Z, 0.0, 0.2, 1.0, PhasePoint::d1(0.3, 1), PhasePoint::d1(-1, 2)) == 1.0);

    const auto K = VectorFieldSpec::kinetic();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (double dt : {1.0, 0.1, 0.01}) {
        const ScaleMatrix T(dt);
        double kmax = 1.0;
        for (int i = 0; i < 1000; ++i) {
            const PhasePoint x = T.apply(PhasePoint::d1(2 * n(rng), 2 * n(rng)));
            const PhasePoint y = T.apply(PhasePoint::d1(2 * n(rng), 2 * n(rng)));
            kmax = std::max(kmax, flow_equivalence_defect(K, 0.0, 0.0, dt, x, y));
        }
        CHECK(kmax <= 10.0);
    }
    // aligned case x = θ_{v,t}(y)
    const PhasePoint y = PhasePoint::d1(0.5, 0.5);
    const PhasePoint x = integrate_flow(K, 0.0, 1.0, y);
    CHECK(std::isfinite(flow_equivalence_defect(K, 0.0, 0.0, 1.0, x, y)));
}

TEST_CASE("hormander check") {
    const auto K = VectorFieldSpec::kinetic();
    CHECK_NOTHROW(K.check_hormander(0, PhasePoint::d1(0, 0), 0.5, 2.0));
    CHECK_THROWS_AS(VectorFieldSpec::zero().check_hormander(0, PhasePoint::d1(0, 0), 0.5, 2.0), ConfigError);
}
