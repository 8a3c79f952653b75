#include "doctest.h"

#include "kpx/cauchy.hpp"
#include "kpx/parametrix.hpp"

using namespace kpx;

namespace {

CauchyData rough_data() {
    CauchyData d = synth_source(-0.25, 6, 3, {0.0, 0.25, 0.5, 0.75, 1.0}, 2);
    d.ell = synth_terminal(-0.25, 4, 5);
    return d;
}

double holder(const SpectralField& f, double g) {
    BesovNormRequest r;
    r.theta = g;
    r.nodes_per_octave = 4;
    return thermic_norm(f, r);
}

}  // namespace

TEST_CASE("cauchy: constant source integrates to -(t - s)") {
    const ModelSpec m = make_model("kinetic_const", 1.0);
    CauchyData d = CauchyData::zero(1.0);
    d.g_slices[0].c0 = 1.0;
    const MildSolution u = picard_solve(m, 0, d, 0.0, 1.0);
    CHECK(u.converged);
    for (int j = 0; j < u.nodes(); ++j)
        CHECK(u.eval(j, PhasePoint::d1(0.7, -1.1)) == doctest::Approx(-(1.0 - u.times[static_cast<size_t>(j)])).epsilon(1e-3));
}

TEST_CASE("cauchy: zero drift and source give the semigroup after one step") {
    const ModelSpec m = make_model("kinetic_const", 1.0);
    CauchyData d = CauchyData::zero(1.0);
    d.ell = synth_terminal(-0.25, 3, 2);
    const MildSolution u = picard_solve(m, 0, d, 0.0, 1.0);
    REQUIRE(u.diffs.size() >= 2);
    CHECK(u.trace[1] == 0.0);
    for (int j : {0, 5, 12}) {
        const double s = u.times[static_cast<size_t>(j)];
        const SpectralField p = semigroup_apply(m, s, 1.0, d.ell);
        for (double x1 : {-0.4, 0.9})
            CHECK(u.eval(j, PhasePoint::d1(x1, 0.3)) == doctest::Approx(p.eval(x1, 0.3)).epsilon(1e-10));
    }
}

TEST_CASE("cauchy: semigroup by proxy quadrature") {
    const PhasePoint x = PhasePoint::d1(0.5, -0.3);
    const ModelSpec smooth = make_model("kinetic_smooth");
    CHECK(semigroup_apply(smooth, 0.0, 0.3, [](const PhasePoint&) { return 1.0; }, x) == doctest::Approx(1.0).epsilon(1e-3));
    const ModelSpec c = make_model("kinetic_const", 1.0);
    const double v = semigroup_apply(c, 0.0, 0.4, [](const PhasePoint& y) { return y.x2[0]; }, x);
    CHECK(std::abs(v - (-0.3 + 0.4 * 0.5)) < 1e-6);
}

TEST_CASE("cauchy: semigroup smoothing constant is stable over horizons") {
    const ModelSpec m = make_model("kinetic_const", 1.0);
    const SpectralField phi = synth_terminal(-1.5, 7, 4, 3);  // amplitudes 2^{-j/2}
    for (auto [gam, eta] : {std::pair{1.5, 0.5}, std::pair{1.0, 0.25}}) {
        std::vector<double> C;
        for (double D : {0.05, 0.1, 0.2, 0.4}) {
            const SpectralField p = semigroup_apply(m, 0.0, D, phi);
            C.push_back(holder(p, gam) * std::pow(D, 0.5 * (gam - eta)) / holder(phi, eta));
        }
        const double lo = *std::min_element(C.begin(), C.end());
        const double hi = *std::max_element(C.begin(), C.end());
        CHECK(hi < 3.0 * lo);
    }
}

TEST_CASE("cauchy: rough drift converges geometrically with exact terminal data") {
    const ModelSpec m = standard_rough_model();
    const CauchyData d = rough_data();
    const MildSolution u = picard_solve(m, 32, d, 0.0, 1.0);
    CHECK(u.converged);
    CHECK(u.residual < 5e-3);
    REQUIRE(u.contraction.size() == 4);
    CHECK(u.contraction.back().second <= 0.8);
    for (size_t i = 1; i < u.contraction.size(); ++i) CHECK(u.contraction[i].second <= u.contraction[i - 1].second + 1e-12);
    for (double x1 : {-1.0, 0.2})
        CHECK(u.eval(u.nodes() - 1, PhasePoint::d1(x1, 0.4)) == doctest::Approx(d.ell.eval(x1, 0.4)).epsilon(1e-12));

    SUBCASE("time ladder refinement") {
        CauchyOptions fine;
        fine.slices = 48;
        const MildSolution v = picard_solve(m, 32, d, 0.0, 1.0, fine);
        double diff = 0.0, top = 0.0;
        for (double x1 = -2.0; x1 <= 2.0; x1 += 0.5)
            for (double x2 = -2.0; x2 <= 2.0; x2 += 0.5) {
                diff = std::max(diff, std::abs(u.eval(0, PhasePoint::d1(x1, x2)) - v.eval(0, PhasePoint::d1(x1, x2))));
                top = std::max(top, std::abs(v.eval(0, PhasePoint::d1(x1, x2))));
            }
        CHECK(diff / top < 5e-3);
    }
}

TEST_CASE("cauchy: linearity and Schauder constant") {
    const ModelSpec m = standard_rough_model();
    const CauchyData d = rough_data();
    CauchyOptions o;
    o.tol = 0.0;
    o.max_iter = 8;
    const MildSolution a = picard_solve(m, 16, d, 0.0, 1.0, o);
    const MildSolution b = picard_solve(m, 16, d.scaled(2.0, 0.0), 0.0, 1.0, o);
    const MildSolution c = picard_solve(m, 16, d.scaled(0.0, 3.0), 0.0, 1.0, o);
    for (double x1 : {-0.8, 0.3}) {
        const PhasePoint x = PhasePoint::d1(x1, 0.5);
        CHECK(std::abs(2.0 * a.eval(0, x) - (b.eval(0, x) + c.eval(0, x) / 3.0 * 2.0)) < 1e-6);
    }

    const ModelSpec flat = make_model("kinetic_const", 1.0);
    const CauchyData g = rough_data().scaled(0.0, 1.0);
    const MildSolution g1 = picard_solve(flat, 0, g, 0.0, 0.5);
    const MildSolution g2 = picard_solve(flat, 0, g.scaled(0.0, 2.0), 0.0, 0.5);
    const SchauderFit f1 = schauder_fit({schauder_instance(g1, g, -0.25)}, -0.25, 1.5);
    const SchauderFit f2 = schauder_fit({schauder_instance(g2, g.scaled(0.0, 2.0), -0.25)}, -0.25, 1.5);
    CHECK(f1.C == doctest::Approx(f2.C).epsilon(1e-6));
    CHECK(schauder_fit({SchauderInstance{}}, -0.25, 1.5).C == 0.0);
}

TEST_CASE("cauchy: argument checks") {
    ModelSpec m = make_model("kinetic_const", 1.0);
    m.drift = std::make_shared<const DriftSpec>(sample_drift(-0.25, 2, 3, {0.0, 1.0}));
    CHECK_THROWS_AS(picard_solve(m, 8, CauchyData::zero(), 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(picard_solve(make_model("kinetic_smooth"), 0, CauchyData::zero(), 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(picard_solve(make_model("kinetic_const"), 0, CauchyData::zero(), 1.0, 1.0), DomainError);
    ModelSpec big = make_model("kinetic_const", 1.0);
    big.drift = std::make_shared<const DriftSpec>(
        sample_drift(-0.25, 2, 3, {0.0, 1.0}, DriftShape::velocity, 400.0, 1, 0.5));
    CauchyOptions o;
    o.rho_ladder = {1.0};
    CauchyData d = CauchyData::zero();
    d.ell = synth_terminal(-0.25, 2, 1);
    CHECK_THROWS_AS(picard_solve(big, 8, d, 0.0, 1.0, o), DivergenceError);
}
