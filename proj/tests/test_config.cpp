#include "doctest.h"

#include "kpx/config.hpp"
#include "kpx/expr.hpp"
#include "kpx/verify.hpp"

#include <json.hpp>

#include <cmath>

using namespace kpx;

TEST_CASE("expr: evaluation") {
    const Expr e("2 + 3*x^2 - sin(pi*y)/4", {"x", "y"});
    CHECK(e.eval({2.0, 0.5}) == doctest::Approx(2 + 12 - 0.25));
    CHECK(Expr("-2^2", {}).eval({}) == doctest::Approx(-4.0));
    CHECK(Expr("2^3^2", {}).eval({}) == doctest::Approx(512.0));
    CHECK(Expr("sgn(x)*abs(x)^0.5", {"x"}).eval({-4.0}) == doctest::Approx(-2.0));
    CHECK(Expr("exp(log(3)) + sqrt(16) + tanh(0) + cos(0) + tan(0)", {}).eval({}) == doctest::Approx(8.0));
    CHECK(e.depends_on(0));
    CHECK_FALSE(Expr("x + 1", {"x", "y"}).depends_on(1));
}

TEST_CASE("expr: syntax errors") {
    CHECK_THROWS_AS(Expr("1 +", {}), ConfigError);
    CHECK_THROWS_AS(Expr("foo(1)", {}), ConfigError);
    CHECK_THROWS_AS(Expr("x * z", {"x"}), ConfigError);
    CHECK_THROWS_AS(Expr("(1 + 2", {}), ConfigError);
    try {
        Expr("1 + * 2", {});
        FAIL("no throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("position") != std::string::npos);
    }
}

TEST_CASE("config: round trip") {
    ExperimentConfig c;
    c.beta = -0.3;
    c.nu = 0.7;
    c.n_ladder = {8, 16};
    c.cauchy.horizons = {0.05, 0.1};
    c.tolerances["kde_agreement"] = 0.2;
    const std::string s = c.to_json();
    const ExperimentConfig d = ExperimentConfig::from_json(s);
    CHECK(d.to_json() == s);
    CHECK(d.hash() == c.hash());
    CHECK(d.tol("kde_agreement") == 0.2);
    CHECK(d.tol("kernel_mass") == default_tolerances().at("kernel_mass"));

    ExperimentConfig e = d;
    e.montecarlo.seed = 99;
    e.out = "elsewhere";
    CHECK(e.hash() == d.hash());
    e.beta = -0.2;
    CHECK(e.hash() != d.hash());
}

TEST_CASE("config: validation names the field") {
    auto msg = [](const std::string& text) {
        try {
            ExperimentConfig::from_json(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(msg(R"({"nu": 0.3})").find("nu") != std::string::npos);  // ν must exceed −2β = 0.5
    CHECK(msg(R"({"beta": -0.7})").find("beta") != std::string::npos);
    CHECK(msg(R"({"grid": {"n": 41, "width": 3}})").find("grid.width") != std::string::npos);
    CHECK(msg(R"({"model": "nope"})").find("model") != std::string::npos);
    CHECK(msg(R"({"lambda": "x"})").find("lambda") != std::string::npos);
    CHECK(msg("{not json").find("JSON") != std::string::npos);
    CHECK(msg(R"({"model": "inline", "inline": {"sigma": "1 + "}})").find("sigma") != std::string::npos);
    CHECK(msg("{}").empty());
}

TEST_CASE("config: models") {
    ExperimentConfig c = ExperimentConfig::from_json(R"j({"model": "inline",
        "inline": {"sigma": "1.5 + 0.25*sin(x1)", "F1": "0", "F2": "x1"}})j");
    const ModelSpec m = build_base_model(c);
    CHECK(m.kinetic_base);
    CHECK(m.drift == nullptr);
    CHECK(m.sigma_scalar(0.0, PhasePoint::d1(0.7, 0.1)) == doctest::Approx(1.5 + 0.25 * std::sin(0.7)));
    const ModelSpec md = build_model(c);
    REQUIRE(md.drift != nullptr);

    c.drift.enabled = false;
    CHECK(build_model(c).drift == nullptr);

    ExperimentConfig k;
    const ModelSpec mk = build_base_model(k);
    CHECK(mk.sigma_constant);
    CHECK(mk.beta == k.beta);
}

TEST_CASE("verify: gates and ledger comparison") {
    CHECK(make_gate("1", "a", 1.0, "<=", 1.0).pass);
    CHECK_FALSE(make_gate("1", "a", 1.0, "<", 1.0).pass);
    CHECK(make_gate("1", "a", 2.0, ">", 1.0).pass);
    CHECK_THROWS_AS(make_gate("1", "a", 1.0, "==", 1.0), ConfigError);

    ExperimentConfig c;
    const SuiteReport r = run_suite("kernels", c);
    CHECK(r.pass());
    const std::string la = r.ledger_json(c);
    const nlohmann::json j = nlohmann::json::parse(la);
    CHECK(j["suite"] == "kernels");
    CHECK(j["config_hash"] == c.hash());

    const CompareResult same = compare_ledgers(la, la, 1e-12);
    CHECK(same.pass);
    CHECK(same.missing.empty());
    for (const auto& row : same.rows) CHECK(row.drift == 0.0);

    nlohmann::json k = j;
    k["constants"]["scaling_kappa"] = k["constants"]["scaling_kappa"].get<double>() * 1.5;
    const CompareResult moved = compare_ledgers(la, k.dump(), 0.1);
    CHECK_FALSE(moved.pass);
    CHECK(compare_ledgers(la, k.dump(), 0.5).pass);

    k["config_hash"] = "different";
    CHECK_THROWS_AS(compare_ledgers(la, k.dump(), 0.1), ConfigError);
    CHECK_THROWS_AS(run_suite("nope", c), ConfigError);

    // a tightened tolerance flips the gate
    ExperimentConfig tight = c;
    tight.tolerances["kernel_mass"] = 1e-300;
    CHECK_FALSE(run_suite("kernels", tight).pass());
}
