#include "kpx/config.hpp"

#include "kpx/besov.hpp"
#include "kpx/expr.hpp"
#include "kpx/parametrix.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace kpx {

using nlohmann::json;

const std::map<std::string, double>& default_tolerances() {
    static const std::map<std::string, double> t{
        {"kernel_mass", 1e-8},           {"kernel_seconds", 5.0},
        {"frozen_cov", 1e-10},           {"scaling_ratio", 1e-6},
        {"shifted_gaussian", 1e-3},      {"collapse_seconds", 60.0},
        {"envelope_factor", 2.0},        {"envelope_seconds", 300.0},
        {"uniformity_factor", 2.0},      {"uniformity_seconds", 1800.0},
        {"kde_agreement", 0.10},         {"sandwich_seconds", 1200.0},
        {"forward_slack", 0.1},          {"backward_slack", 0.05},
        {"shell_slope", 0.05},           {"equivalence_constant", 5.0},
        {"mollification_relative", 0.1}, {"cauchy_residual", 5e-3},
        {"contraction_factor", 0.8},     {"horizon_slope", 0.1},
        {"stability_drop", 0.3},         {"martingale_positive", 3.0},
        {"martingale_negative", 5.0},    {"weak_bias_fraction", 0.5},
    };
    return t;
}

double ExperimentConfig::tol(const std::string& key) const {
    const auto it = tolerances.find(key);
    if (it != tolerances.end()) return it->second;
    const auto& d = default_tolerances();
    const auto jt = d.find(key);
    if (jt == d.end()) throw ConfigError("unknown tolerance '" + key + "'");
    return jt->second;
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) bad(where.empty() ? "<root>" : where, "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) bad(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
}

template <class T>
void get(const json& j, const std::string& key, const std::string& field, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        bad(field, std::string("wrong type (") + e.what() + ")");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    const std::vector<std::string> models{"kinetic_const", "kinetic_smooth", "rough_sigma", "inline"};
    if (std::find(models.begin(), models.end(), model) == models.end())
        bad("model", "unknown model '" + model + "' (known: kinetic_const, kinetic_smooth, rough_sigma, inline)");
    if (model == "inline" && sigma_expr.empty()) bad("sigma", "inline model needs a sigma expression");
    if (!(lambda > 0)) bad("lambda", "must be positive");
    if (!(beta > -0.5 && beta < 0.0)) bad("beta", "must lie in (-1/2, 0)");
    if (!(nu > -2.0 * beta && nu < 1.0)) bad("nu", "must lie in (-2 beta, 1) = (" + std::to_string(-2 * beta) + ", 1)");
    if (!(T > 0)) bad("T", "must be positive");
    if (drift.J_max < 0) bad("drift.J_max", "must be >= 0");
    if (drift.waves_per_shell < 1) bad("drift.waves_per_shell", "must be >= 1");
    if (!(drift.quantum >= 0 && drift.quantum <= 1)) bad("drift.quantum", "must lie in [0, 1]");
    if (drift.slices.size() < 2 || drift.slices.front() != 0.0 || std::abs(drift.slices.back() - T) > 1e-12)
        bad("drift.slices", "must start at 0 and end at T");
    for (size_t i = 1; i < drift.slices.size(); ++i)
        if (!(drift.slices[i] > drift.slices[i - 1])) bad("drift.slices", "must be increasing");
    if (!(drift.amplitude > 0)) bad("drift.amplitude", "must be positive");
    if (drift.sup_level < 0) bad("drift.sup_level", "must be >= 0");
    if (n_ladder.empty()) bad("n_ladder", "must not be empty");
    for (size_t i = 0; i < n_ladder.size(); ++i) {
        if (n_ladder[i] < 1) bad("n_ladder", "levels must be >= 1");
        if (i && n_ladder[i] <= n_ladder[i - 1]) bad("n_ladder", "must be increasing");
    }
    if (grid.n < 5 || grid.n % 2 == 0) bad("grid.n", "must be odd and >= 5");
    if (!(grid.half_width > 3.0)) bad("grid.half_width", "must exceed 3 (the central region)");
    if (parametrix.K < 1 || parametrix.K > 12) bad("parametrix.K", "must lie in 1..12");
    for (auto [v, f] : {std::pair{parametrix.n1, "parametrix.n1"}, std::pair{parametrix.n2, "parametrix.n2"},
                        std::pair{parametrix.n2_envelope, "parametrix.n2_envelope"}})
        if (v < 16 || (v & (v - 1)) != 0) bad(f, "must be a power of two >= 16");
    if (parametrix.steps < 8) bad("parametrix.steps", "must be >= 8");
    if (montecarlo.paths < 1000) bad("montecarlo.paths", "must be >= 1000");
    if (montecarlo.martingale_paths < 1000) bad("montecarlo.martingale_paths", "must be >= 1000");
    if (montecarlo.bias_paths < 1000) bad("montecarlo.bias_paths", "must be >= 1000");
    if (montecarlo.steps < 256) bad("montecarlo.steps", "must be >= 256");
    if (cauchy.slices < 2) bad("cauchy.slices", "must be >= 2");
    if (cauchy.modes < 16 || cauchy.modes % 2) bad("cauchy.modes", "must be even and >= 16");
    if (!(cauchy.gamma > 1.0 && cauchy.gamma < 2.0)) bad("cauchy.gamma", "must lie in (1, 2)");
    if (cauchy.level < 1) bad("cauchy.level", "must be >= 1");
    if (cauchy.ladder.size() < 3) bad("cauchy.ladder", "needs at least 3 levels");
    for (size_t i = 1; i < cauchy.ladder.size(); ++i)
        if (cauchy.ladder[i] <= cauchy.ladder[i - 1]) bad("cauchy.ladder", "must be increasing");
    if (cauchy.horizons.size() < 2) bad("cauchy.horizons", "needs at least 2 horizons");
    for (double h : cauchy.horizons)
        if (!(h > 0 && h <= T)) bad("cauchy.horizons", "must lie in (0, T]");
    if (!(probe.eta_f > 0 && probe.eta_f < 1)) bad("probe.eta_f", "must lie in (0, 1)");
    if (!(probe.eta_b > 0 && probe.eta_b < 1)) bad("probe.eta_b", "must lie in (0, 1)");
    const auto& d = default_tolerances();
    for (const auto& [k, v] : tolerances) {
        if (!d.count(k)) bad("tolerances." + k, "unknown tolerance");
        if (!(v > 0)) bad("tolerances." + k, "must be positive");
    }
    if (out.empty()) bad("out", "must not be empty");
    if (jobs < 0) bad("jobs", "must be >= 0");
    if (model == "inline") build_base_model(*this);  // parses the expressions
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["model"] = model;
    j["lambda"] = lambda;
    if (model == "inline") j["inline"] = {{"sigma", sigma_expr}, {"F1", F1_expr}, {"F2", F2_expr}};
    j["beta"] = beta;
    j["nu"] = nu;
    j["T"] = T;
    j["drift"] = {{"enabled", drift.enabled},
                  {"seed", drift.seed},
                  {"J_max", drift.J_max},
                  {"waves_per_shell", drift.waves_per_shell},
                  {"quantum", drift.quantum},
                  {"slices", drift.slices},
                  {"amplitude", drift.amplitude},
                  {"sup_level", drift.sup_level}};
    j["n_ladder"] = n_ladder;
    j["grid"] = {{"n", grid.n}, {"half_width", grid.half_width}};
    j["parametrix"] = {{"K", parametrix.K},
                       {"n1", parametrix.n1},
                       {"n2", parametrix.n2},
                       {"n2_envelope", parametrix.n2_envelope},
                       {"steps", parametrix.steps}};
    j["montecarlo"] = {{"paths", montecarlo.paths},
                       {"steps", montecarlo.steps},
                       {"seed", montecarlo.seed},
                       {"martingale_paths", montecarlo.martingale_paths},
                       {"bias_paths", montecarlo.bias_paths}};
    j["cauchy"] = {{"slices", cauchy.slices}, {"modes", cauchy.modes},   {"gamma", cauchy.gamma},
                   {"level", cauchy.level},   {"ladder", cauchy.ladder}, {"horizons", cauchy.horizons}};
    j["probe"] = {{"eta_f", probe.eta_f}, {"eta_b", probe.eta_b}};
    j["tolerances"] = tolerances;
    j["out"] = out;
    j["jobs"] = jobs;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "", {"model", "lambda", "inline", "beta", "nu", "T", "drift", "n_ladder", "grid", "parametrix",
                       "montecarlo", "cauchy", "probe", "tolerances", "out", "jobs"});
    ExperimentConfig c;
    get(j, "model", "model", c.model);
    get(j, "lambda", "lambda", c.lambda);
    if (j.contains("inline")) {
        const json& m = j["inline"];
        check_keys(m, "inline", {"sigma", "F1", "F2"});
        get(m, "sigma", "inline.sigma", c.sigma_expr);
        get(m, "F1", "inline.F1", c.F1_expr);
        get(m, "F2", "inline.F2", c.F2_expr);
    }
    get(j, "beta", "beta", c.beta);
    get(j, "nu", "nu", c.nu);
    get(j, "T", "T", c.T);
    if (j.contains("drift")) {
        const json& d = j["drift"];
        check_keys(d, "drift", {"enabled", "seed", "J_max", "waves_per_shell", "quantum", "slices", "amplitude", "sup_level"});
        get(d, "enabled", "drift.enabled", c.drift.enabled);
        get(d, "seed", "drift.seed", c.drift.seed);
        get(d, "J_max", "drift.J_max", c.drift.J_max);
        get(d, "waves_per_shell", "drift.waves_per_shell", c.drift.waves_per_shell);
        get(d, "quantum", "drift.quantum", c.drift.quantum);
        get(d, "slices", "drift.slices", c.drift.slices);
        get(d, "amplitude", "drift.amplitude", c.drift.amplitude);
        get(d, "sup_level", "drift.sup_level", c.drift.sup_level);
    }
    get(j, "n_ladder", "n_ladder", c.n_ladder);
    if (j.contains("grid")) {
        check_keys(j["grid"], "grid", {"n", "half_width"});
        get(j["grid"], "n", "grid.n", c.grid.n);
        get(j["grid"], "half_width", "grid.half_width", c.grid.half_width);
    }
    if (j.contains("parametrix")) {
        const json& p = j["parametrix"];
        check_keys(p, "parametrix", {"K", "n1", "n2", "n2_envelope", "steps"});
        get(p, "K", "parametrix.K", c.parametrix.K);
        get(p, "n1", "parametrix.n1", c.parametrix.n1);
        get(p, "n2", "parametrix.n2", c.parametrix.n2);
        get(p, "n2_envelope", "parametrix.n2_envelope", c.parametrix.n2_envelope);
        get(p, "steps", "parametrix.steps", c.parametrix.steps);
    }
    if (j.contains("montecarlo")) {
        const json& m = j["montecarlo"];
        check_keys(m, "montecarlo", {"paths", "steps", "seed", "martingale_paths", "bias_paths"});
        get(m, "paths", "montecarlo.paths", c.montecarlo.paths);
        get(m, "steps", "montecarlo.steps", c.montecarlo.steps);
        get(m, "seed", "montecarlo.seed", c.montecarlo.seed);
        get(m, "martingale_paths", "montecarlo.martingale_paths", c.montecarlo.martingale_paths);
        get(m, "bias_paths", "montecarlo.bias_paths", c.montecarlo.bias_paths);
    }
    if (j.contains("cauchy")) {
        const json& m = j["cauchy"];
        check_keys(m, "cauchy", {"slices", "modes", "gamma", "level", "ladder", "horizons"});
        get(m, "slices", "cauchy.slices", c.cauchy.slices);
        get(m, "modes", "cauchy.modes", c.cauchy.modes);
        get(m, "gamma", "cauchy.gamma", c.cauchy.gamma);
        get(m, "level", "cauchy.level", c.cauchy.level);
        get(m, "ladder", "cauchy.ladder", c.cauchy.ladder);
        get(m, "horizons", "cauchy.horizons", c.cauchy.horizons);
    }
    if (j.contains("probe")) {
        check_keys(j["probe"], "probe", {"eta_f", "eta_b"});
        get(j["probe"], "eta_f", "probe.eta_f", c.probe.eta_f);
        get(j["probe"], "eta_b", "probe.eta_b", c.probe.eta_b);
    }
    get(j, "tolerances", "tolerances", c.tolerances);
    get(j, "out", "out", c.out);
    get(j, "jobs", "jobs", c.jobs);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

std::string ExperimentConfig::hash() const {
    // FNV-1a over the canonical serialization; output directory, job count and sampling seed excluded
    ExperimentConfig c = *this;
    c.out = "-";
    c.jobs = 0;
    c.montecarlo.seed = 0;  // seed-only changes keep the hash, so their ledgers can be compared
    const std::string s = c.to_json();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ModelSpec build_base_model(const ExperimentConfig& cfg) {
    ModelSpec m;
    if (cfg.model != "inline") {
        m = make_model(cfg.model, cfg.lambda);
    } else {
        const std::vector<std::string> vars{"t", "x1", "x2"};
        auto parse = [&vars](const std::string& text, const char* field) {
            try {
                return Expr(text, vars);
            } catch (const ConfigError& e) {
                throw ConfigError(std::string("config field 'inline.") + field + "': " + e.what());
            }
        };
        const Expr sig = parse(cfg.sigma_expr, "sigma"), f1 = parse(cfg.F1_expr, "F1"), f2 = parse(cfg.F2_expr, "F2");
        m.name = "inline";
        m.sigma1 = [sig](double t, double x1, double x2) { return sig.eval({t, x1, x2}); };
        auto s1 = m.sigma1;
        m.sigma = [s1](double t, const PhasePoint& x) { return Mat::Constant(1, 1, s1(t, x.x1[0], x.x2[0])); };
        m.sigma_constant = !sig.depends_on(0) && !sig.depends_on(1) && !sig.depends_on(2);
        m.sigma_x1_only = !sig.depends_on(0) && !sig.depends_on(2);
        auto trim = [](std::string s) {
            s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
            return s;
        };
        m.kinetic_base = trim(cfg.F1_expr) == "0" && trim(cfg.F2_expr) == "x1";
        if (m.kinetic_base) {
            m.F = VectorFieldSpec::kinetic(1);
        } else {
            m.F.d = 1;
            m.F.F1 = [f1](double t, const PhasePoint& x) { return Vec::Constant(1, f1.eval({t, x.x1[0], x.x2[0]})); };
            m.F.F2 = [f2](double t, const PhasePoint& x) { return Vec::Constant(1, f2.eval({t, x.x1[0], x.x2[0]})); };
            m.F.gradF2 = [f2](double t, const PhasePoint& x) {
                const double h = 1e-6 * std::max(1.0, std::abs(x.x1[0]));
                const double d = (f2.eval({t, x.x1[0] + h, x.x2[0]}) - f2.eval({t, x.x1[0] - h, x.x2[0]})) / (2 * h);
                return Mat::Constant(1, 1, d);
            };
        }
    }
    m.beta = cfg.beta;
    m.nu = cfg.nu;
    m.T = cfg.T;
    m.validate();
    return m;
}

ModelSpec build_model(const ExperimentConfig& cfg) {
    ModelSpec m = build_base_model(cfg);
    if (!cfg.drift.enabled) return m;
    const auto& D = cfg.drift;
    double a = D.amplitude;
    if (D.sup_level > 0) {
        const DriftSpec unit = sample_drift(cfg.beta, D.J_max, D.seed, D.slices, DriftShape::velocity, 1.0,
                                            D.waves_per_shell, D.quantum);
        a = D.amplitude / unit.sup_bound(D.sup_level);
    }
    m.drift = std::make_shared<const DriftSpec>(
        sample_drift(cfg.beta, D.J_max, D.seed, D.slices, DriftShape::velocity, a, D.waves_per_shell, D.quantum));
    return m;
}

}  // namespace kpx
