#include "kpx/verify.hpp"

#include "kpx/cauchy.hpp"
#include "kpx/envelope.hpp"
#include "kpx/frozen_proxy.hpp"
#include "kpx/parametrix.hpp"
#include "kpx/proxy_solver.hpp"
#include "kpx/quadrature.hpp"
#include "kpx/stochastic.hpp"

#include <json.hpp>

#include <chrono>
#include <ostream>
#include <random>

namespace kpx {

using nlohmann::json;

Gate make_gate(std::string criterion, std::string name, double value, const std::string& relation, double limit,
               std::string note) {
    Gate g;
    g.criterion = std::move(criterion);
    g.name = std::move(name);
    g.value = value;
    g.relation = relation;
    g.limit = limit;
    g.note = std::move(note);
    if (relation == "<=") g.pass = value <= limit;
    else if (relation == "<") g.pass = value < limit;
    else if (relation == ">=") g.pass = value >= limit;
    else if (relation == ">") g.pass = value > limit;
    else throw ConfigError("gate '" + g.name + "': unknown relation " + relation);
    return g;
}

bool SuiteReport::pass() const {
    for (const Gate& g : gates)
        if (!g.pass) return false;
    return true;
}

namespace {

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string SuiteReport::ledger_json(const ExperimentConfig& cfg) const {
    json j;
    j["suite"] = suite;
    j["config_hash"] = cfg.hash();
    j["seed"] = cfg.montecarlo.seed;
    j["seconds"] = seconds;
    j["pass"] = pass();
    json c = json::object();
    for (const auto& [k, v] : constants) c[k] = num_or_null(v);
    j["constants"] = c;
    json gs = json::array();
    for (const Gate& g : gates)
        gs.push_back({{"criterion", g.criterion}, {"name", g.name},     {"value", num_or_null(g.value)},
                      {"relation", g.relation},   {"limit", num_or_null(g.limit)}, {"pass", g.pass},
                      {"note", g.note}});
    j["gates"] = gs;
    return j.dump(2);
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> n{"kernels", "proxy", "parametrix", "besov", "cauchy", "montecarlo"};
    return n;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Mat2 kinetic_cov(double sig2, double dt) {
    Mat2 K;
    K << dt, dt * dt / 2, dt * dt / 2, dt * dt * dt / 3;
    return sig2 * K;
}

ForwardGrid kinetic_grid(double sig2, double dt, const PhasePoint& center, int n, double hw) {
    ForwardGrid g;
    g.center = center;
    g.L = kinetic_cov(sig2, dt).llt().matrixL();
    g.n = n;
    g.half_width = hw;
    return g;
}

double kinetic_gauss(double sig2, double dt, const PhasePoint& x, const PhasePoint& y) {
    const Mat2 K = kinetic_cov(sig2, dt);
    const Vec2 e(y.x1[0] - x.x1[0], y.x2[0] - x.x2[0] - dt * x.x1[0]);
    return std::exp(-0.5 * e.dot(K.inverse() * e)) / (2 * kPi * std::sqrt(K.determinant()));
}

// sup-relative difference on |u|_∞ <= 3 of the grid
double central_sup_relative(const DensityField& a, const DensityField& b) {
    std::vector<double> va, vb;
    for (int i1 = 0; i1 < a.grid.n; ++i1)
        for (int i2 = 0; i2 < a.grid.n; ++i2) {
            if (std::max(std::abs(a.grid.u(i1)), std::abs(a.grid.u(i2))) > 3.0) continue;
            va.push_back(a.at(i1, i2));
            vb.push_back(b.at(i1, i2));
        }
    return sup_relative(va, vb);
}

double spread(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi / *lo;
}

ParametrixOptions parametrix_options(const ExperimentConfig& cfg) {
    ParametrixOptions o;
    o.K = cfg.parametrix.K;
    o.n1 = cfg.parametrix.n1;
    o.n2 = cfg.parametrix.n2;
    o.steps = cfg.parametrix.steps;
    return o;
}

class Logger {
public:
    Logger(std::ostream* os, std::string suite) : os_(os), suite_(std::move(suite)), t0_(Clock::now()) {}
    template <class... A>
    void operator()(const A&... a) const {
        if (!os_) return;
        *os_ << "[" << suite_ << " " << static_cast<long>(since(t0_)) << "s] ";
        (*os_ << ... << a);
        *os_ << std::endl;
    }

private:
    std::ostream* os_;
    std::string suite_;
    Clock::time_point t0_;
};

// ---------------------------------------------------------------- kernels

SuiteReport suite_kernels(const ExperimentConfig& cfg, const Logger& log) {
    SuiteReport r;
    const auto t0 = Clock::now();
    Table mass{"kernel_mass", {"u", "lambda", "mass_deg", "mass_nondeg"}, {}};
    double worst = 0.0;
    std::vector<double> lams{1.0};
    if (cfg.lambda != 1.0) lams.push_back(cfg.lambda);
    for (double u : {0.01, 0.1, 1.0})
        for (double lam : lams) {
            GaussKernelParams p{lam, 1, KernelMode::degenerate};
            const double s1 = std::sqrt(lam * u), s2 = std::sqrt(lam * u * u * u);
            const double m = trapezoid2([&](double a, double b) { return gauss_deg(p, u, PhasePoint::d1(a, b)); },
                                        -12 * s1, 12 * s1, -12 * s2, 12 * s2, 200, 200);
            Vec z(1);
            const double m1 = trapezoid([&](double a) { z[0] = a; return gauss_nondeg(p, u, z); }, -12 * s1, 12 * s1, 200);
            worst = std::max({worst, std::abs(m - 1.0), std::abs(m1 - 1.0)});
            mass.rows.push_back({u, lam, m, m1});
        }
    r.gates.push_back(make_gate("1", "kernel mass defect", worst, "<=", cfg.tol("kernel_mass")));
    r.gates.push_back(make_gate("1", "kernel runtime [s]", since(t0), "<", cfg.tol("kernel_seconds")));
    r.tables.push_back(mass);
    log("kernel mass defect ", worst);

    const ModelSpec m = make_model("kinetic_const", cfg.lambda);
    const FrozenProxy P0(m, 0.0, PhasePoint::d1(0.3, -0.4), 0.0, 1.0);
    Table cov{"frozen_covariance", {"dt", "K11", "K12", "K22", "max_rel_err"}, {}};
    double cov_err = 0.0;
    for (double dt : {1e-3, 1e-2, 0.1, 0.5, 1.0}) {
        const Mat K = P0.frozen_cov(dt, 0.0);
        const Mat2 E = kinetic_cov(cfg.lambda, dt);
        double e = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) e = std::max(e, std::abs(K(i, j) - E(i, j)) / std::abs(E(i, j)));
        cov_err = std::max(cov_err, e);
        cov.rows.push_back({dt, K(0, 0), K(0, 1), K(1, 1), e});
    }
    r.gates.push_back(make_gate("2", "frozen covariance relative error", cov_err, "<=", cfg.tol("frozen_cov")));
    r.tables.push_back(cov);

    const FrozenProxy P(m, 1.0, PhasePoint::d1(0, 0), 0.0, 1.0);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<PhasePoint> sample;
    for (int i = 0; i < 400; ++i) sample.push_back(PhasePoint::d1(nd(rng), nd(rng)));
    Table sc{"scaling_ratio", {"dt", "kappa", "condition"}, {}};
    std::vector<double> kap, cond;
    for (double dt : {1.0, 0.1, 0.01, 1e-3}) {
        std::vector<PhasePoint> scaled;
        const ScaleMatrix T(dt);
        for (const auto& p : sample) scaled.push_back(T.apply(p));
        const ScalingDefect d = scaling_defect(P, 1.0, 1.0 - dt, scaled);
        kap.push_back(d.kappa);
        cond.push_back(d.condition);
        sc.rows.push_back({dt, d.kappa, d.condition});
    }
    const double kap_var = std::max(*std::max_element(kap.begin(), kap.end()) - *std::min_element(kap.begin(), kap.end()),
                                    *std::max_element(cond.begin(), cond.end()) - *std::min_element(cond.begin(), cond.end()));
    r.gates.push_back(make_gate("2", "scaling ratio variation over dt", kap_var, "<=", cfg.tol("scaling_ratio")));
    r.constants["scaling_kappa"] = kap[0];
    r.constants["scaling_condition"] = cond[0];
    r.tables.push_back(sc);
    PlotSpec ps{"scaling ratio against the horizon", "t - s", "kappa", true, false, {}};
    ps.series.push_back({"kappa", {1.0, 0.1, 0.01, 1e-3}, kap});
    r.figures.push_back({"scaling_ratio", svg_line_plot(ps)});
    log("covariance error ", cov_err, ", scaling variation ", kap_var);
    return r;
}

// ---------------------------------------------------------------- proxy

SuiteReport suite_proxy(const ExperimentConfig& cfg, const Logger& log) {
    SuiteReport r;
    const auto t0 = Clock::now();
    const double T = cfg.T;
    const ModelSpec flat = make_model("kinetic_const", cfg.lambda);
    const PhasePoint x = PhasePoint::d1(0.4, -0.2);
    ProxySolver S(flat, 0.0, x, T);
    S.solve();
    const ForwardGrid g = S.default_grid(T, cfg.grid.n, cfg.grid.half_width);
    const DensityField F = proxy_density_series(flat, 0.0, x, T, g, 1);
    std::vector<double> exact;
    for (int i1 = 0; i1 < g.n; ++i1)
        for (int i2 = 0; i2 < g.n; ++i2) exact.push_back(kinetic_gauss(cfg.lambda, T, x, g.point(i1, i2)));
    r.gates.push_back(make_gate("3", "proxy Picard iterations (constant coefficients)", S.iterations(), "<=", 1));
    r.gates.push_back(make_gate("3", "proxy series vs exact Gaussian", sup_relative(F.values, exact), "<=", 1e-8));

    const double c = 0.6;
    const ModelSpec cd = constant_drift_model(c, cfg.lambda);
    ParametrixSeries ps(cd, 4, parametrix_options(cfg));
    const PhasePoint mean = PhasePoint::d1(x.x1[0] + c * T, x.x2[0] + x.x1[0] * T + c * T * T / 2);
    const ForwardGrid gd = kinetic_grid(cfg.lambda, T, mean, cfg.grid.n, cfg.grid.half_width);
    const SingularDensity sd = singular_density(ps, 0.0, x, T, gd, cfg.parametrix.K);
    std::vector<double> shifted;
    for (int i1 = 0; i1 < gd.n; ++i1)
        for (int i2 = 0; i2 < gd.n; ++i2) {
            const PhasePoint y = gd.point(i1, i2);
            shifted.push_back(kinetic_gauss(cfg.lambda, T, x, PhasePoint::d1(y.x1[0] - c * T, y.x2[0] - c * T * T / 2)));
        }
    const double err = sup_relative(sd.field.values, shifted);
    r.gates.push_back(make_gate("3", "constant drift vs shifted Gaussian", err, "<=", cfg.tol("shifted_gaussian")));
    r.gates.push_back(make_gate("3", "collapse runtime [s]", since(t0), "<", cfg.tol("collapse_seconds")));
    log("constant drift error ", err);

    // Aronson fit of the configured diffusion without drift
    const ModelSpec base = build_base_model(cfg);
    const PhasePoint x0 = PhasePoint::d1(0.0, 0.0);
    ProxySolver B(base, 0.0, x0, T);
    B.solve();
    const DensityField fb = B.field(T, B.default_grid(T, cfg.grid.n, cfg.grid.half_width));
    const BoundReport br = aronson_fit(fb, base, 0);
    r.constants["proxy_C"] = br.fit.C;
    r.constants["proxy_lambda"] = br.fit.lambda;
    r.constants["proxy_grad_C"] = br.grad_C;
    r.gates.push_back(make_gate("", "proxy sandwich constant finite", br.fit.C, "<", INFINITY));
    r.figures.push_back({"proxy_density", svg_heatmap("proxy density (b = 0)", fb.grid.n, fb.grid.n, fb.values)});
    log("proxy fit C=", br.fit.C, " lambda=", br.fit.lambda);
    return r;
}

// ---------------------------------------------------------------- parametrix

SuiteReport suite_parametrix(const ExperimentConfig& cfg, const Logger& log) {
    SuiteReport r;
    const ModelSpec m = build_model(cfg);
    const ParametrixOptions po = parametrix_options(cfg);
    const int K = cfg.parametrix.K;
    const double T = cfg.T;
    const PhasePoint x0 = PhasePoint::d1(0.0, 0.0);
    const int nmax = cfg.n_ladder.back();

    const auto t5 = Clock::now();
    Table uni{"uniformity",
              {"n", "C", "lambda", "C_upper", "lambda_upper", "C_lower", "lambda_lower", "grad_C", "h_sup", "mass", "tail"},
              {}};
    std::vector<double> Cs, Ls, Gs, Hs, ns;
    std::unique_ptr<ParametrixSeries> top;
    DensityField top_density;
    BoundReport top_fit;
    bool central_positive = true;
    for (int n : cfg.n_ladder) {
        auto ps = std::make_unique<ParametrixSeries>(m, n, po);
        const double sig2 = ps->sigma() * ps->sigma();
        const PhasePoint th = transported_mean(m, n, 0.0, x0, T);
        const ForwardGrid g = kinetic_grid(sig2, T, th, cfg.grid.n, cfg.grid.half_width);
        const SingularDensity sd = singular_density(*ps, 0.0, x0, T, g, K, true);
        BoundReport br;
        try {
            br = aronson_fit(sd.field, m, n);
        } catch (const NumericalError& e) {
            central_positive = false;
            log("n=", n, ": ", e.what());
            continue;
        }
        double h = 0.0;
        for (const HNormPoint& hp : h_norm_diagnostic(*ps, x0, cfg.probe.eta_f, {T / 4, T / 2, T}, 1.0, 1000, K))
            h = std::max(h, hp.h());
        uni.rows.push_back({double(n), br.fit.C, br.fit.lambda, br.fit.C_upper, br.fit.lambda_upper, br.fit.C_lower,
                            br.fit.lambda_lower, br.grad_C, h, sd.field.mass(), sd.tail});
        ns.push_back(n);
        Cs.push_back(br.fit.C);
        Ls.push_back(br.fit.lambda);
        Gs.push_back(br.grad_C);
        Hs.push_back(h);
        r.constants["C_n" + std::to_string(n)] = br.fit.C;
        r.constants["lambda_n" + std::to_string(n)] = br.fit.lambda;
        r.constants["grad_C_n" + std::to_string(n)] = br.grad_C;
        r.constants["h_sup_n" + std::to_string(n)] = h;
        log("n=", n, " C=", br.fit.C, " lambda=", br.fit.lambda, " grad_C=", br.grad_C, " h=", h,
            " mass=", sd.field.mass());
        if (n == nmax) {
            top = std::move(ps);
            top_density = sd.field;
            top_fit = br;
        }
    }
    const double fac = cfg.tol("uniformity_factor");
    if (Cs.size() == cfg.n_ladder.size()) {
        r.gates.push_back(make_gate("5", "Aronson C spread over n", spread(Cs), "<", fac));
        r.gates.push_back(make_gate("5", "Aronson lambda spread over n", spread(Ls), "<", fac));
        r.gates.push_back(make_gate("5", "gradient constant spread over n", spread(Gs), "<", fac));
        r.gates.push_back(make_gate("5", "h-norm sup spread over n", spread(Hs), "<", fac));
    } else {
        r.gates.push_back(make_gate("5", "fits available for every n", double(Cs.size()), ">=", double(cfg.n_ladder.size())));
    }
    r.gates.push_back(make_gate("5", "uniformity runtime [s]", since(t5), "<", cfg.tol("uniformity_seconds")));
    r.tables.push_back(uni);
    {
        PlotSpec p{"constants along the n-ladder (relative to the first level)", "n", "value / value(n_0)", true, false, {}};
        auto rel = [](std::vector<double> v) {
            const double a = v.empty() ? 1.0 : v[0];
            for (double& x : v) x /= a;
            return v;
        };
        p.series = {{"C", ns, rel(Cs)}, {"lambda", ns, rel(Ls)}, {"grad C", ns, rel(Gs)}, {"h sup", ns, rel(Hs)}};
        r.figures.push_back({"uniformity", svg_line_plot(p)});
    }

    r.gates.push_back(make_gate("6", "central density positive at every level", central_positive ? 1.0 : 0.0, ">=", 1.0));
    if (top) {
        r.gates.push_back(make_gate("6", "sandwich C at largest n", top_fit.fit.C, "<", INFINITY));
        r.gates.push_back(make_gate("6", "sandwich lambda at largest n", top_fit.fit.lambda, "<", INFINITY));
        r.constants["sandwich_C_upper"] = top_fit.fit.C_upper;
        r.constants["sandwich_C_lower"] = top_fit.fit.C_lower;
        r.constants["sandwich_tail_ratio"] = top_fit.tail_ratio;
        r.figures.push_back({"density_n" + std::to_string(nmax),
                             svg_heatmap("parametrix density, n = " + std::to_string(nmax), top_density.grid.n,
                                         top_density.grid.n, top_density.values)});
    }

    // envelope of the φ terms
    const auto t4 = Clock::now();
    ParametrixOptions pe = po;
    pe.n2 = cfg.parametrix.n2_envelope;
    const ParametrixSeries pse(m, nmax, pe);
    const TermEnvelope env = term_envelopes(pse, 0.0, T, K);
    Table et{"term_envelope", {"k", "sup_ratio_k", "ratio_k+2/k", "bound"}, {}};
    double worst = 0.0;
    for (size_t k = 0; k < env.ratio.size(); ++k) {
        worst = std::max(worst, env.ratio[k] / env.bound[k]);
        et.rows.push_back({double(k), env.sup_ratio[k], env.ratio[k], env.bound[k]});
    }
    r.constants["K_n"] = env.K_n;
    r.gates.push_back(make_gate("4", "max term ratio / factorial bound", worst, "<=", cfg.tol("envelope_factor")));
    r.gates.push_back(make_gate("4", "envelope runtime [s]", since(t4), "<", cfg.tol("envelope_seconds")));
    r.tables.push_back(et);
    {
        PlotSpec p{"term ratios against the factorial bound", "k", "ratio", false, true, {}};
        std::vector<double> ks, ra, bo;
        for (size_t k = 0; k < env.ratio.size(); ++k) {
            ks.push_back(double(k));
            ra.push_back(env.ratio[k]);
            bo.push_back(env.bound[k]);
        }
        p.series = {{"|phi_k+2| / |phi_k|", ks, ra}, {"bound", ks, bo}};
        r.figures.push_back({"term_envelope", svg_line_plot(p)});
    }
    log("envelope K_n=", env.K_n, " worst ratio/bound=", worst);

    // Hölder probes on the density at the largest level
    if (top) {
        const SweepOutput sw = top->sweep(0.0, x0, T, false);
        const ForwardGrid& g = top_density.grid;
        std::vector<PhasePoint> ys;
        for (double u1 : {-1.0, 0.0, 1.0})
            for (double u2 : {-1.0, 0.0, 1.0}) ys.push_back(g.point_u(u1, u2));
        const double lam_env = po.lambda_env;
        const ParametrixSeries* ps = top.get();
        auto kernel = [ps, lam_env, T](const PhasePoint& a, const PhasePoint& y) {
            return ps->reference_density(lam_env, 0.0, a, T, y);
        };
        auto fwd = [&sw, K](const PhasePoint&, const PhasePoint& y) { return sw.partial_sum(K, y); };
        // p(s, x + (0, h), t, y) = p(s, x, t, y − (0, h)) (no x2 dependence in the coefficients)
        auto bwd = [&sw, K, x0](const PhasePoint& a, const PhasePoint& y) {
            return sw.partial_sum(K, PhasePoint::d1(y.x1[0], y.x2[0] - (a.x2[0] - x0.x2[0])));
        };
        const ProbeResult pf = holder_probe(fwd, HolderVariable::forward, cfg.probe.eta_f, 0.0, T, x0, ys, kernel);
        const ProbeResult pb = holder_probe(bwd, HolderVariable::backward_x2, cfg.probe.eta_b, 0.0, T, x0, ys, kernel);
        r.gates.push_back(make_gate("7", "forward slope", pf.slope, ">=", cfg.probe.eta_f - cfg.tol("forward_slack")));
        r.gates.push_back(make_gate("7", "backward-x2 slope", pb.slope, ">=",
                                    (1.0 + cfg.probe.eta_b) / 3.0 - cfg.tol("backward_slack")));
        r.constants["holder_forward_constant"] = pf.constant;
        r.constants["holder_backward_x2_constant"] = pb.constant;
        r.constants["holder_forward_slope"] = pf.slope;
        r.constants["holder_backward_x2_slope"] = pb.slope;
        Table ht{"holder_probes", {"distance_forward", "increment_forward", "distance_x2", "increment_x2"}, {}};
        for (size_t i = 0; i < pf.distances.size(); ++i)
            ht.rows.push_back({pf.distances[i], pf.increments[i], pb.distances[i], pb.increments[i]});
        r.tables.push_back(ht);
        PlotSpec p{"Hoelder probes (log-log)", "perturbation", "max increment", true, true, {}};
        p.series = {{"forward |.|_d", pf.distances, pf.increments}, {"backward |x2 - x2'|", pb.distances, pb.increments}};
        r.figures.push_back({"holder_probes", svg_line_plot(p)});
        log("forward slope ", pf.slope, ", backward-x2 slope ", pb.slope);
    }
    return r;
}

// ---------------------------------------------------------------- besov

GridField bump_field(double a, double b, double s1, double s2) {
    return GridField::sample(128, 128, 16.0, 16.0, [=](double x1, double x2) {
        return std::exp(-0.5 * (x1 * x1 / (s1 * s1) + x2 * x2 / (s2 * s2))) * std::cos(a * x1 + b * x2);
    });
}

SuiteReport suite_besov(const ExperimentConfig& cfg, const Logger& log) {
    SuiteReport r;
    Table shells{"shell_scaling", {"theta", "j", "log2_thermic", "log2_lp"}, {}};
    PlotSpec sp{"single-shell norms", "j", "log2 norm", false, false, {}};
    double worst = 0.0;
    for (double theta : {-0.25, 0.5}) {
        std::vector<double> js, th, lp;
        for (int j = 4; j <= 9; ++j) {
            SpectralField f;
            const double k1 = 1.3 * std::ldexp(1.0, j);
            f.waves.push_back({k1, k1 * k1 * k1, 1.0, 0.3, j});
            js.push_back(j);
            th.push_back(std::log2(thermic_norm(f, {theta})));
            lp.push_back(std::log2(lp_norm_aniso(f, theta, INFINITY, INFINITY)));
            shells.rows.push_back({theta, double(j), th.back(), lp.back()});
        }
        const double a = linear_fit(js, th).slope, b = linear_fit(js, lp).slope;
        worst = std::max({worst, std::abs(a - theta), std::abs(b - theta)});
        sp.series.push_back({"thermic theta=" + std::to_string(theta).substr(0, 5), js, th});
        sp.series.push_back({"LP theta=" + std::to_string(theta).substr(0, 5), js, lp});
    }
    r.gates.push_back(make_gate("8", "shell slope error", worst, "<=", cfg.tol("shell_slope")));
    r.tables.push_back(shells);
    r.figures.push_back({"shell_scaling", svg_line_plot(sp)});

    Table eq{"equivalence", {"theta", "field", "ratio"}, {}};
    double worst_eq = 0.0;
    for (double theta : {-0.25, 0.5}) {
        int idx = 0;
        for (int i = 0; i < 10; ++i, ++idx) {
            const auto d = sample_drift(-0.1 - 0.035 * i, 4 + i % 7, 100 + i, {0, 1},
                                        i % 2 ? DriftShape::anisotropic : DriftShape::velocity);
            const double q = lp_norm_aniso(d.slices[0], theta, INFINITY, INFINITY) / thermic_norm(d.slices[0], {theta});
            worst_eq = std::max({worst_eq, q, 1.0 / q});
            eq.rows.push_back({theta, double(idx), q});
        }
        for (int i = 0; i < 10; ++i, ++idx) {
            const GridField g = bump_field(0.5 * i, 0.3 * (i % 4), 0.6 + 0.1 * i, 1.0 + 0.05 * i);
            const double p = i % 2 ? 1.0 : INFINITY;
            const double q = lp_norm_aniso(g, theta, p, INFINITY) / thermic_norm(g, {theta, p, INFINITY});
            worst_eq = std::max({worst_eq, q, 1.0 / q});
            eq.rows.push_back({theta, double(idx), q});
        }
    }
    r.constants["equivalence_constant"] = worst_eq;
    r.gates.push_back(make_gate("8", "LP/thermic equivalence constant", worst_eq, "<=", cfg.tol("equivalence_constant")));
    r.tables.push_back(eq);
    log("shell slope error ", worst, ", equivalence constant ", worst_eq);

    const int J = 10;
    const auto d = sample_drift(cfg.beta, J, cfg.drift.seed, {0, 1});
    std::vector<int> nl;
    for (int n = 2; n <= (1 << (J + 1)); n *= 2) nl.push_back(n);
    const MollificationTable mt = mollification_convergence(d, cfg.beta - 0.1, nl);
    Table mo{"mollification", {"n", "defect", "relative"}, {}};
    std::vector<double> xs, ys;
    double at_top = NAN;
    for (const auto& row : mt.rows) {
        mo.rows.push_back({double(row.n), row.defect, row.relative});
        xs.push_back(row.n);
        ys.push_back(row.relative);
        if (row.n == (1 << J)) at_top = row.relative;
    }
    r.gates.push_back(make_gate("8", "mollification defect non-increasing", mt.non_increasing() ? 1.0 : 0.0, ">=", 1.0));
    r.gates.push_back(make_gate("8", "relative mollification defect at n = 2^J", at_top, "<", cfg.tol("mollification_relative")));
    r.constants["mollification_C"] = mt.fitted_C;
    r.tables.push_back(mo);
    PlotSpec mp{"mollification defect in B^{beta-0.1}", "n", "relative defect", true, true, {{"defect", xs, ys}}};
    r.figures.push_back({"mollification", svg_line_plot(mp)});
    log("mollification relative defect at 2^", J, ": ", at_top);
    return r;
}

// ---------------------------------------------------------------- cauchy

SuiteReport suite_cauchy(const ExperimentConfig& cfg, const Logger& log) {
    SuiteReport r;
    const ModelSpec m = build_model(cfg);
    const double T = cfg.T;
    CauchyOptions o;
    o.slices = cfg.cauchy.slices;
    o.modes = cfg.cauchy.modes;
    o.gamma = cfg.cauchy.gamma;
    CauchyData data = synth_source(cfg.beta, 6, 3, cfg.drift.slices, 2);
    data.ell = synth_terminal(cfg.beta, 4, 5);

    const MildSolution u = picard_solve(m, cfg.cauchy.level, data, 0.0, T, o);
    r.gates.push_back(make_gate("9", "fixed-point residual", u.residual, "<", cfg.tol("cauchy_residual")));
    double f64 = u.contraction.back().second;
    for (const auto& [rho, f] : u.contraction)
        if (rho == 64.0) f64 = f;
    r.gates.push_back(make_gate("9", "contraction factor at rho = 64", f64, "<=", cfg.tol("contraction_factor")));
    r.constants["contraction_rho64"] = f64;
    r.constants["picard_iterations"] = u.iterations;
    Table tr{"picard_trace", {"iteration", "weighted_change"}, {}};
    for (size_t i = 0; i < u.trace.size(); ++i) tr.rows.push_back({double(i), u.trace[i]});
    r.tables.push_back(tr);
    log("residual ", u.residual, ", factor(64) ", f64, ", iterations ", u.iterations);

    CauchyOptions ho = o;
    ho.modes = std::max(2048, o.modes);
    const CauchyData g = synth_source(cfg.beta, 7, 9, {0.0, T}, 2);
    std::vector<double> lh, ln;
    std::vector<SchauderInstance> battery;
    Table hz{"horizon_sweep", {"horizon", "holder_norm"}, {}};
    for (double h : cfg.cauchy.horizons) {
        const MildSolution s = picard_solve(m, cfg.cauchy.level, g, 0.0, h, ho);
        const double nrm = s.sup_holder_norm(cfg.cauchy.gamma);
        lh.push_back(std::log(h));
        ln.push_back(std::log(nrm));
        hz.rows.push_back({h, nrm});
        battery.push_back(schauder_instance(s, g, cfg.beta));
    }
    const double slope = linear_fit(lh, ln).slope;
    const double target = (2.0 + cfg.beta - cfg.cauchy.gamma) / 2.0;
    r.gates.push_back(make_gate("9", "horizon slope deviation from (2+beta-gamma)/2", std::abs(slope - target), "<=",
                                cfg.tol("horizon_slope"), "slope " + std::to_string(slope)));
    r.constants["horizon_slope"] = slope;
    r.constants["schauder_C"] = schauder_fit(battery, cfg.beta, cfg.cauchy.gamma).C;
    r.tables.push_back(hz);
    {
        std::vector<double> hs, vs;
        for (const auto& row : hz.rows) {
            hs.push_back(row[0]);
            vs.push_back(row[1]);
        }
        PlotSpec p{"Schauder horizon sweep", "t - s", "sup C^gamma norm", true, true, {{"measured", hs, vs}}};
        r.figures.push_back({"horizon_sweep", svg_line_plot(p)});
    }
    log("horizon slope ", slope, " (target ", target, ")");

    const std::vector<StabilityRow> rows = stability_check(m, cfg.cauchy.ladder, data, 0.0, T, o);
    Table st{"stability", {"n", "n_next", "diff", "drop"}, {}};
    double worst_drop = 0.0;
    std::vector<double> nn, dd;
    for (size_t i = 0; i < rows.size(); ++i) {
        st.rows.push_back({double(rows[i].n), double(rows[i].n_next), rows[i].diff, rows[i].drop});
        nn.push_back(rows[i].n);
        dd.push_back(rows[i].diff);
        if (i > 0) worst_drop = std::max(worst_drop, rows[i].drop);
        r.constants["stability_diff_n" + std::to_string(rows[i].n)] = rows[i].diff;
    }
    r.gates.push_back(make_gate("9", "largest diff ratio per doubling", worst_drop, "<=", 1.0 - cfg.tol("stability_drop")));
    r.tables.push_back(st);
    PlotSpec p{"n-ladder stability", "n", "||u(n) - u(2n)||", true, true, {{"difference", nn, dd}}};
    r.figures.push_back({"stability", svg_line_plot(p)});
    log("worst stability ratio ", worst_drop);
    return r;
}

// ---------------------------------------------------------------- montecarlo

SuiteReport suite_montecarlo(const ExperimentConfig& cfg, const Logger& log) {
    SuiteReport r;
    const ModelSpec m = build_model(cfg);
    const double T = cfg.T;
    const int nmax = cfg.n_ladder.back();
    const int K = cfg.parametrix.K;
    const PhasePoint x0 = PhasePoint::d1(0.0, 0.0);

    const auto t6 = Clock::now();
    const ParametrixSeries ps(m, nmax, parametrix_options(cfg));
    const PhasePoint th = transported_mean(m, nmax, 0.0, x0, T);
    const ForwardGrid g = kinetic_grid(ps.sigma() * ps.sigma(), T, th, cfg.grid.n, cfg.grid.half_width);
    const SingularDensity sd = singular_density(ps, 0.0, x0, T, g, K);
    log("parametrix density ready");

    SimConfig sc;
    sc.t = T;
    sc.x = x0;
    sc.N = cfg.montecarlo.paths;
    sc.M = cfg.montecarlo.steps;
    sc.seed = cfg.montecarlo.seed;
    sc.n = nmax;
    sc.jobs = cfg.jobs;
    const SimulationRun run = euler_maruyama(m, sc);
    const DensityField kde = kde_density(run, g);
    const double agree = central_sup_relative(kde, sd.field);
    r.gates.push_back(make_gate("6", "KDE vs parametrix (central region)", agree, "<=", cfg.tol("kde_agreement")));
    r.gates.push_back(make_gate("6", "sandwich + KDE runtime [s]", since(t6), "<", cfg.tol("sandwich_seconds")));
    const BoundReport kb = aronson_fit(kde, m, nmax);
    r.constants["kde_C"] = kb.fit.C;
    r.constants["kde_lambda"] = kb.fit.lambda;
    r.constants["kde_agreement"] = agree;
    r.figures.push_back({"kde_density", svg_heatmap("KDE density", g.n, g.n, kde.values)});
    {
        Table kt{"kde_vs_parametrix", {"i1", "i2", "y1", "y2", "parametrix", "kde"}, {}};
        for (int i1 = 0; i1 < g.n; ++i1)
            for (int i2 = 0; i2 < g.n; ++i2) {
                const PhasePoint y = g.point(i1, i2);
                kt.rows.push_back({double(i1), double(i2), y.x1[0], y.x2[0], sd.field.at(i1, i2), kde.at(i1, i2)});
            }
        r.tables.push_back(kt);
    }
    log("KDE agreement ", agree);

    // weak bias: M/2 steps on the same Brownian paths against an independent M-step run
    SimConfig bc = sc;
    bc.N = cfg.montecarlo.bias_paths;
    bc.seed = cfg.montecarlo.seed + 1;
    const DensityField A = kde_density(euler_maruyama(m, bc), g);
    SimConfig cc = bc;
    cc.M = sc.M / 2;
    cc.coarsen = 2;
    const DensityField C = kde_density(euler_maruyama(m, cc), g);
    bc.seed = cfg.montecarlo.seed + 2;
    const DensityField B = kde_density(euler_maruyama(m, bc), g);
    const double bias = central_sup_relative(C, A);
    const double noise_pair = central_sup_relative(B, A);
    // one KDE's noise at the main sample size, N^{-1/3} scaling
    const double floor = noise_pair / std::sqrt(2.0) *
                         std::cbrt(static_cast<double>(cfg.montecarlo.bias_paths) / static_cast<double>(cfg.montecarlo.paths));
    r.gates.push_back(make_gate("", "Euler weak bias / KDE noise floor", bias / floor, "<=", cfg.tol("weak_bias_fraction"),
                                "step-doubling on shared paths"));
    r.constants["weak_bias"] = bias;
    r.constants["kde_noise_floor"] = floor;
    log("weak bias ", bias, ", noise floor ", floor);

    // martingale defect
    SimConfig mc;
    mc.N = cfg.montecarlo.martingale_paths;
    mc.M = cfg.montecarlo.steps;
    mc.seed = cfg.montecarlo.seed + 3;
    mc.x = PhasePoint::d1(0.1, -0.2);
    mc.jobs = cfg.jobs;
    CauchyOptions co;
    co.slices = cfg.cauchy.slices;
    co.modes = cfg.cauchy.modes;
    co.gamma = cfg.cauchy.gamma;
    CauchyData d = CauchyData::zero(T);
    d.ell = synth_terminal(cfg.beta, 3, 5);
    const ModelSpec flat = build_base_model(cfg);
    const MildSolution up = picard_solve(flat, 0, d, 0.0, T, co);
    const DefectResult pos = martingale_defect(flat, 0, up, d, mc, up.nodes() / 2);
    const int lev = cfg.cauchy.level;
    const MildSolution wrong = picard_solve(m, 0, d, 0.0, T, co);
    const DefectResult neg = martingale_defect(m, lev, wrong, d, mc, wrong.nodes() / 2);
    const MildSolution right = picard_solve(m, lev, d, 0.0, T, co);
    const DefectResult cor = martingale_defect(m, lev, right, d, mc, right.nodes() / 2);
    r.gates.push_back(make_gate("10", "positive control max |t|", pos.max_abs_t, "<", cfg.tol("martingale_positive")));
    r.gates.push_back(make_gate("10", "negative control max |t|", neg.max_abs_t, ">", cfg.tol("martingale_negative")));
    r.gates.push_back(make_gate("", "drift-coupled u max |t|", cor.max_abs_t, "<", cfg.tol("martingale_positive")));
    Table mt{"martingale_defect", {"control", "feature", "mean", "se", "t"}, {}};
    int ci = 0;
    for (const DefectResult* dr : {&pos, &neg, &cor}) {
        for (size_t k = 0; k < dr->mean.size(); ++k)
            mt.rows.push_back({double(ci), double(k), dr->mean[k], dr->se[k],
                               dr->se[k] > 0 ? dr->mean[k] / dr->se[k] : 0.0});
        ++ci;
    }
    r.tables.push_back(mt);
    log("martingale |t|: positive ", pos.max_abs_t, ", negative ", neg.max_abs_t, ", coupled ", cor.max_abs_t);
    return r;
}

}  // namespace

SuiteReport run_suite(const std::string& suite, const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const Logger lg(log, suite);
    const auto t0 = Clock::now();
    SuiteReport r;
    if (suite == "kernels") r = suite_kernels(cfg, lg);
    else if (suite == "proxy") r = suite_proxy(cfg, lg);
    else if (suite == "parametrix") r = suite_parametrix(cfg, lg);
    else if (suite == "besov") r = suite_besov(cfg, lg);
    else if (suite == "cauchy") r = suite_cauchy(cfg, lg);
    else if (suite == "montecarlo") r = suite_montecarlo(cfg, lg);
    else throw ConfigError("unknown suite '" + suite + "'");
    r.suite = suite;
    r.seconds = since(t0);
    return r;
}

CompareResult compare_ledgers(const std::string& json_a, const std::string& json_b, double threshold) {
    json a, b;
    try {
        a = json::parse(json_a);
        b = json::parse(json_b);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("ledger is not valid JSON: ") + e.what());
    }
    if (!a.contains("config_hash") || !b.contains("config_hash") || !a.contains("constants") || !b.contains("constants"))
        throw ConfigError("ledger lacks config_hash or constants");
    if (a["config_hash"] != b["config_hash"])
        throw ConfigError("ledgers come from different configurations (" + a["config_hash"].get<std::string>() + " vs " +
                          b["config_hash"].get<std::string>() + ")");
    CompareResult res;
    const json& ca = a["constants"];
    const json& cb = b["constants"];
    for (auto it = ca.begin(); it != ca.end(); ++it) {
        if (!cb.contains(it.key())) {
            res.missing.push_back(it.key());
            continue;
        }
        DriftRow row;
        row.key = it.key();
        row.a = it.value().is_number() ? it.value().get<double>() : NAN;
        row.b = cb[it.key()].is_number() ? cb[it.key()].get<double>() : NAN;
        const double den = std::max(std::abs(row.a), std::abs(row.b));
        row.drift = row.a == row.b ? 0.0 : (den > 0 ? std::abs(row.a - row.b) / den : INFINITY);
        if (std::isnan(row.a) && std::isnan(row.b)) row.drift = 0.0;
        row.pass = row.drift <= threshold;
        res.pass = res.pass && row.pass;
        res.rows.push_back(row);
    }
    for (auto it = cb.begin(); it != cb.end(); ++it)
        if (!ca.contains(it.key())) res.missing.push_back(it.key());
    return res;
}

}  // namespace kpx
