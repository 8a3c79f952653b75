#include "kpx/cauchy.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace kpx {

namespace {

using cplx = std::complex<double>;

// ∫_a^b (A − τ k2)² dτ
double shear_integral(double A, double k2, double a, double b) {
    return A * A * (b - a) - A * k2 * (b * b - a * a) + k2 * k2 * (b * b * b - a * a * a) / 3.0;
}

double holder_of(const SpectralField& f, double gamma, int nodes_per_octave) {
    BesovNormRequest req;
    req.theta = gamma;
    req.p = INFINITY;
    req.q = INFINITY;
    req.geometry = Geometry::aniso;
    req.nodes_per_octave = nodes_per_octave;
    return thermic_norm(f, req);
}

void check_solver_model(const ModelSpec& m) {
    if (m.d != 1 || !m.kinetic_base || !m.sigma_constant || !m.sigma1)
        throw ConfigError("cauchy solver: needs d = 1, F = (0, x1) and constant σ");
}

}  // namespace

const SpectralField& CauchyData::g_at(double t) const {
    for (size_t i = 0; i + 1 < g_times.size(); ++i)
        if (t < g_times[i + 1]) return g_slices[i];
    return g_slices.back();
}

CauchyData CauchyData::scaled(double a_ell, double a_g) const {
    CauchyData d = *this;
    d.ell = ell.scaled(a_ell);
    for (SpectralField& f : d.g_slices) f = f.scaled(a_g);
    return d;
}

CauchyData CauchyData::zero(double T) {
    CauchyData d;
    d.g_times = {0.0, T};
    return d;
}

SpectralField synth_terminal(double beta, int J, std::uint64_t seed, int waves_per_shell) {
    if (J < 0 || waves_per_shell < 1) throw ConfigError("synth_terminal: need J >= 0 and waves_per_shell >= 1");
    std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 17);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    SpectralField f;
    for (int j = 0; j <= J; ++j)
        for (int w = 0; w < waves_per_shell; ++w) {
            Wave wv;
            wv.shell = j;
            wv.k1 = (U(rng) < 0.5 ? -1.0 : 1.0) * std::ldexp(1.0 + U(rng), j);
            wv.k2 = (U(rng) < 0.5 ? -1.0 : 1.0) * std::ldexp(1.0 + U(rng), j);
            wv.phase = 2.0 * kPi * U(rng);
            wv.amp = std::pow(2.0, -j * (2.0 + beta));
            f.waves.push_back(wv);
        }
    return f;
}

CauchyData synth_source(double beta, int J, std::uint64_t seed, const std::vector<double>& slice_times,
                        int waves_per_shell, double amplitude) {
    const DriftSpec d = sample_drift(beta, J, seed, slice_times, DriftShape::velocity, amplitude, waves_per_shell);
    CauchyData c;
    c.g_times = slice_times;
    c.g_slices = d.slices;
    return c;
}

double MildSolution::eval(int node, const PhasePoint& x) const {
    const double s = times.at(static_cast<size_t>(node));
    const std::vector<cplx>& u = U[static_cast<size_t>(node)];
    double v = 0.0;
    for (size_t f = 0; f < families.size(); ++f) {
        const double k2 = families[f].k2;
        for (int m = 0; m < modes; ++m) {
            const cplx c = u[f * static_cast<size_t>(modes) + m];
            if (c == cplx(0.0)) continue;
            const double eta = families[f].off + q * (m - modes / 2);
            v += (c * std::polar(1.0, (eta + (t - s) * k2) * x.x1[0] + k2 * x.x2[0])).real();
        }
    }
    return v;
}

SpectralField MildSolution::field(int node, double prune) const {
    const double s = times.at(static_cast<size_t>(node));
    const std::vector<cplx>& u = U[static_cast<size_t>(node)];
    double top = 0.0;
    for (const cplx& c : u) top = std::max(top, std::abs(c));
    SpectralField f;
    for (size_t fa = 0; fa < families.size(); ++fa)
        for (int m = 0; m < modes; ++m) {
            const cplx c = u[fa * static_cast<size_t>(modes) + m];
            const double a = std::abs(c);
            if (a <= prune * top || a == 0.0) continue;
            const double eta = families[fa].off + q * (m - modes / 2);
            const double k1 = eta + (t - s) * families[fa].k2;
            if (k1 == 0.0 && families[fa].k2 == 0.0) {
                f.c0 += c.real();
                continue;
            }
            Wave w;
            w.k1 = k1;
            w.k2 = families[fa].k2;
            w.amp = a;
            w.phase = std::arg(c);
            f.waves.push_back(w);
        }
    return f;
}

double MildSolution::holder_norm(int node, double g, int nodes_per_octave) const {
    return holder_of(field(node), g, nodes_per_octave);
}

double MildSolution::sup_holder_norm(double g) const {
    double m = 0.0;
    for (int j = 0; j < nodes(); ++j) m = std::max(m, holder_norm(j, g));
    return m;
}

void MildSolution::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "node,s,holder_norm,u_at_origin\n";
    for (int j = 0; j < nodes(); ++j)
        out << j << ',' << times[static_cast<size_t>(j)] << ',' << holder_norm(j, gamma) << ','
            << eval(j, PhasePoint::d1(0.0, 0.0)) << '\n';
}

SpectralField semigroup_apply(const ModelSpec& model, double s, double t, const SpectralField& phi) {
    check_solver_model(model);
    if (!(t > s)) throw DomainError("semigroup_apply: need s < t");
    const double sg = model.sigma1(0.0, 0.0, 0.0);
    const double D = t - s;
    SpectralField out;
    out.c0 = phi.c0;
    for (const Wave& w : phi.waves) {
        Wave v = w;
        const double var = w.k1 * w.k1 * D + w.k1 * w.k2 * D * D + w.k2 * w.k2 * D * D * D / 3.0;
        v.amp = w.amp * std::exp(-0.5 * sg * sg * var);
        v.k1 = w.k1 + D * w.k2;
        out.waves.push_back(v);
    }
    return out;
}

double semigroup_apply(const ModelSpec& model, double s, double t, const std::function<double(const PhasePoint&)>& phi,
                       const PhasePoint& x, ProxyOptions opt, int grid_n) {
    if (!(t > s)) throw DomainError("semigroup_apply: need s < t");
    opt.with_gradient = false;
    ProxySolver solver(model, s, x, t, opt);
    solver.solve();
    if (!solver.converged()) throw NumericalError("semigroup_apply: proxy solver did not converge");
    const ForwardGrid grid = solver.default_grid(t, grid_n, 8.0);
    const DensityField f = solver.field(t, grid);
    double acc = 0.0;
    for (int i1 = 0; i1 < grid.n; ++i1)
        for (int i2 = 0; i2 < grid.n; ++i2) {
            const double w = (i1 == 0 || i1 == grid.n - 1 ? 0.5 : 1.0) * (i2 == 0 || i2 == grid.n - 1 ? 0.5 : 1.0);
            acc += w * f.at(i1, i2) * phi(grid.point(i1, i2));
        }
    return acc * grid.cell_weight();
}

namespace {

struct Shift {
    int m = 0;
    cplx cplus, cminus;
};
struct DriftSlice {
    std::vector<Shift> shifts;
    double c0 = 0.0;
};

struct Problem {
    const ModelSpec* model = nullptr;
    double sigma = 1.0;
    double t = 1.0;
    double q = 0.5;
    int M = 0;
    std::vector<double> times;
    std::vector<MildSolution::Family> fam;
    std::vector<cplx> ell;  // families × M
    // per interval: source modes and drift
    std::vector<std::vector<std::pair<size_t, cplx>>> src;
    std::vector<DriftSlice> drift;
    // per interval: E, near weight, far weight
    std::vector<std::vector<double>> E, wn, wf;
};

}  // namespace

static Problem build_problem(const ModelSpec& model, int n, const CauchyData& data, double s0, double t,
                             const CauchyOptions& opt) {
    check_solver_model(model);
    if (!(t > s0)) throw DomainError("picard_solve: need s0 < t");
    if (opt.slices < 2 || opt.modes < 16 || opt.modes % 2) throw ConfigError("picard_solve: bad ladder or mode count");
    if (!(opt.gamma > 0.0 && opt.gamma < 2.0)) throw DomainError("picard_solve: gamma must lie in (0, 2)");
    Problem P;
    P.model = &model;
    P.sigma = model.sigma1(0.0, 0.0, 0.0);
    P.t = t;
    P.M = opt.modes;

    // drift slices
    std::vector<double> bt{s0, t};
    std::vector<SpectralField> bf{SpectralField{}};
    if (n > 0 && model.drift) {
        const DriftSpec& d = *model.drift;
        bt = d.slice_times;
        bf.clear();
        for (size_t i = 0; i + 1 < d.slice_times.size(); ++i)
            bf.push_back(d.field(0.5 * (d.slice_times[i] + d.slice_times[i + 1]), n));
        bool waves = false;
        for (const SpectralField& f : bf)
            for (const Wave& w : f.waves) {
                if (w.k2 != 0.0) throw ConfigError("picard_solve: drift must not depend on x2");
                waves = true;
            }
        if (waves) {
            if (!(d.k1_quantum > 0.0)) throw ConfigError("lattice mismatch: drift wavenumbers are not quantized");
            P.q = d.k1_quantum;
        }
    }
    auto slice_of = [](const std::vector<double>& b, double v) {
        for (size_t i = 0; i + 1 < b.size(); ++i)
            if (v < b[i + 1]) return i;
        return b.size() - 2;
    };

    // time ladder
    std::vector<double> ts;
    for (int j = 0; j <= opt.slices; ++j) ts.push_back(s0 + (t - s0) * j / opt.slices);
    for (double b : bt)
        if (b > s0 && b < t) ts.push_back(b);
    for (double b : data.g_times)
        if (b > s0 && b < t) ts.push_back(b);
    std::sort(ts.begin(), ts.end());
    for (double v : ts)
        if (P.times.empty() || v - P.times.back() > 1e-12 * (t - s0)) P.times.push_back(v);
    P.times.back() = t;

    // families
    auto source_of = [&](double v) -> SpectralField {
        const SpectralField& g = data.g_at(v);
        return opt.mollify_source && n > 0 ? mollify(g, n) : g;
    };
    auto family_index = [&](double k1, double k2) -> std::pair<size_t, int> {
        double off = k1 - P.q * std::floor(k1 / P.q);
        if (off > P.q * (1.0 - 1e-9)) off = 0.0;
        size_t f = 0;
        for (; f < P.fam.size(); ++f)
            if (std::abs(P.fam[f].k2 - k2) <= 1e-12 * (1.0 + std::abs(k2)) && std::abs(P.fam[f].off - off) < 1e-9 * P.q)
                break;
        if (f == P.fam.size()) P.fam.push_back({k2, off});
        const int m = static_cast<int>(std::lround((k1 - P.fam[f].off) / P.q)) + P.M / 2;
        if (m < 0 || m >= P.M) throw ConfigError("picard_solve: data frequency beyond the mode window");
        return {f, m};
    };
    std::vector<std::tuple<size_t, int, cplx>> ell_modes;
    family_index(0.0, 0.0);
    ell_modes.emplace_back(0, P.M / 2, cplx(data.ell.c0));
    for (const Wave& w : data.ell.waves) {
        auto [f, m] = family_index(w.k1, w.k2);
        ell_modes.emplace_back(f, m, std::polar(w.amp, w.phase));
    }
    const size_t nint = P.times.size() - 1;
    std::vector<std::vector<std::tuple<size_t, int, cplx>>> src_modes(nint);
    for (size_t j = 0; j < nint; ++j) {
        const SpectralField g = source_of(0.5 * (P.times[j] + P.times[j + 1]));
        src_modes[j].emplace_back(0, P.M / 2, cplx(g.c0));
        for (const Wave& w : g.waves) {
            auto [f, m] = family_index(w.k1, w.k2);
            src_modes[j].emplace_back(f, m, std::polar(w.amp, w.phase));
        }
    }
    const size_t N = P.fam.size() * static_cast<size_t>(P.M);
    P.ell.assign(N, cplx(0.0));
    for (auto& [f, m, c] : ell_modes) P.ell[f * P.M + m] += c;
    P.src.resize(nint);
    for (size_t j = 0; j < nint; ++j)
        for (auto& [f, m, c] : src_modes[j])
            if (c != cplx(0.0)) P.src[j].emplace_back(f * P.M + m, c);

    // drift per interval
    P.drift.resize(nint);
    for (size_t j = 0; j < nint; ++j) {
        const SpectralField& f = bf[slice_of(bt, 0.5 * (P.times[j] + P.times[j + 1]))];
        DriftSlice ds;
        ds.c0 = f.c0;
        for (const Wave& w : f.waves) {
            const double r = w.k1 / P.q;
            if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, std::abs(r)))
                throw ConfigError("lattice mismatch: drift k1 not a multiple of the mode spacing");
            Shift sh;
            sh.m = static_cast<int>(std::lround(r));
            sh.cplus = 0.5 * w.amp * std::polar(1.0, w.phase);
            sh.cminus = std::conj(sh.cplus);
            ds.shifts.push_back(sh);
        }
        P.drift[j] = ds;
    }

    // propagators and ETD weights
    const double hs = 0.5 * P.sigma * P.sigma;
    P.E.assign(nint, std::vector<double>(N));
    P.wn = P.E;
    P.wf = P.E;
    for (size_t j = 0; j < nint; ++j) {
        const double a = P.times[j], b = P.times[j + 1], h = b - a;
        for (size_t f = 0; f < P.fam.size(); ++f)
            for (int m = 0; m < P.M; ++m) {
                const double eta = P.fam[f].off + P.q * (m - P.M / 2);
                const double z = hs * shear_integral(eta + t * P.fam[f].k2, P.fam[f].k2, a, b);
                const double e = std::exp(-z);
                double p1, p2;
                if (z < 1e-3) {
                    p1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
                    p2 = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
                } else {
                    p1 = (1.0 - e) / z;
                    p2 = (z - 1.0 + e) / (z * z);
                }
                const size_t i = f * P.M + m;
                P.E[j][i] = e;
                P.wn[j][i] = h * p2;
                P.wf[j][i] = h * (p1 - p2);
            }
    }
    return P;
}

// F = g − b ∂_{x1} w at time v with the data of interval j
static void forcing(const Problem& P, size_t j, double v, const std::vector<cplx>& w, std::vector<cplx>& F,
                    std::vector<cplx>& tmp) {
    const size_t N = w.size();
    const int M = P.M;
    F.assign(N, cplx(0.0));
    const DriftSlice& d = P.drift[j];
    if (d.c0 != 0.0 || !d.shifts.empty()) {
        for (size_t f = 0; f < P.fam.size(); ++f)
            for (int m = 0; m < M; ++m) {
                const double k1 = P.fam[f].off + P.q * (m - M / 2) + (P.t - v) * P.fam[f].k2;
                tmp[f * M + m] = cplx(0.0, k1) * w[f * M + m];
            }
        for (size_t f = 0; f < P.fam.size(); ++f) {
            const cplx* u = tmp.data() + f * M;
            cplx* o = F.data() + f * M;
            for (int m = 0; m < M; ++m) o[m] = -d.c0 * u[m];
            for (const Shift& sh : d.shifts) {
                for (int m = std::max(0, sh.m); m < std::min(M, M + sh.m); ++m) o[m] -= sh.cplus * u[m - sh.m];
                for (int m = std::max(0, -sh.m); m < std::min(M, M - sh.m); ++m) o[m] -= sh.cminus * u[m + sh.m];
            }
        }
    }
    for (const auto& [i, c] : P.src[j]) F[i] += c;
}

static std::vector<std::vector<cplx>> picard_map(const Problem& P, const std::vector<std::vector<cplx>>& w) {
    const size_t nn = P.times.size();
    const size_t N = P.ell.size();
    std::vector<std::vector<cplx>> out(nn);
    out[nn - 1] = P.ell;
    std::vector<cplx> Fn(N), Ff(N), tmp(N);
    for (size_t jj = nn - 1; jj-- > 0;) {
        forcing(P, jj, P.times[jj], w[jj], Fn, tmp);
        forcing(P, jj, P.times[jj + 1], w[jj + 1], Ff, tmp);
        std::vector<cplx>& o = out[jj];
        o.resize(N);
        const std::vector<cplx>& next = out[jj + 1];
        for (size_t i = 0; i < N; ++i) o[i] = P.E[jj][i] * next[i] - (P.wn[jj][i] * Fn[i] + P.wf[jj][i] * Ff[i]);
    }
    return out;
}

static MildSolution make_solution(const Problem& P, const CauchyOptions& opt) {
    MildSolution s;
    s.t = P.t;
    s.q = P.q;
    s.modes = P.M;
    s.gamma = opt.gamma;
    s.times = P.times;
    s.families = P.fam;
    return s;
}

static std::vector<double> node_norms(const MildSolution& shape, const std::vector<std::vector<cplx>>& w,
                                      const CauchyOptions& opt) {
    MildSolution tmp = shape;
    tmp.U = w;
    std::vector<double> r;
    for (int j = 0; j < tmp.nodes(); ++j) r.push_back(holder_of(tmp.field(j, opt.prune), opt.gamma, opt.nodes_per_octave));
    return r;
}

MildSolution picard_solve(const ModelSpec& model, int n, const CauchyData& data, double s0, double t, CauchyOptions opt) {
    if (opt.rho_ladder.empty()) throw ConfigError("picard_solve: empty rho ladder");
    const Problem P = build_problem(model, n, data, s0, t, opt);
    MildSolution sol = make_solution(P, opt);
    const size_t nn = P.times.size();
    std::vector<std::vector<cplx>> w(nn, std::vector<cplx>(P.ell.size(), cplx(0.0)));

    auto weighted = [&](const std::vector<double>& per_node, double rho) {
        double m = 0.0;
        for (size_t j = 0; j < nn; ++j) m = std::max(m, std::exp(-rho * (t - P.times[j])) * per_node[j]);
        return m;
    };
    auto factor_at = [&](double rho) {
        double f = 0.0;
        const double n0 = weighted(sol.diffs[0], rho);
        for (size_t i = 1; i < sol.diffs.size(); ++i) {
            const double prev = weighted(sol.diffs[i - 1], rho);
            if (prev <= 1e-12 * n0) break;
            f = std::max(f, weighted(sol.diffs[i], rho) / prev);
        }
        return f;
    };
    for (int it = 0; it < opt.max_iter; ++it) {
        std::vector<std::vector<cplx>> next = picard_map(P, w);
        std::vector<std::vector<cplx>> diff(nn);
        for (size_t j = 0; j < nn; ++j) {
            diff[j].resize(next[j].size());
            for (size_t i = 0; i < next[j].size(); ++i) diff[j][i] = next[j][i] - w[j][i];
        }
        sol.diffs.push_back(node_norms(sol, diff, opt));
        w = std::move(next);
        sol.iterations = it + 1;

        sol.contraction.clear();
        sol.rho = 0.0;
        for (double rho : opt.rho_ladder) {
            const double f = factor_at(rho);
            sol.contraction.emplace_back(rho, f);
            if (sol.rho == 0.0 && f < 1.0) {
                sol.rho = rho;
                sol.factor = f;
            }
        }
        const double rho = sol.rho > 0 ? sol.rho : opt.rho_ladder.back();
        const double change = weighted(sol.diffs.back(), rho);
        sol.trace.push_back(change);
        if (sol.iterations >= 3 && sol.rho == 0.0)
            throw DivergenceError("picard_solve: contraction factor >= 1 over the whole rho ladder", sol.trace);
        if (sol.iterations >= 2 || change == 0.0) {
            const double size = weighted(node_norms(sol, w, opt), rho);
            if (change <= opt.tol * size) {
                sol.converged = true;
                break;
            }
        }
    }
    sol.U = w;
    // one more step for the residual
    const std::vector<std::vector<cplx>> again = picard_map(P, w);
    std::vector<std::vector<cplx>> diff(nn);
    for (size_t j = 0; j < nn; ++j) {
        diff[j].resize(again[j].size());
        for (size_t i = 0; i < again[j].size(); ++i) diff[j][i] = again[j][i] - w[j][i];
    }
    const std::vector<double> dn = node_norms(sol, diff, opt);
    const std::vector<double> un = node_norms(sol, w, opt);
    const double top = *std::max_element(un.begin(), un.end());
    sol.residual = top > 0 ? *std::max_element(dn.begin(), dn.end()) / top : 0.0;
    return sol;
}

SchauderInstance schauder_instance(const MildSolution& u, const CauchyData& data, double beta) {
    SchauderInstance s;
    s.ell_norm = holder_of(data.ell, u.gamma, 4);
    for (const SpectralField& g : data.g_slices) s.g_norm = std::max(s.g_norm, holder_of(g, beta, 4));
    s.horizon = u.times.back() - u.times.front();
    s.u_norm = u.sup_holder_norm(u.gamma);
    return s;
}

SchauderFit schauder_fit(const std::vector<SchauderInstance>& battery, double beta, double gamma) {
    SchauderFit fit;
    fit.exponent = 0.5 * (2.0 + beta - gamma);
    for (const SchauderInstance& s : battery) {
        const double rhs = s.ell_norm + std::pow(s.horizon, fit.exponent) * s.g_norm;
        if (rhs > 0) fit.C = std::max(fit.C, s.u_norm / rhs);
        else if (s.u_norm > 0) fit.C = INFINITY;
    }
    return fit;
}

std::vector<StabilityRow> stability_check(const ModelSpec& model, const std::vector<int>& n_ladder,
                                          const CauchyData& data, double s0, double t, CauchyOptions opt) {
    if (n_ladder.size() < 2) throw ConfigError("stability_check: need at least two levels");
    std::vector<MildSolution> sols;
    for (int n : n_ladder) sols.push_back(picard_solve(model, n, data, s0, t, opt));
    std::vector<StabilityRow> rows;
    for (size_t i = 0; i + 1 < sols.size(); ++i) {
        const MildSolution& a = sols[i];
        const MildSolution& b = sols[i + 1];
        if (a.families.size() != b.families.size() || a.times != b.times)
            throw ConfigError("stability_check: solutions on different mode sets");
        std::vector<std::vector<cplx>> d(a.U.size());
        for (size_t j = 0; j < a.U.size(); ++j) {
            d[j].resize(a.U[j].size());
            for (size_t k = 0; k < d[j].size(); ++k) d[j][k] = a.U[j][k] - b.U[j][k];
        }
        const std::vector<double> nrm = node_norms(a, d, opt);
        StabilityRow r;
        r.n = n_ladder[i];
        r.n_next = n_ladder[i + 1];
        r.diff = *std::max_element(nrm.begin(), nrm.end());
        r.drop = rows.empty() || rows.back().diff == 0.0 ? 0.0 : r.diff / rows.back().diff;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace kpx
