#include "kpx/besov.hpp"

#include "kpx/fft.hpp"
#include "kpx/flows.hpp"
#include "kpx/quadrature.hpp"

#include <json.hpp>

#include <algorithm>
#include <random>

namespace kpx {

namespace {

constexpr double kTableMax = 1000.0;
constexpr double kTableStep = 0.05;

std::vector<double> build_table() {
    const int n = static_cast<int>(kTableMax / kTableStep) + 4;
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = bump_transform_direct(i * kTableStep);
    return t;
}

}  // namespace

double bump_transform_direct(double k) {
    static const Rule r = gauss_legendre(1024, -1.0, 1.0);
    static const double Z = [] {
        double s = 0;
        for (int i = 0; i < r.size(); ++i) s += r.w[i] * bump_density_1d(r.x[i]);
        return s;
    }();
    double s = 0.0;
    for (int i = 0; i < r.size(); ++i) s += r.w[i] * bump_density_1d(r.x[i]) * std::cos(k * r.x[i]);
    return s / Z;
}

double bump_transform(double k) {
    static const std::vector<double> table = build_table();
    k = std::abs(k);
    if (k >= kTableMax) return 0.0;
    // 6-point Lagrange on the uniform table
    const double u = k / kTableStep;
    int i0 = static_cast<int>(std::floor(u)) - 2;
    double out = 0.0;
    for (int a = 0; a < 6; ++a) {
        const int ia = i0 + a;
        double w = 1.0;
        for (int b = 0; b < 6; ++b)
            if (b != a) w *= (u - (i0 + b)) / double(a - b);
        // the transform is even: reflect negative indices
        out += w * table[std::abs(ia)];
    }
    return out;
}

double SpectralField::eval(double x1, double x2) const {
    double s = c0;
    for (const Wave& w : waves) s += w.amp * std::cos(w.k1 * x1 + w.k2 * x2 + w.phase);
    return s;
}

double SpectralField::dx1(double x1, double x2) const {
    double s = 0.0;
    for (const Wave& w : waves) s -= w.amp * w.k1 * std::sin(w.k1 * x1 + w.k2 * x2 + w.phase);
    return s;
}

bool SpectralField::is_zero() const {
    if (c0 != 0.0) return false;
    for (const Wave& w : waves)
        if (w.amp != 0.0) return false;
    return true;
}

SpectralField SpectralField::scaled(double c) const {
    SpectralField f = *this;
    f.c0 *= c;
    for (Wave& w : f.waves) w.amp *= c;
    return f;
}

SpectralField SpectralField::minus(const SpectralField& o) const {
    SpectralField f = *this;
    f.c0 -= o.c0;
    for (Wave w : o.waves) {
        auto it = std::find_if(f.waves.begin(), f.waves.end(), [&](const Wave& a) {
            return a.k1 == w.k1 && a.k2 == w.k2 && a.phase == w.phase;
        });
        if (it != f.waves.end()) {
            it->amp -= w.amp;
        } else {
            w.amp = -w.amp;
            f.waves.push_back(w);
        }
    }
    return f;
}

GridField GridField::sample(int n1, int n2, double L1, double L2, const std::function<double(double, double)>& f) {
    GridField g;
    g.n1 = n1;
    g.n2 = n2;
    g.L1 = L1;
    g.L2 = L2;
    g.v.resize(static_cast<size_t>(n1) * n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) g.at(i, j) = f(g.x1(i), g.x2(j));
    return g;
}

namespace {

struct Spectrum {
    std::vector<cplx> c;
    std::vector<double> k1, k2;  // per row / per column of the half spectrum
};

Spectrum spectrum_of(RealFft2D& fft, const GridField& f) {
    Spectrum s;
    fft.forward(f.v, s.c);
    s.k1.resize(f.n1);
    s.k2.resize(fft.n2c());
    for (int i = 0; i < f.n1; ++i) s.k1[i] = fft_freq(i, f.n1, f.L1);
    for (int j = 0; j < fft.n2c(); ++j) s.k2[j] = 2.0 * kPi * j / f.L2;
    return s;
}

template <class M>
std::vector<double> filtered(RealFft2D& fft, const Spectrum& s, M m) {
    std::vector<cplx> c = s.c;
    const int n2c = fft.n2c();
    for (size_t i = 0; i < s.k1.size(); ++i)
        for (int j = 0; j < n2c; ++j) c[i * n2c + j] *= m(s.k1[i], s.k2[j]);
    std::vector<double> out;
    fft.backward(c, out);
    return out;
}

double lp(const std::vector<double>& v, double p, double cell) {
    if (std::isinf(p)) {
        double m = 0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    if (p != 1.0) throw ConfigError("only p in {1, inf} is implemented");
    double s = 0;
    for (double x : v) s += std::abs(x);
    return s * cell;
}

void check_request(const BesovNormRequest& r) {
    if (r.theta >= 2.0)
        throw UnsupportedOrder("thermic norm with theta >= 2 needs a higher thermic order; not provided");
    if (!(std::isinf(r.p) || r.p == 1.0) || !(std::isinf(r.q) || r.q == 1.0))
        throw ConfigError("thermic norm: p, q must be 1 or inf");
}

double heat(double v, double k1, double k2, Geometry g) {
    return g == Geometry::aniso ? std::exp(-0.5 * (v * k1 * k1 + v * v * v * k2 * k2))
                                : std::exp(-0.5 * v * (k1 * k1 + k2 * k2));
}

double heat_dv(double v, double k1, double k2, Geometry g) {
    const double e = heat(v, k1, k2, g);
    return g == Geometry::aniso ? -0.5 * (k1 * k1 + 3.0 * v * v * k2 * k2) * e : -0.5 * (k1 * k1 + k2 * k2) * e;
}

double gauge(double k1, double k2, Geometry g) {
    return g == Geometry::aniso ? std::abs(k1) + std::cbrt(std::abs(k2)) : std::hypot(k1, k2);
}

std::vector<double> v_grid(double kmax_gauge, const BesovNormRequest& r) {
    double vmin = r.v_min;
    if (vmin <= 0) {
        const int J = std::max(0, static_cast<int>(std::ceil(std::log2(std::max(kmax_gauge, 1.0)))));
        vmin = std::min(std::pow(4.0, -(J + 2)), 1e-2);
    }
    const double octaves = std::log2(1.0 / vmin);
    const int n = std::max(24, static_cast<int>(std::ceil(r.nodes_per_octave * octaves)) + 1);
    return logspace(vmin, 1.0, n);
}

// q-aggregation of v^{1−θ/2} h(v) over the log grid
double aggregate(const std::vector<double>& vs, const std::vector<double>& h, double theta, double q) {
    std::vector<double> a(vs.size());
    for (size_t i = 0; i < vs.size(); ++i) a[i] = std::pow(vs[i], 1.0 - 0.5 * theta) * h[i];
    if (std::isinf(q)) return *std::max_element(a.begin(), a.end());
    double s = 0;
    for (size_t i = 1; i < vs.size(); ++i) s += 0.5 * (a[i] + a[i - 1]) * std::log(vs[i] / vs[i - 1]);
    return s;
}

}  // namespace

GridField apply_multiplier(const GridField& f, const std::function<double(double, double)>& m) {
    RealFft2D fft(f.n1, f.n2);
    const Spectrum s = spectrum_of(fft, f);
    GridField g = f;
    g.v = filtered(fft, s, m);
    return g;
}

SpectralField mollify(const SpectralField& f, double n) {
    if (!(n > 0)) throw DomainError("mollify: n must be positive");
    SpectralField g = f;
    for (Wave& w : g.waves) w.amp *= bump_transform(w.k1 / n) * bump_transform(w.k2 / n);
    return g;
}

GridField mollify(const GridField& f, double n) {
    if (!(n > 0)) throw DomainError("mollify: n must be positive");
    return apply_multiplier(f, [n](double a, double b) { return bump_transform(a / n) * bump_transform(b / n); });
}

int DriftSpec::slice_of(double t) const {
    const int ns = static_cast<int>(slices.size());
    for (int i = 0; i < ns; ++i)
        if (t < slice_times[i + 1]) return i;
    return ns - 1;
}

SpectralField DriftSpec::field(double t, int n) const {
    const SpectralField& f = slices.at(slice_of(t));
    return n > 0 ? mollify(f, n) : f;
}

double DriftSpec::eval(double t, double x1, double x2, int n) const { return field(t, n).eval(x1, x2); }

double DriftSpec::sup_bound(int n) const {
    double m = 0;
    for (const auto& s : slices) {
        const SpectralField f = n > 0 ? mollify(s, n) : s;
        double a = std::abs(f.c0);
        for (const Wave& w : f.waves) a += std::abs(w.amp);
        m = std::max(m, a);
    }
    return m;
}

DriftSpec sample_drift(double beta, int J_max, std::uint64_t seed, const std::vector<double>& slice_times,
                       DriftShape shape, double amplitude, int waves_per_shell, double k1_quantum) {
    if (!(beta > -0.5 && beta < 0.0)) throw ConfigError("sample_drift: beta must lie in (-1/2, 0)");
    if (J_max < 0) throw ConfigError("sample_drift: J_max must be >= 0");
    if (slice_times.size() < 2) throw ConfigError("sample_drift: need at least one time slice");
    for (size_t i = 1; i < slice_times.size(); ++i)
        if (!(slice_times[i] > slice_times[i - 1])) throw ConfigError("sample_drift: slice times must increase");
    if (waves_per_shell < 1) throw ConfigError("sample_drift: waves_per_shell must be >= 1");
    if (!(k1_quantum >= 0.0) || k1_quantum > 1.0) throw ConfigError("sample_drift: k1_quantum must lie in [0, 1]");
    DriftSpec d;
    d.k1_quantum = k1_quantum;
    d.beta = beta;
    d.J_max = J_max;
    d.seed = seed;
    d.shape = shape;
    d.amplitude = amplitude;
    d.waves_per_shell = waves_per_shell;
    d.slice_times = slice_times;
    for (size_t s = 0; s + 1 < slice_times.size(); ++s) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL * (s + 1));
        std::uniform_real_distribution<double> U(0.0, 1.0);
        SpectralField f;
        for (int j = 0; j <= J_max; ++j)
            for (int w = 0; w < waves_per_shell; ++w) {
                Wave wv;
                wv.shell = j;
                const double sg = U(rng) < 0.5 ? -1.0 : 1.0;
                double k = std::ldexp(1.0 + U(rng), j);
                if (k1_quantum > 0) k = std::max(1.0, std::round(k / k1_quantum)) * k1_quantum;
                wv.k1 = sg * k;
                if (shape == DriftShape::anisotropic)
                    wv.k2 = (U(rng) < 0.5 ? -1.0 : 1.0) * std::ldexp(1.0 + U(rng), 3 * j);
                wv.phase = 2.0 * kPi * U(rng);
                wv.amp = amplitude * std::pow(2.0, -j * beta);
                f.waves.push_back(wv);
            }
        d.slices.push_back(f);
    }
    return d;
}

SpectralField mollify_drift(const DriftSpec& spec, int n, double t) {
    if (n < 1) throw DomainError("mollify_drift: n must be >= 1");
    return spec.field(t, n);
}

std::string DriftSpec::to_json() const {
    nlohmann::json j;
    j["beta"] = beta;
    j["J_max"] = J_max;
    j["seed"] = seed;
    j["shape"] = shape == DriftShape::velocity ? "velocity" : "anisotropic";
    j["amplitude"] = amplitude;
    j["waves_per_shell"] = waves_per_shell;
    j["k1_quantum"] = k1_quantum;
    j["slice_times"] = slice_times;
    return j.dump();
}

DriftSpec DriftSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        const std::string sh = j.value("shape", std::string("velocity"));
        if (sh != "velocity" && sh != "anisotropic") throw ConfigError("drift.shape: unknown value '" + sh + "'");
        return sample_drift(j.at("beta").get<double>(), j.at("J_max").get<int>(), j.at("seed").get<std::uint64_t>(),
                            j.at("slice_times").get<std::vector<double>>(),
                            sh == "velocity" ? DriftShape::velocity : DriftShape::anisotropic,
                            j.value("amplitude", 1.0), j.value("waves_per_shell", 1),
                            j.value("k1_quantum", 0.0));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("drift spec: ") + e.what());
    }
}

double thermic_norm(const SpectralField& f, const BesovNormRequest& req) {
    check_request(req);
    if (f.is_zero()) return 0.0;
    if (!std::isinf(req.p)) throw ConfigError("spectral fields are not integrable; use p = inf or a grid field");
    double kmax = 0.0;
    double base = std::abs(f.c0);
    for (const Wave& w : f.waves) {
        kmax = std::max(kmax, gauge(w.k1, w.k2, req.geometry));
        base += std::abs(w.amp) * heat(1.0, w.k1, w.k2, req.geometry);
    }
    const std::vector<double> vs = v_grid(kmax, req);
    std::vector<double> h(vs.size(), 0.0);
    for (size_t i = 0; i < vs.size(); ++i)
        for (const Wave& w : f.waves) h[i] += std::abs(w.amp * heat_dv(vs[i], w.k1, w.k2, req.geometry));
    return base + aggregate(vs, h, req.theta, req.q);
}

double thermic_norm(const GridField& f, const BesovNormRequest& req) {
    check_request(req);
    bool zero = true;
    for (double x : f.v)
        if (x != 0.0) {
            zero = false;
            break;
        }
    if (zero) return 0.0;
    RealFft2D fft(f.n1, f.n2);
    const Spectrum s = spectrum_of(fft, f);
    double kmax = 0;
    for (double a : s.k1)
        for (double b : s.k2) kmax = std::max(kmax, gauge(a, b, req.geometry));
    const double cell = f.cell();
    const double base = lp(filtered(fft, s, [&](double a, double b) { return heat(1.0, a, b, req.geometry); }), req.p, cell);
    const std::vector<double> vs = v_grid(kmax, req);
    std::vector<double> h(vs.size());
    for (size_t i = 0; i < vs.size(); ++i) {
        const double v = vs[i];
        h[i] = lp(filtered(fft, s, [&](double a, double b) { return heat_dv(v, a, b, req.geometry); }), req.p, cell);
    }
    return base + aggregate(vs, h, req.theta, req.q);
}

double lp_cutoff(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    auto h = [](double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; };
    const double a = h(2.0 - r), b = h(r - 1.0);
    return a / (a + b);
}

namespace {

double block(int j, double r) {
    if (j == 0) return lp_cutoff(r);
    return lp_cutoff(std::ldexp(r, -j)) - lp_cutoff(std::ldexp(r, -j + 1));
}

double combine(const std::vector<double>& terms, double q) {
    if (std::isinf(q)) return terms.empty() ? 0.0 : *std::max_element(terms.begin(), terms.end());
    if (q != 1.0) throw ConfigError("lp_norm_aniso: q must be 1 or inf");
    double s = 0;
    for (double t : terms) s += t;
    return s;
}

}  // namespace

double lp_norm_aniso(const SpectralField& f, double theta, double p, double q) {
    if (theta >= 2.0) throw UnsupportedOrder("lp_norm_aniso: theta >= 2 not provided");
    if (f.is_zero()) return 0.0;
    if (!std::isinf(p)) throw ConfigError("spectral fields are not integrable; use p = inf or a grid field");
    double kmax = 1.0;
    for (const Wave& w : f.waves) kmax = std::max(kmax, gauge(w.k1, w.k2, Geometry::aniso));
    const int J = static_cast<int>(std::ceil(std::log2(kmax))) + 1;
    std::vector<double> terms;
    for (int j = 0; j <= J; ++j) {
        double s = j == 0 ? std::abs(f.c0) : 0.0;
        for (const Wave& w : f.waves) s += std::abs(w.amp * block(j, gauge(w.k1, w.k2, Geometry::aniso)));
        terms.push_back(std::pow(2.0, j * theta) * s);
    }
    return combine(terms, q);
}

double lp_norm_aniso(const GridField& f, double theta, double p, double q) {
    if (theta >= 2.0) throw UnsupportedOrder("lp_norm_aniso: theta >= 2 not provided");
    RealFft2D fft(f.n1, f.n2);
    const Spectrum s = spectrum_of(fft, f);
    double kmax = 1.0;
    for (double a : s.k1)
        for (double b : s.k2) kmax = std::max(kmax, gauge(a, b, Geometry::aniso));
    const int J = static_cast<int>(std::ceil(std::log2(kmax))) + 1;
    std::vector<double> terms;
    for (int j = 0; j <= J; ++j) {
        const auto r = filtered(fft, s, [j](double a, double b) { return block(j, gauge(a, b, Geometry::aniso)); });
        terms.push_back(std::pow(2.0, j * theta) * lp(r, p, f.cell()));
    }
    return combine(terms, q);
}

double duality_defect(const GridField& f, const GridField& g, double theta) {
    if (f.n1 != g.n1 || f.n2 != g.n2 || f.L1 != g.L1 || f.L2 != g.L2) throw ConfigError("duality_defect: grids differ");
    double pair = 0;
    for (size_t i = 0; i < f.v.size(); ++i) pair += f.v[i] * g.v[i];
    pair = std::abs(pair * f.cell());
    if (pair == 0.0) return 0.0;
    BesovNormRequest rf{theta, INFINITY, INFINITY, Geometry::aniso};
    BesovNormRequest rg{-theta, 1.0, 1.0, Geometry::aniso};
    const double nf = thermic_norm(f, rf), ng = thermic_norm(g, rg);
    if (nf * ng == 0.0) return 0.0;
    return pair / (nf * ng);
}

ProductCheck product_norm_check(const GridField& f, double alpha, const GridField& g, double gamma) {
    if (!(alpha + gamma > 0)) throw DomainError("product_norm_check: needs alpha + gamma > 0");
    if (f.n1 != g.n1 || f.n2 != g.n2) throw ConfigError("product_norm_check: grids differ");
    GridField fg = f;
    for (size_t i = 0; i < fg.v.size(); ++i) fg.v[i] *= g.v[i];
    ProductCheck c;
    c.product_norm = thermic_norm(fg, {std::min(alpha, gamma), INFINITY, INFINITY, Geometry::aniso});
    c.f_norm = thermic_norm(f, {alpha, INFINITY, INFINITY, Geometry::aniso});
    c.g_norm = thermic_norm(g, {gamma, INFINITY, INFINITY, Geometry::aniso});
    return c;
}

bool MollificationTable::non_increasing(double tol) const {
    for (size_t i = 1; i < rows.size(); ++i)
        if (rows[i].defect > rows[i - 1].defect * (1.0 + tol)) return false;
    return true;
}

MollificationTable mollification_convergence(const DriftSpec& spec, double eta, const std::vector<int>& n_list) {
    if (!(eta < spec.beta)) throw DomainError("mollification_convergence: need eta < beta");
    MollificationTable t;
    t.eta = eta;
    const BesovNormRequest rb{spec.beta, INFINITY, INFINITY, Geometry::aniso};
    const BesovNormRequest re{eta, INFINITY, INFINITY, Geometry::aniso};
    for (const auto& s : spec.slices) {
        t.norm_beta = std::max(t.norm_beta, thermic_norm(s, rb));
        t.norm_eta = std::max(t.norm_eta, thermic_norm(s, re));
    }
    for (int n : n_list) {
        MollificationRow r;
        r.n = n;
        for (const auto& s : spec.slices) r.defect = std::max(r.defect, thermic_norm(mollify(s, n).minus(s), re));
        r.relative = t.norm_eta > 0 ? r.defect / t.norm_eta : 0.0;
        t.fitted_C = std::max(t.fitted_C, t.norm_beta > 0 ? r.defect / t.norm_beta : 0.0);
        t.rows.push_back(r);
    }
    return t;
}

}  // namespace kpx
