#include "kpx/parametrix.hpp"

#include "kpx/fft.hpp"
#include "kpx/quadrature.hpp"

#include <algorithm>
#include <mutex>
#include <random>

namespace kpx {

namespace {

int wrap(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

// 6-point Lagrange weights at fractional offset f ∈ [0, 1) for nodes −2..3.
void lagrange6(double f, double w[6]) {
    for (int j = 0; j < 6; ++j) {
        double v = 1.0;
        for (int m = 0; m < 6; ++m)
            if (m != j) v *= (f - (m - 2)) / double(j - m);
        w[j] = v;
    }
}

// ∫_a^b (η1 − s ξ2)² ds
double shear_integral(double e1, double x2, double a, double b) {
    return e1 * e1 * (b - a) - e1 * x2 * (b * b - a * a) + x2 * x2 * (b * b * b - a * a * a) / 3.0;
}

}  // namespace

double SweepOutput::value(int k, const PhasePoint& y) const {
    const std::vector<double>& f = terms.at(static_cast<size_t>(k));
    const double c = t - r;
    const double a = (y.x1[0] - c1) / dy1() + n1 / 2;
    const double b = (y.x2[0] - c * y.x1[0] - c2) / dy2() + n2 / 2;
    const double fa = std::floor(a), fb = std::floor(b);
    double wa[6], wb[6];
    lagrange6(a - fa, wa);
    lagrange6(b - fb, wb);
    double s = 0.0;
    for (int p = 0; p < 6; ++p) {
        const int i1 = wrap(static_cast<int>(fa) - 2 + p, n1);
        double row = 0.0;
        for (int q = 0; q < 6; ++q) row += wb[q] * f[static_cast<size_t>(i1) * n2 + wrap(static_cast<int>(fb) - 2 + q, n2)];
        s += wa[p] * row;
    }
    return s;
}

double SweepOutput::partial_sum(int K, const PhasePoint& y) const {
    double s = 0.0;
    for (int k = 0; k <= K && k < static_cast<int>(terms.size()); ++k) s += value(k, y);
    return s;
}

PhasePoint SweepOutput::node(int i1, int i2) const {
    const double y1 = c1 + (i1 - n1 / 2) * dy1();
    const double y2s = c2 + (i2 - n2 / 2) * dy2();
    return PhasePoint::d1(y1, y2s + (t - r) * y1);
}

struct ParametrixSeries::Grid {
    int n1 = 0, n2 = 0;
    double L1 = 0.0, L2 = 0.0, c1 = 0.0, c2 = 0.0;
    std::vector<double> eta1, xi2;
};

ParametrixSeries::ParametrixSeries(const ModelSpec& model, int n, ParametrixOptions opt)
    : model_(&model), n_(n), opt_(opt) {
    if (n < 1) throw DomainError("ParametrixSeries: n must be >= 1");
    if (opt.K < 0) throw DomainError("ParametrixSeries: K must be >= 0");
    if (opt.n1 < 16 || opt.n2 < 16 || opt.n1 % 2 || opt.n2 % 2)
        throw ConfigError("ParametrixSeries: Fourier grid sizes must be even and >= 16");
    if (opt.steps < 4 || !(opt.grading >= 1.0)) throw ConfigError("ParametrixSeries: bad time mesh options");
    if (model.d != 1 || !model.kinetic_base || !model.sigma_constant || !model.sigma1)
        throw ConfigError("ParametrixSeries: needs d = 1, F = (0, x1) and constant σ");
    sigma_ = model.sigma1(0.0, 0.0, 0.0);

    double c0max = 0.0;
    if (model.drift) {
        const DriftSpec& spec = *model.drift;
        slice_times_ = spec.slice_times;
        bool waves = false;
        for (size_t i = 0; i + 1 < spec.slice_times.size(); ++i) {
            SpectralField f = spec.field(0.5 * (spec.slice_times[i] + spec.slice_times[i + 1]), n);
            double total = std::abs(f.c0);
            for (const Wave& w : f.waves) total += std::abs(w.amp);
            SpectralField kept;
            kept.c0 = f.c0;
            for (const Wave& w : f.waves)
                if (std::abs(w.amp) > opt.prune * total) kept.waves.push_back(w);
            for (const Wave& w : kept.waves) {
                if (w.k2 != 0.0) throw ConfigError("ParametrixSeries: drift must not depend on x2");
                waves = true;
            }
            c0max = std::max(c0max, std::abs(f.c0));
            fields_.push_back(kept);
        }
        if (waves) {
            if (!(spec.k1_quantum > 0.0))
                throw ConfigError("lattice mismatch: drift wavenumbers are not quantized (k1_quantum = 0)");
            dq_ = spec.k1_quantum;
        }
    }
    if (fields_.empty()) {
        slice_times_ = {0.0, model.T};
        fields_.push_back(SpectralField{});
    }
    bool any_waves = false;
    for (const SpectralField& f : fields_) any_waves = any_waves || !f.waves.empty();
    if (!any_waves) dq_ = 2.0 * kPi / std::max(4.0 * kPi, 12.0 * sigma_ * std::sqrt(model.T) + 2.0 * c0max * model.T);
    for (const SpectralField& f : fields_) {
        Slice s;
        s.c0 = f.c0;
        if (f.c0 != 0.0) trivial_ = false;
        for (const Wave& w : f.waves) {
            const double q = w.k1 / dq_;
            const double m = std::round(q);
            if (std::abs(q - m) > 1e-9 * std::max(1.0, std::abs(q)))
                throw ConfigError("lattice mismatch: k1 = " + std::to_string(w.k1) + " is not a multiple of " +
                                  std::to_string(dq_));
            Shift sh;
            sh.m = static_cast<int>(m);
            sh.cplus = 0.5 * w.amp * std::polar(1.0, w.phase);
            sh.cminus = std::conj(sh.cplus);
            s.shifts.push_back(sh);
            trivial_ = false;
        }
        slices_.push_back(s);
    }
}

double ParametrixSeries::drift(double t, double x1) const {
    return fields_[static_cast<size_t>(slice_index(t))].eval(x1, 0.0);
}

double ParametrixSeries::drift_sup() const {
    double m = 0.0;
    for (const SpectralField& f : fields_) {
        double a = std::abs(f.c0);
        for (const Wave& w : f.waves) a += std::abs(w.amp);
        m = std::max(m, a);
    }
    return m;
}

int ParametrixSeries::slice_index(double v) const {
    const int ns = static_cast<int>(fields_.size());
    for (int i = 0; i < ns; ++i)
        if (v < slice_times_[static_cast<size_t>(i) + 1]) return i;
    return ns - 1;
}

double ParametrixSeries::reference_density(double lambda, double r, const PhasePoint& z, double t,
                                           const PhasePoint& y) const {
    const double c = t - r;
    if (!(c > 0)) throw DomainError("reference_density: need t > r");
    const double a = lambda * sigma_ * sigma_;
    const double k11 = a * c, k12 = a * c * c / 2.0, k22 = a * c * c * c / 3.0;
    const double det = k11 * k22 - k12 * k12;
    const double e1 = y.x1[0] - z.x1[0];
    const double e2 = y.x2[0] - z.x2[0] - c * z.x1[0];
    const double q = (k22 * e1 * e1 - 2.0 * k12 * e1 * e2 + k11 * e2 * e2) / det;
    return std::exp(-0.5 * q) / (2.0 * kPi * std::sqrt(det));
}

ParametrixSeries::Grid ParametrixSeries::make_grid(double r, const PhasePoint& z, double t) const {
    const double c = t - r;
    Grid g;
    g.n1 = opt_.n1;
    g.n2 = opt_.n2;
    g.L1 = 2.0 * kPi / dq_;
    const double sd1 = sigma_ * std::sqrt(c);
    if (sd1 < 8.0 * g.L1 / g.n1)
        throw DomainError("parametrix sweep: t − r = " + std::to_string(c) + " is below the grid resolution");
    const double bs = drift_sup();
    if (5.0 * sd1 + bs * c > 0.5 * g.L1)
        throw ConfigError("parametrix sweep: the y1 period is too short for t − r = " + std::to_string(c));
    g.L2 = 14.0 * sigma_ * std::sqrt(c * c * c / 3.0) + bs * c * c;
    g.c1 = z.x1[0];
    g.c2 = z.x2[0];
    g.eta1.resize(static_cast<size_t>(g.n1));
    g.xi2.resize(static_cast<size_t>(g.n2));
    for (int m = 0; m < g.n1; ++m) g.eta1[static_cast<size_t>(m)] = (m - g.n1 / 2) * dq_;
    for (int l = 0; l < g.n2; ++l) g.xi2[static_cast<size_t>(l)] = (l - g.n2 / 2) * 2.0 * kPi / g.L2;
    return g;
}

void ParametrixSeries::apply_drift(int slice, const cplx* u, cplx* out) const {
    const Slice& s = slices_[static_cast<size_t>(slice)];
    const int n1 = opt_.n1, n2 = opt_.n2;
    const size_t N = static_cast<size_t>(n1) * n2;
    for (size_t i = 0; i < N; ++i) out[i] = s.c0 * u[i];
    if (s.shifts.empty()) return;
    // rows of u that are negligible are not shifted
    std::vector<double> row(static_cast<size_t>(n1), 0.0);
    double top = 0.0;
    for (int m = 0; m < n1; ++m) {
        double a = 0.0;
        for (int l = 0; l < n2; ++l) a = std::max(a, std::norm(u[static_cast<size_t>(m) * n2 + l]));
        row[static_cast<size_t>(m)] = a;
        top = std::max(top, a);
    }
    std::vector<char> live(static_cast<size_t>(n1));
    for (int m = 0; m < n1; ++m) live[static_cast<size_t>(m)] = row[static_cast<size_t>(m)] > 1e-34 * top;
    for (const Shift& sh : s.shifts) {
        // out(m) += c+ u(m − k) + c− u(m + k)
        for (int m = std::max(0, sh.m); m < std::min(n1, n1 + sh.m); ++m) {
            if (!live[static_cast<size_t>(m - sh.m)]) continue;
            const cplx* src = u + static_cast<size_t>(m - sh.m) * n2;
            cplx* dst = out + static_cast<size_t>(m) * n2;
            for (int l = 0; l < n2; ++l) dst[l] += sh.cplus * src[l];
        }
        for (int m = std::max(0, -sh.m); m < std::min(n1, n1 - sh.m); ++m) {
            if (!live[static_cast<size_t>(m + sh.m)]) continue;
            const cplx* src = u + static_cast<size_t>(m + sh.m) * n2;
            cplx* dst = out + static_cast<size_t>(m) * n2;
            for (int l = 0; l < n2; ++l) dst[l] += sh.cminus * src[l];
        }
    }
}

void ParametrixSeries::run(double r, const PhasePoint& z, double t, bool gradient,
                           const std::vector<std::pair<double, double>>& snaps, SweepOutput& out,
                           std::vector<std::vector<cplx>>* acc) const {
    if (!(t > r)) throw DomainError("parametrix sweep: need t > r");
    const Grid g = make_grid(r, z, t);
    const int n1 = g.n1, n2 = g.n2, K = opt_.K;
    const size_t N = static_cast<size_t>(n1) * n2;
    const double c = t - r;
    const double hs = 0.5 * sigma_ * sigma_;
    const cplx I(0.0, 1.0);

    // time mesh: graded nodes, drift slice boundaries, snapshot times
    std::vector<double> mesh;
    for (int j = 0; j <= opt_.steps; ++j) mesh.push_back(r + c * std::pow(double(j) / opt_.steps, opt_.grading));
    for (double b : slice_times_)
        if (b > r && b < t) mesh.push_back(b);
    for (const auto& sn : snaps) mesh.push_back(sn.first);
    std::sort(mesh.begin(), mesh.end());
    std::vector<double> nodes{mesh.front()};
    for (size_t i = 1; i < mesh.size(); ++i)
        if (mesh[i] - nodes.back() > 1e-13 * c) nodes.push_back(mesh[i]);
    nodes.back() = t;

    std::vector<cplx> seed(N);
    for (int m = 0; m < n1; ++m)
        for (int l = 0; l < n2; ++l) {
            const double e1 = g.eta1[static_cast<size_t>(m)], x2 = g.xi2[static_cast<size_t>(l)];
            cplx v = std::polar(1.0, -(e1 * z.x1[0] + x2 * z.x2[0]));
            if (gradient) v *= -I * e1;
            seed[static_cast<size_t>(m) * n2 + l] = v;
        }
    auto free_term = [&](double v, std::vector<cplx>& u0) {
        const double a = v - r;
        for (int m = 0; m < n1; ++m)
            for (int l = 0; l < n2; ++l) {
                const size_t i = static_cast<size_t>(m) * n2 + l;
                u0[i] = seed[i] * std::exp(-hs * shear_integral(g.eta1[static_cast<size_t>(m)], g.xi2[static_cast<size_t>(l)], 0.0, a));
            }
    };
    std::vector<cplx> tmp(N);
    auto source = [&](int slice, const std::vector<cplx>& u, double v, std::vector<cplx>& s) {
        apply_drift(slice, u.data(), tmp.data());
        const double a = v - r;
        for (int m = 0; m < n1; ++m)
            for (int l = 0; l < n2; ++l) {
                const size_t i = static_cast<size_t>(m) * n2 + l;
                const double xi1 = g.eta1[static_cast<size_t>(m)] - a * g.xi2[static_cast<size_t>(l)];
                s[i] = -I * xi1 * tmp[i];
            }
    };

    std::vector<std::vector<cplx>> U(static_cast<size_t>(K) + 1, std::vector<cplx>(N, cplx(0.0)));
    std::vector<std::vector<cplx>> Sp(static_cast<size_t>(K), std::vector<cplx>(N));
    std::vector<cplx> Sn(N);
    std::vector<double> E(N), wv(N), ww(N);
    free_term(r, U[0]);
    if (acc) acc->assign(static_cast<size_t>(K) + 1, std::vector<cplx>(N, cplx(0.0)));

    auto accumulate = [&](double v) {
        for (const auto& sn : snaps) {
            if (std::abs(sn.first - v) > 1e-12 * c) continue;
            const int slice = slice_index(v);
            const double a = v - r;
            for (int k = 0; k <= K; ++k) {
                source(slice, U[static_cast<size_t>(k)], v, Sn);
                std::vector<cplx>& A = (*acc)[static_cast<size_t>(k)];
                for (int m = 0; m < n1; ++m)
                    for (int l = 0; l < n2; ++l) {
                        const size_t i = static_cast<size_t>(m) * n2 + l;
                        A[i] += sn.second * Sn[i] *
                                std::exp(-hs * shear_integral(g.eta1[static_cast<size_t>(m)], g.xi2[static_cast<size_t>(l)], a, c));
                    }
            }
        }
    };

    int cur_slice = -1;
    for (size_t j = 0; j + 1 < nodes.size(); ++j) {
        const double v = nodes[j], w = nodes[j + 1], h = w - v;
        const int slice = slice_index(0.5 * (v + w));
        if (!trivial_ && slice != cur_slice) {
            for (int k = 0; k < K; ++k) source(slice, U[static_cast<size_t>(k)], v, Sp[static_cast<size_t>(k)]);
            cur_slice = slice;
        }
        const double a = v - r, b = w - r;
        for (int m = 0; m < n1; ++m)
            for (int l = 0; l < n2; ++l) {
                const size_t i = static_cast<size_t>(m) * n2 + l;
                const double zz = hs * shear_integral(g.eta1[static_cast<size_t>(m)], g.xi2[static_cast<size_t>(l)], a, b);
                const double e = std::exp(-zz);
                double p1, p2;  // (1 − e^{-z})/z, (z − 1 + e^{-z})/z²
                if (zz < 1e-3) {
                    p1 = 1.0 - zz / 2.0 + zz * zz / 6.0 - zz * zz * zz / 24.0;
                    p2 = 0.5 - zz / 6.0 + zz * zz / 24.0 - zz * zz * zz / 120.0;
                } else {
                    p1 = (1.0 - e) / zz;
                    p2 = (zz - 1.0 + e) / (zz * zz);
                }
                E[i] = e;
                wv[i] = h * (p1 - p2);
                ww[i] = h * p2;
            }
        free_term(w, U[0]);
        if (!trivial_)
            for (int k = 0; k < K; ++k) {
                source(slice, U[static_cast<size_t>(k)], w, Sn);
                std::vector<cplx>& Uk1 = U[static_cast<size_t>(k) + 1];
                std::vector<cplx>& S0 = Sp[static_cast<size_t>(k)];
                for (size_t i = 0; i < N; ++i) {
                    Uk1[i] = E[i] * Uk1[i] + wv[i] * S0[i] + ww[i] * Sn[i];
                    S0[i] = Sn[i];
                }
            }
        if (acc && !trivial_) accumulate(w);
    }

    out = SweepOutput{};
    out.r = r;
    out.t = t;
    out.z = z;
    out.gradient = gradient;
    out.n1 = n1;
    out.n2 = n2;
    out.L1 = g.L1;
    out.L2 = g.L2;
    out.c1 = g.c1;
    out.c2 = g.c2;

    AxisFft f0(n1, n2, 0, +1), f1(n1, n2, 1, +1);
    const double norm = 1.0 / (g.L1 * g.L2);
    auto to_physical = [&](const std::vector<cplx>& hat, std::vector<double>& phys) {
        std::vector<cplx> buf(N);
        for (int m = 0; m < n1; ++m)
            for (int l = 0; l < n2; ++l) {
                const size_t i = static_cast<size_t>(m) * n2 + l;
                const size_t o = static_cast<size_t>(wrap(m + n1 / 2, n1)) * n2 + wrap(l + n2 / 2, n2);
                buf[o] = hat[i] * std::polar(1.0, g.eta1[static_cast<size_t>(m)] * g.c1 + g.xi2[static_cast<size_t>(l)] * g.c2);
            }
        f0.execute(buf);
        f1.execute(buf);
        phys.assign(N, 0.0);
        for (int i1 = 0; i1 < n1; ++i1)
            for (int i2 = 0; i2 < n2; ++i2)
                phys[static_cast<size_t>(i1) * n2 + i2] =
                    norm * buf[static_cast<size_t>(wrap(i1 + n1 / 2, n1)) * n2 + wrap(i2 + n2 / 2, n2)].real();
    };
    const size_t zero = static_cast<size_t>(n1 / 2) * n2 + n2 / 2;
    out.terms.resize(static_cast<size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) {
        to_physical(U[static_cast<size_t>(k)], out.terms[static_cast<size_t>(k)]);
        out.zero_mode.push_back(U[static_cast<size_t>(k)][zero].real());
    }
    if (acc) {
        // hand back accumulators already in physical space through the real parts
        for (int k = 0; k <= K; ++k) {
            std::vector<double> phys;
            to_physical((*acc)[static_cast<size_t>(k)], phys);
            std::vector<cplx>& A = (*acc)[static_cast<size_t>(k)];
            for (size_t i = 0; i < N; ++i) A[i] = cplx(phys[i], 0.0);
        }
    }
}

SweepOutput ParametrixSeries::sweep(double r, const PhasePoint& z, double t, bool gradient) const {
    SweepOutput out;
    run(r, z, t, gradient, {}, out, nullptr);
    return out;
}

std::vector<std::vector<double>> ParametrixSeries::duhamel_rhs(double r, const PhasePoint& z, double t,
                                                               int gl_nodes, SweepOutput* sweep_out) const {
    if (gl_nodes < 2) throw ConfigError("duhamel_rhs: need at least 2 Gauss–Legendre nodes");
    std::vector<double> cuts{r};
    for (double b : slice_times_)
        if (b > r && b < t) cuts.push_back(b);
    cuts.push_back(t);
    std::vector<std::pair<double, double>> snaps;
    for (size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double a = cuts[p], b = cuts[p + 1];
        if (p + 2 < cuts.size()) {
            const Rule q = gauss_legendre(gl_nodes, a, b);
            for (size_t i = 0; i < q.x.size(); ++i) snaps.emplace_back(q.x[i], q.w[i]);
        } else {
            // v = t − (t − a) w², w ∈ (0, 1]
            const Rule q = gauss_legendre(gl_nodes, 0.0, 1.0);
            for (size_t i = 0; i < q.x.size(); ++i)
                snaps.emplace_back(t - (t - a) * q.x[i] * q.x[i], 2.0 * (t - a) * q.x[i] * q.w[i]);
        }
    }
    SweepOutput out;
    std::vector<std::vector<cplx>> acc;
    run(r, z, t, false, snaps, out, &acc);
    const int K = opt_.K;
    std::vector<std::vector<double>> rhs(static_cast<size_t>(K) + 1);
    std::vector<double> cur = out.terms[0];
    for (int k = 0; k <= K; ++k) {
        if (!acc.empty())
            for (size_t i = 0; i < cur.size(); ++i) cur[i] += acc[static_cast<size_t>(k)][i].real();
        rhs[static_cast<size_t>(k)] = cur;
    }
    if (sweep_out) *sweep_out = std::move(out);
    return rhs;
}

namespace {

struct PhiCache {
    std::mutex mu;
    const ParametrixSeries* owner = nullptr;
    double r = 0.0, t = 0.0, z1 = 0.0, z2 = 0.0;
    std::shared_ptr<SweepOutput> sweep;
};

PhiCache& phi_cache() {
    static PhiCache c;
    return c;
}

}  // namespace

double phi_term(const ParametrixSeries& series, int k, double r, const PhasePoint& z, double t, const PhasePoint& y) {
    if (k < 0 || k > series.options().K) throw DomainError("phi_term: k outside 0..K");
    if (series.trivial()) return 0.0;
    std::shared_ptr<SweepOutput> sw;
    {
        PhiCache& c = phi_cache();
        std::lock_guard<std::mutex> lk(c.mu);
        if (c.owner != &series || c.r != r || c.t != t || c.z1 != z.x1[0] || c.z2 != z.x2[0] || !c.sweep) {
            c.sweep = std::make_shared<SweepOutput>(series.sweep(r, z, t, true));
            c.owner = &series;
            c.r = r;
            c.t = t;
            c.z1 = z.x1[0];
            c.z2 = z.x2[0];
        }
        sw = c.sweep;
    }
    return series.drift(r, z.x1[0]) * sw->value(k, y);
}

SingularDensity singular_density(const ParametrixSeries& series, double s, const PhasePoint& x, double t,
                                 const ForwardGrid& grid, int K, bool with_gradient) {
    if (K < 0 || K > series.options().K) throw DomainError("singular_density: K outside 0..options.K");
    const SweepOutput sw = series.sweep(s, x, t, false);
    SingularDensity out;
    const size_t N = sw.terms[0].size();
    std::vector<double> sum(N, 0.0);
    for (int k = 0; k <= K; ++k) {
        double m = 0.0;
        for (size_t i = 0; i < N; ++i) {
            sum[i] += sw.terms[static_cast<size_t>(k)][i];
            m = std::max(m, std::abs(sw.terms[static_cast<size_t>(k)][i]));
        }
        out.term_sup.push_back(m);
        out.mass_fourier += sw.zero_mode[static_cast<size_t>(k)];
    }
    const double peak = *std::max_element(sum.begin(), sum.end());
    const double lo = *std::min_element(sum.begin(), sum.end());
    out.tail = out.term_sup.back() / peak;
    if (lo < -series.options().negative_tol * peak)
        throw NumericalError("singular_density: negative value " + std::to_string(lo) + " (peak " +
                             std::to_string(peak) + "); increase K");
    DensityField& f = out.field;
    f.s = s;
    f.t = t;
    f.x = x;
    f.source = "parametrix n=" + std::to_string(series.level()) + " K=" + std::to_string(K);
    f.grid = grid;
    f.values.resize(static_cast<size_t>(grid.size()));
    for (int i1 = 0; i1 < grid.n; ++i1)
        for (int i2 = 0; i2 < grid.n; ++i2)
            f.values[static_cast<size_t>(i1) * grid.n + i2] = sw.partial_sum(K, grid.point(i1, i2));
    if (with_gradient) {
        const SweepOutput gs = series.sweep(s, x, t, true);
        f.grad_x1.resize(f.values.size());
        for (int i1 = 0; i1 < grid.n; ++i1)
            for (int i2 = 0; i2 < grid.n; ++i2)
                f.grad_x1[static_cast<size_t>(i1) * grid.n + i2] = gs.partial_sum(K, grid.point(i1, i2));
    }
    f.trace = out.term_sup;
    f.iterations = K;
    return out;
}

std::vector<double> forward_duhamel_residual(const ParametrixSeries& series, double s, const PhasePoint& x,
                                             double t, int gl_nodes) {
    SweepOutput sw;
    const std::vector<std::vector<double>> rhs = series.duhamel_rhs(s, x, t, gl_nodes, &sw);
    std::vector<double> res;
    std::vector<double> p(sw.terms[0].size(), 0.0);
    for (size_t k = 0; k < rhs.size(); ++k) {
        for (size_t i = 0; i < p.size(); ++i) p[i] += sw.terms[k][i];
        res.push_back(sup_relative(rhs[k], p));
    }
    return res;
}

TermEnvelope term_envelopes(const ParametrixSeries& series, double s, double t, int K,
                            const std::vector<double>& z1_offsets) {
    if (K < 0 || K > series.options().K) throw DomainError("term_envelopes: K outside 0..options.K");
    const double lam = series.options().lambda_env;
    TermEnvelope env;
    env.sup_ratio.assign(static_cast<size_t>(K) + 1, 0.0);
    env.weighted.assign(static_cast<size_t>(K) + 1, 0.0);
    const double D = t - s;
    for (double frac : {1.0, 0.5, 0.25}) {
        const double r = t - frac * D;
        for (double z1 : z1_offsets) {
            const PhasePoint z = PhasePoint::d1(z1, 0.0);
            const SweepOutput sw = series.sweep(r, z, t, true);
            const double b = series.drift(r, z1);
            const size_t N = sw.terms[0].size();
            std::vector<double> ref(N);
            double rmax = 0.0;
            for (int i1 = 0; i1 < sw.n1; ++i1)
                for (int i2 = 0; i2 < sw.n2; ++i2) {
                    const size_t i = static_cast<size_t>(i1) * sw.n2 + i2;
                    ref[i] = series.reference_density(lam, r, z, t, sw.node(i1, i2));
                    rmax = std::max(rmax, ref[i]);
                }
            for (int k = 0; k <= K; ++k) {
                double m = 0.0;
                for (size_t i = 0; i < N; ++i)
                    if (ref[i] > series.options().envelope_floor * rmax) m = std::max(m, std::abs(b * sw.terms[static_cast<size_t>(k)][i]) / ref[i]);
                const size_t kk = static_cast<size_t>(k);
                env.weighted[kk] = std::max(env.weighted[kk], m / std::pow(t - r, 0.5 * (k - 1)));
                if (frac == 1.0) env.sup_ratio[kk] = std::max(env.sup_ratio[kk], m);
            }
        }
    }
    env.K_n = env.weighted[0];
    for (int k = 0; k + 2 <= K; ++k) {
        const size_t kk = static_cast<size_t>(k);
        env.ratio.push_back(env.sup_ratio[kk] > 0 ? env.sup_ratio[kk + 2] / env.sup_ratio[kk] : 0.0);
        env.bound.push_back(env.K_n * env.K_n * D / (0.5 * (k + 1)));
    }
    return env;
}

std::vector<HNormPoint> h_norm_diagnostic(const ParametrixSeries& series, const PhasePoint& x, double eta_f,
                                          const std::vector<double>& r_grid, double lambda, int pairs, int K) {
    if (!(eta_f > 0.0 && eta_f < 1.0)) throw DomainError("h_norm_diagnostic: eta_f must lie in (0, 1)");
    if (pairs < 1) throw DomainError("h_norm_diagnostic: need at least one pair");
    if (K < 0 || K > series.options().K) throw DomainError("h_norm_diagnostic: K outside 0..options.K");
    std::vector<HNormPoint> curve;
    for (double r : r_grid) {
        const SweepOutput sw = series.sweep(0.0, x, r, false);
        HNormPoint pt;
        pt.r = r;
        double rmax = 0.0;
        std::vector<double> ref(sw.terms[0].size());
        for (int i1 = 0; i1 < sw.n1; ++i1)
            for (int i2 = 0; i2 < sw.n2; ++i2) {
                const size_t i = static_cast<size_t>(i1) * sw.n2 + i2;
                ref[i] = series.reference_density(2.0 * lambda, 0.0, x, r, sw.node(i1, i2));
                rmax = std::max(rmax, ref[i]);
            }
        for (int i1 = 0; i1 < sw.n1; ++i1)
            for (int i2 = 0; i2 < sw.n2; ++i2) {
                const size_t i = static_cast<size_t>(i1) * sw.n2 + i2;
                if (ref[i] < series.options().envelope_floor * rmax) continue;
                double p = 0.0;
                for (int k = 0; k <= K; ++k) p += sw.terms[static_cast<size_t>(k)][i];
                pt.ratio_term = std::max(pt.ratio_term, p / ref[i]);
            }
        // pairs: y from the proxy law, y' = y + (±δ√r, ±δ' r^{3/2}) with δ, δ' log-uniform in [1e-3, 1]
        std::mt19937_64 rng(0x5EEDULL + static_cast<std::uint64_t>(pairs));
        std::normal_distribution<double> G(0.0, 1.0);
        std::uniform_real_distribution<double> U(-3.0, 0.0);
        const double sg = series.sigma();
        for (int p = 0; p < pairs; ++p) {
            const double g1 = G(rng), g2 = G(rng);
            const double y1 = x.x1[0] + sg * std::sqrt(r) * g1;
            const double y2 = x.x2[0] + r * x.x1[0] + sg * r * std::sqrt(r) * (0.5 * g1 + g2 / std::sqrt(12.0));
            const PhasePoint y = PhasePoint::d1(y1, y2);
            const double d1 = (G(rng) < 0 ? -1.0 : 1.0) * std::pow(10.0, U(rng)) * std::sqrt(r);
            const double d2 = (G(rng) < 0 ? -1.0 : 1.0) * std::pow(10.0, U(rng)) * r * std::sqrt(r);
            const PhasePoint yp = PhasePoint::d1(y1 + d1, y2 + d2);
            const double num = std::abs(sw.partial_sum(K, y) - sw.partial_sum(K, yp));
            const double den = series.reference_density(2.0 * lambda, 0.0, x, r, y) +
                               series.reference_density(2.0 * lambda, 0.0, x, r, yp);
            const double dist = dist_aniso(d1, d2);
            pt.holder_term = std::max(pt.holder_term, num / den * std::pow(r, 0.5 * eta_f) / std::pow(dist, eta_f));
        }
        curve.push_back(pt);
    }
    return curve;
}

ModelSpec standard_rough_model(std::uint64_t seed, int J_max) {
    ModelSpec m = make_model("kinetic_const", 1.0);
    m.name = "standard_rough";
    m.beta = -0.25;
    m.nu = 0.75;
    m.T = 1.0;
    DriftSpec d = sample_drift(-0.25, J_max, seed, {0.0, 0.25, 0.5, 0.75, 1.0}, DriftShape::velocity, 1.0, 1, 0.5);
    const double a = 1.0 / d.sup_bound(64);
    d = sample_drift(-0.25, J_max, seed, {0.0, 0.25, 0.5, 0.75, 1.0}, DriftShape::velocity, a, 1, 0.5);
    m.drift = std::make_shared<const DriftSpec>(std::move(d));
    return m;
}

ModelSpec constant_drift_model(double c, double lambda) {
    ModelSpec m = make_model("kinetic_const", lambda);
    m.name = "constant_drift";
    DriftSpec d;
    d.slice_times = {0.0, m.T};
    SpectralField f;
    f.c0 = c;
    d.slices.push_back(f);
    d.J_max = 0;
    m.drift = std::make_shared<const DriftSpec>(std::move(d));
    return m;
}

}  // namespace kpx
