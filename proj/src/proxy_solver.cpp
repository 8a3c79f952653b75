#include "kpx/proxy_solver.hpp"

#include "kpx/quadrature.hpp"

#include <algorithm>

namespace kpx {

namespace {

Mat2 scale_inv(double dt) {
    Mat2 T = Mat2::Zero();
    T(0, 0) = 1.0 / std::sqrt(dt);
    T(1, 1) = 1.0 / (dt * std::sqrt(dt));
    return T;
}

// 4-point Lagrange stencil on integer nodes 0..n-1 at position x (index units).
inline int stencil(double x, int n, double w[4]) {
    int i0 = static_cast<int>(std::floor(x)) - 1;
    i0 = std::clamp(i0, 0, n - 4);
    const double t = x - i0;
    w[0] = -(t - 1) * (t - 2) * (t - 3) / 6.0;
    w[1] = t * (t - 2) * (t - 3) / 2.0;
    w[2] = -t * (t - 1) * (t - 3) / 2.0;
    w[3] = t * (t - 1) * (t - 2) / 6.0;
    return i0;
}

Vec2 vec(const PhasePoint& p) { return Vec2(p.x1[0], p.x2[0]); }
PhasePoint point(const Vec2& v) { return PhasePoint::d1(v[0], v[1]); }

}  // namespace

Gauss2 Gauss2::from(const Mat2& R, const Vec2& m, const Mat2& K, double dt) {
    Gauss2 g;
    g.R = R;
    g.m = m;
    g.K = K;
    const Mat2 Ti = scale_inv(dt);
    const Mat2 Kh = Ti * K * Ti;
    const double det = Kh.determinant();
    if (!(det > 1e-13 * Kh.trace() * Kh.trace()))
        throw NumericalError("frozen covariance lost definiteness at t - s = " + std::to_string(dt));
    g.P = Ti * Kh.inverse() * Ti;
    g.Kh = Kh;
    g.dt = dt;
    g.norm = 1.0 / (2.0 * kPi * dt * dt * std::sqrt(det));
    return g;
}

double Gauss2::density(const Vec2& x, const Vec2& y) const {
    const Vec2 e = y - R * x - m;
    return norm * std::exp(-0.5 * e.dot(P * e));
}

double Gauss2::grad_x1(const Vec2& x, const Vec2& y) const {
    const Vec2 e = y - R * x - m;
    return (R.transpose() * (P * e))[0] * norm * std::exp(-0.5 * e.dot(P * e));
}

// Reference frame at time v: whitened coordinates of the proxy frozen at (s, x).
struct ProxySolver::Frame {
    double v = 0.0;
    Vec2 mu = Vec2::Zero();
    Mat2 L = Mat2::Identity();
    Mat2 Linv = Mat2::Identity();
    int j0 = 0;
    double tw[4] = {0, 0, 0, 0};
};

ProxySolver::ProxySolver(const ModelSpec& model, double s, const PhasePoint& x, double t_max, ProxyOptions opt)
    : model_(&model), s_(s), t_max_(t_max), x_(x), xv_(vec(x)), opt_(opt) {
    if (model.d != 1) throw ConfigError("proxy solver supports d = 1 only");
    if (!(t_max > s)) throw DomainError("proxy solver: need t > s");
    if (opt.slices < 3 || opt.lattice < 4) throw ConfigError("proxy solver: lattice too small");
    if (opt.time_nodes < 2 || opt.lattice_time_nodes < 2) throw ConfigError("proxy solver: too few time nodes");
    power_ = opt.time_power > 0 ? opt.time_power
                                : static_cast<int>(std::ceil(2.0 / std::clamp(model.sigma_holder, 0.1, 1.0) - 1e-9));
    trivial_ = model.constant_coefficients();
    if (!(model.kinetic_base && model.sigma_x1_only && model.sigma1))
        ref_proxy_ = std::make_unique<FrozenProxy>(model, s, x, s, t_max);
    // √(v−s)-scaled gradient of the reference as v ↓ s, in whitened coordinates
    const double v0 = s + 1e-6 * (t_max - s);
    const Gauss2 g = frozen_at(s, xv_, v0, s, ref_proxy_.get());
    const Mat2 Kh = scale_inv(v0 - s) * g.K * scale_inv(v0 - s);
    const Mat2 L = scale_inv(v0 - s).inverse() * Eigen::LLT<Mat2>(Kh).matrixL().toDenseMatrix();
    grad_limit_ = std::sqrt(v0 - s) * (g.R.transpose() * L.transpose().inverse()).row(0).transpose();
}

Gauss2 ProxySolver::frozen_at(double tau, const Vec2& xi, double t, double s, const FrozenProxy* fp) const {
    const double dt = t - s;
    if (model_->kinetic_base && model_->sigma_x1_only && model_->sigma1) {
        // θ keeps x1 fixed under F = (0, x1), so σ is constant along the frozen curve
        const double sg = model_->sigma1(tau, xi[0], xi[1]);
        Mat2 R;
        R << 1.0, 0.0, dt, 1.0;
        Mat2 K;
        K << dt, 0.5 * dt * dt, 0.5 * dt * dt, dt * dt * dt / 3.0;
        return Gauss2::from(R, Vec2::Zero(), sg * sg * K, dt);
    }
    const FrozenMoments mo = fp->moments(t, s, opt_.moment_nodes);
    return Gauss2::from(Mat2(mo.R), Vec2(mo.m), Mat2(mo.K), dt);
}

Gauss2 ProxySolver::reference(double t) const { return frozen_at(s_, xv_, t, s_, ref_proxy_.get()); }

ProxySolver::Frame ProxySolver::frame(double v) const {
    Frame f;
    f.v = v;
    const double dt = v - s_;
    const Gauss2 g = reference(v);
    f.mu = g.mean(xv_);
    const Mat2 Ti = scale_inv(dt);
    const Mat2 Kh = Ti * g.K * Ti;
    f.L = Ti.inverse() * Eigen::LLT<Mat2>(Kh).matrixL().toDenseMatrix();
    f.Linv = f.L.inverse();
    const double tau = std::sqrt(dt / (t_max_ - s_)) * opt_.slices;
    f.j0 = stencil(tau, opt_.slices + 1, f.tw);
    return f;
}

ForwardGrid ProxySolver::default_grid(double t, int n, double half_width) const {
    const Frame f = frame(t);
    ForwardGrid g;
    g.center = point(f.mu);
    g.L = f.L;
    g.n = n;
    g.half_width = half_width;
    return g;
}

std::vector<std::pair<double, double>> ProxySolver::time_rule(double t, int n) const {
    // [s, mid]: v = s + (mid−s)u², absorbing (v−s)^{-1/2};
    // [mid, t]: v = t − (t−mid)u^p, absorbing (t−v)^{-1+η/2}
    const double mid = 0.5 * (s_ + t);
    const int n1 = n / 2, n2 = n - n1;
    std::vector<std::pair<double, double>> out;
    const Rule a = gauss_legendre(n1, 0.0, 1.0), b = gauss_legendre(n2, 0.0, 1.0);
    for (int i = 0; i < n1; ++i)
        out.emplace_back(s_ + (mid - s_) * a.x[i] * a.x[i], a.w[i] * 2.0 * a.x[i] * (mid - s_));
    for (int i = 0; i < n2; ++i)
        out.emplace_back(t - (t - mid) * std::pow(b.x[i], power_),
                         b.w[i] * power_ * std::pow(b.x[i], power_ - 1) * (t - mid));
    return out;
}

double ProxySolver::lattice_value(const std::vector<double>& tab, double, const Frame& f, const Vec2& u) const {
    const int n = opt_.lattice;
    const double hw = opt_.lattice_half_width;
    const double h = 2.0 * hw / (n - 1);
    const double x1 = (std::clamp(u[0], -hw, hw) + hw) / h;
    const double x2 = (std::clamp(u[1], -hw, hw) + hw) / h;
    double w1[4], w2[4];
    const int i1 = stencil(x1, n, w1), i2 = stencil(x2, n, w2);
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
        if (f.tw[a] == 0.0) continue;
        const double* slab = tab.data() + static_cast<size_t>(f.j0 + a) * n * n;
        double sa = 0.0;
        for (int b = 0; b < 4; ++b) {
            const double* row = slab + static_cast<size_t>(i1 + b) * n + i2;
            sa += w1[b] * (w2[0] * row[0] + w2[1] * row[1] + w2[2] * row[2] + w2[3] * row[3]);
        }
        acc += f.tw[a] * sa;
    }
    return acc;
}

std::pair<double, double> ProxySolver::apply(const std::vector<double>* q, const std::vector<double>* qg,
                                             double t, const Vec2& y,
                                             const std::vector<std::pair<double, double>>& rule,
                                             const std::vector<Frame>& frames, int gh_nodes) const {
    const bool fast = !ref_proxy_;
    std::unique_ptr<FrozenProxy> fp;
    if (!fast) fp = std::make_unique<FrozenProxy>(*model_, t, point(y), s_, t);
    const Gauss2 base = frozen_at(t, y, t, s_, fp.get());
    double p = base.density(xv_, y);
    double g = opt_.with_gradient ? base.grad_x1(xv_, y) : 0.0;
    if (trivial_ || (!q && !qg)) return {p, g};

    const Rule& gh = gauss_hermite_normal(gh_nodes);
    const double wmax = gh.w[gh_nodes / 2] * gh.w[gh_nodes / 2];
    const double sig_y = fast ? model_->sigma1(t, y[0], y[1]) : 0.0;
    double Ip = 0.0, Ig = 0.0;
    for (size_t a = 0; a < rule.size(); ++a) {
        const double v = rule[a].first, wt = rule[a].second;
        if (t - v <= 1e-12 * (t - s_) || v - s_ <= 1e-12 * (t - s_)) continue;  // weight underflows anyway
        const Frame& f = frames[a];
        FrozenMoments mo;
        Gauss2 G;
        if (fast) {
            G = frozen_at(t, y, t, v, nullptr);
        } else {
            mo = fp->moments(t, v, opt_.moment_nodes);
            G = Gauss2::from(Mat2(mo.R), Vec2(mo.m), Mat2(mo.K), t - v);
        }
        // product of N(0, I) (reference, whitened) with p̃(v, ·, t, y) seen in u. With
        // A A* the covariance of the latter, the product covariance is A (I + A*A)^{-1} A*.
        const Mat2 Rinv = G.R.inverse();
        const Vec2 mu2 = f.Linv * (Rinv * (y - G.m) - f.mu);
        Mat2 Tg = Mat2::Zero();
        Tg(0, 0) = std::sqrt(G.dt);
        Tg(1, 1) = G.dt * std::sqrt(G.dt);
        const Mat2 A = f.Linv * Rinv * Tg * Eigen::LLT<Mat2>(G.Kh).matrixL().toDenseMatrix();
        const Mat2 inner = (Mat2::Identity() + A.transpose() * A).inverse();
        const Mat2 Ls = A * Eigen::LLT<Mat2>(0.5 * (inner + inner.transpose())).matrixL().toDenseMatrix();
        const Vec2 mus = (Mat2::Identity() + A * A.transpose()).lu().solve(mu2);
        const double detLs = std::abs(Ls.determinant());
        const Mat2 RtP = G.R.transpose() * G.P;
        const double RtPR11 = (RtP * G.R)(0, 0);
        const double gscale = qg ? 1.0 / std::sqrt(v - s_) : 0.0;
        double sp = 0.0, sg = 0.0;
        for (int i = 0; i < gh_nodes; ++i)
            for (int j = 0; j < gh_nodes; ++j) {
                const double om = gh.w[i] * gh.w[j];
                if (om < 1e-13 * wmax) continue;
                const Vec2 z(gh.x[i], gh.x[j]);
                const Vec2 u = mus + Ls * z;
                const Vec2 w = f.mu + f.L * u;
                const Vec2 e = y - G.R * w - G.m;
                const double ex = -0.5 * u.squaredNorm() + 0.5 * z.squaredNorm() - 0.5 * e.dot(G.P * e);
                // φ(u)/φ(z) · p̃(v, w, t, y)
                const double ker = std::exp(ex) * G.norm;
                double H;
                if (fast) {
                    const double sw = model_->sigma1(v, w[0], w[1]);
                    const double d1 = (RtP * e)[0];
                    H = 0.5 * (sw * sw - sig_y * sig_y) * (d1 * d1 - RtPR11) * ker;
                } else {
                    const double pt = G.density(w, y);
                    H = pt > 0 ? fp->generator_gap_apply(mo, point(w), point(y)) / pt * ker : 0.0;
                }
                const double c = om * H;
                if (q) sp += c * lattice_value(*q, v, f, u);
                if (qg) sg += c * lattice_value(*qg, v, f, u);
            }
        Ip += wt * detLs * sp;
        Ig += wt * detLs * sg * gscale;
    }
    return {p + Ip, g + Ig};
}

void ProxySolver::solve() {
    trace_.clear();
    if (trivial_) {
        trace_.push_back(0.0);
        converged_ = solved_ = true;
        return;
    }
    const int M = opt_.slices, n = opt_.lattice;
    const double hw = opt_.lattice_half_width;
    const size_t slab = static_cast<size_t>(n) * n;
    const std::vector<double> us = linspace(-hw, hw, n);
    auto phi = [](double a, double b) { return std::exp(-0.5 * (a * a + b * b)) / (2.0 * kPi); };

    struct SliceData {
        Frame f;
        std::vector<std::pair<double, double>> rule;
        std::vector<Frame> frames;
    };
    std::vector<SliceData> sl(M + 1);
    for (int j = 1; j <= M; ++j) {
        const double v = s_ + (t_max_ - s_) * sqr(double(j) / M);
        sl[j].f = frame(v);
        sl[j].rule = time_rule(v, opt_.lattice_time_nodes);
        for (const auto& r : sl[j].rule) sl[j].frames.push_back(frame(r.first));
    }

    q_.assign((M + 1) * slab, 1.0);
    qg_.assign((M + 1) * slab, 0.0);
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2) qg_[i1 * n + i2] = grad_limit_.dot(Vec2(us[i1], us[i2]));

    std::vector<double> dens_old, dens_new(M * slab);
    auto sweep = [&](bool first) {
        std::vector<double> q2 = q_, qg2 = qg_;
        for (int j = 1; j <= M; ++j) {
            const Frame& f = sl[j].f;
            const double detL = f.L.determinant();
            const double sq = std::sqrt(f.v - s_);
            for (int i1 = 0; i1 < n; ++i1)
                for (int i2 = 0; i2 < n; ++i2) {
                    const Vec2 y = f.mu + f.L * Vec2(us[i1], us[i2]);
                    const auto r = apply(first ? nullptr : &q_, first || !opt_.with_gradient ? nullptr : &qg_, f.v, y,
                                         sl[j].rule, sl[j].frames, opt_.lattice_gh_nodes);
                    const size_t k = j * slab + i1 * n + i2;
                    const double ph = phi(us[i1], us[i2]);
                    q2[k] = r.first * detL / ph;
                    qg2[k] = r.second * sq * detL / ph;
                    dens_new[(j - 1) * slab + i1 * n + i2] = r.first;
                }
        }
        q_.swap(q2);
        qg_.swap(qg2);
    };

    sweep(true);
    int rising = 0;
    converged_ = false;
    for (int it = 0; it < opt_.max_iter; ++it) {
        dens_old = dens_new;
        sweep(false);
        const double ch = sup_relative(dens_new, dens_old);
        trace_.push_back(ch);
        if (!std::isfinite(ch)) throw DivergenceError("proxy solver: non-finite iterate", trace_);
        if (trace_.size() >= 2 && ch > trace_[trace_.size() - 2]) {
            if (++rising >= 3) throw DivergenceError("proxy solver: Picard change increased 3 times in a row", trace_);
        } else {
            rising = 0;
        }
        if (ch < opt_.tol) {
            converged_ = true;
            break;
        }
    }
    solved_ = true;
}

double ProxySolver::density(double t, const PhasePoint& y) const {
    if (!(t > s_) || t > t_max_ + 1e-12) throw DomainError("proxy density: t outside (s, t_max]");
    if (!solved_) throw ConfigError("proxy density: call solve() first");
    const auto rule = time_rule(t, opt_.time_nodes);
    std::vector<Frame> frames;
    for (const auto& r : rule) frames.push_back(frame(r.first));
    return apply(&q_, nullptr, t, vec(y), rule, frames, opt_.gh_nodes).first;
}

double ProxySolver::gradient_x1(double t, const PhasePoint& y) const {
    if (!opt_.with_gradient) throw ConfigError("proxy gradient: solver built without gradient");
    if (!(t > s_) || t > t_max_ + 1e-12) throw DomainError("proxy gradient: t outside (s, t_max]");
    if (!solved_) throw ConfigError("proxy gradient: call solve() first");
    const auto rule = time_rule(t, opt_.time_nodes);
    std::vector<Frame> frames;
    for (const auto& r : rule) frames.push_back(frame(r.first));
    return apply(nullptr, &qg_, t, vec(y), rule, frames, opt_.gh_nodes).second;
}

DensityField ProxySolver::field(double t, const ForwardGrid& grid) const {
    if (!(t > s_) || t > t_max_ + 1e-12) throw DomainError("proxy field: t outside (s, t_max]");
    if (!solved_) throw ConfigError("proxy field: call solve() first");
    DensityField out;
    out.s = s_;
    out.t = t;
    out.x = x_;
    out.source = "proxy:" + model_->name;
    out.grid = grid;
    out.trace = trace_;
    out.iterations = iterations();
    out.converged = converged_;
    const auto rule = time_rule(t, opt_.time_nodes);
    std::vector<Frame> frames;
    for (const auto& r : rule) frames.push_back(frame(r.first));
    out.values.resize(grid.size());
    if (opt_.with_gradient) out.grad_x1.resize(grid.size());
    for (int i1 = 0; i1 < grid.n; ++i1)
        for (int i2 = 0; i2 < grid.n; ++i2) {
            const auto r = apply(&q_, opt_.with_gradient ? &qg_ : nullptr, t, vec(grid.point(i1, i2)), rule, frames,
                                 opt_.gh_nodes);
            out.values[i1 * grid.n + i2] = r.first;
            if (opt_.with_gradient) out.grad_x1[i1 * grid.n + i2] = r.second;
        }
    return out;
}

DensityField proxy_density_series(const ModelSpec& model, double s, const PhasePoint& x, double t,
                                  const ForwardGrid& grid, int K_terms, ProxyOptions opt) {
    if (K_terms < 0) throw DomainError("proxy_density_series: K_terms must be >= 0");
    opt.max_iter = K_terms;
    ProxySolver solver(model, s, x, t, opt);
    solver.solve();
    return solver.field(t, grid);
}

Vec proxy_gradient(const ModelSpec& model, double s, const PhasePoint& x, double t, const PhasePoint& y,
                   ProxyOptions opt) {
    opt.with_gradient = true;
    ProxySolver solver(model, s, x, t, opt);
    solver.solve();
    Vec g(1);
    g[0] = solver.gradient_x1(t, y);
    return g;
}

ProbeResult proxy_regularity_probe(const ModelSpec& model, ProbeKind kind, double eta, double s,
                                   const PhasePoint& x, double t, const std::vector<PhasePoint>& battery,
                                   ProxyOptions opt) {
    if (!(eta > 0)) throw DomainError("regularity probe: exponent must be positive");
    if (battery.empty()) throw DomainError("regularity probe: empty battery");
    opt.with_gradient = false;
    const double dt = t - s;
    const std::vector<double> deltas = logspace(0.1 * std::sqrt(dt), 1e-3 * std::sqrt(dt), 7);
    ProxySolver base(model, s, x, t, opt);
    base.solve();
    const Gauss2 ref = base.reference(t);
    auto env = [&](const PhasePoint& xx, const PhasePoint& yy) { return ref.density(vec(xx), vec(yy)); };
    auto shift = [](const PhasePoint& p, int dir, double d) {
        return dir == 0 ? PhasePoint::d1(p.x1[0] + d, p.x2[0]) : PhasePoint::d1(p.x1[0], p.x2[0] + d * d * d);
    };

    ProbeResult res;
    for (double d : deltas) {
        double inc = 0.0, ratio = 0.0;
        for (int dir = 0; dir < 2; ++dir) {
            std::unique_ptr<ProxySolver> other;
            PhasePoint xs = x;
            if (kind != ProbeKind::forward) {
                xs = shift(x, dir, d);
                other = std::make_unique<ProxySolver>(model, s, xs, t, opt);
                other->solve();
            }
            for (const PhasePoint& y : battery) {
                double a = 0.0, e = 0.0;
                if (kind == ProbeKind::forward) {
                    const PhasePoint y2 = shift(y, dir, d);
                    a = std::abs(base.density(t, y2) - base.density(t, y));
                    e = env(x, y) + env(x, y2);
                } else if (kind == ProbeKind::backward) {
                    a = std::abs(other->density(t, y) - base.density(t, y));
                    e = env(x, y) + env(xs, y);
                } else {
                    const PhasePoint y2 = shift(y, dir, d);
                    a = std::abs(base.density(t, y) - base.density(t, y2) - other->density(t, y) +
                                 other->density(t, y2));
                    e = env(x, y) + env(x, y2) + env(xs, y) + env(xs, y2);
                }
                inc = std::max(inc, a);
                if (e > 0) ratio = std::max(ratio, a / (std::pow(d, eta) * e));
            }
        }
        res.distances.push_back(d);
        res.increments.push_back(inc);
        res.constant = std::max(res.constant, ratio);
    }
    std::vector<double> lx, ly;
    for (size_t i = 0; i < deltas.size(); ++i)
        if (res.increments[i] > 0) {
            lx.push_back(std::log(res.distances[i]));
            ly.push_back(std::log(res.increments[i]));
        }
    if (lx.size() < 2) {
        res.slope = INFINITY;  // no measurable increment
        res.r2 = 1.0;
        return res;
    }
    const LinearFit fit = linear_fit(lx, ly);
    res.slope = fit.slope;
    res.r2 = fit.r2;
    return res;
}

}  // namespace kpx
