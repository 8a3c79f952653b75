#include "kpx/stochastic.hpp"

#include "kpx/besov.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

namespace kpx {

namespace {

struct PathState {
    double x1, x2, I;
};

// drift level n on each slice of the drift's time partition (empty when b is dropped)
std::vector<SpectralField> drift_slices(const ModelSpec& model, int n) {
    std::vector<SpectralField> out;
    if (!model.drift || n <= 0) return out;
    const DriftSpec& D = *model.drift;
    for (size_t i = 0; i + 1 < D.slice_times.size(); ++i)
        out.push_back(D.field(0.5 * (D.slice_times[i] + D.slice_times[i + 1]), n));
    return out;
}

std::mt19937_64 path_rng(std::uint64_t seed, long i) {
    const auto u = static_cast<std::uint64_t>(i);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(u >> 32)};
    return std::mt19937_64(seq);
}

void run_range(const ModelSpec& model, const SimConfig& cfg, const std::vector<SpectralField>& b,
               const std::vector<int>& rec_steps, long lo, long hi, SimulationRun& out) {
    const double dt = (cfg.t - cfg.s) / cfg.M;
    const double sq = std::sqrt(dt);
    const bool kin = model.kinetic_base;
    const DriftSpec* D = model.drift.get();
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool integ = static_cast<bool>(cfg.integrand);

    auto f2 = [&](double r, double a1, double a2) {
        if (kin) return a1;
        return model.F.F2(r, PhasePoint::d1(a1, a2))[0];
    };
    auto sig = [&](double r, double a1, double a2) {
        if (model.sigma1) return model.sigma1(r, a1, a2);
        return model.sigma_scalar(r, PhasePoint::d1(a1, a2));
    };
    // slice of the left endpoint of every step
    std::vector<int> slice(static_cast<size_t>(cfg.M), -1);
    if (!b.empty())
        for (int k = 0; k < cfg.M; ++k) slice[static_cast<size_t>(k)] = D->slice_of(cfg.s + k * dt);

    for (long i = lo; i < hi; ++i) {
        std::mt19937_64 rng = path_rng(cfg.seed, i);
        PathState p{cfg.x.x1[0], cfg.x.x2[0], 0.0};
        double fprev = integ ? cfg.integrand(cfg.s, PhasePoint::d1(p.x1, p.x2)) : 0.0;
        size_t ri = 0;
        auto record = [&](int k) {
            while (ri < rec_steps.size() && rec_steps[ri] == k) {
                out.rec_x1[ri][static_cast<size_t>(i)] = p.x1;
                out.rec_x2[ri][static_cast<size_t>(i)] = p.x2;
                if (integ) out.rec_integral[ri][static_cast<size_t>(i)] = p.I;
                ++ri;
            }
        };
        record(0);
        for (int k = 0; k < cfg.M; ++k) {
            const double r = cfg.s + k * dt;
            double drift = kin ? 0.0 : model.F.F1(r, PhasePoint::d1(p.x1, p.x2))[0];
            if (!b.empty()) drift += b[static_cast<size_t>(slice[static_cast<size_t>(k)])].eval(p.x1, p.x2);
            double z = normal(rng);
            if (cfg.coarsen > 1) {
                for (int c = 1; c < cfg.coarsen; ++c) z += normal(rng);
                z /= std::sqrt(static_cast<double>(cfg.coarsen));
            }
            const double x1n = p.x1 + drift * dt + sig(r, p.x1, p.x2) * sq * z;
            const double x2n = p.x2 + 0.5 * dt * (f2(r, p.x1, p.x2) + f2(r + dt, x1n, p.x2));
            p.x1 = x1n;
            p.x2 = x2n;
            if (integ) {
                // left limit at the step end so piecewise-constant sources stay on one slice
                const double rn = r + dt;
                p.I += 0.5 * dt * (fprev + cfg.integrand(std::nextafter(rn, r), PhasePoint::d1(p.x1, p.x2)));
                fprev = cfg.integrand(rn, PhasePoint::d1(p.x1, p.x2));
            }
            record(k + 1);
        }
        out.x1[static_cast<size_t>(i)] = p.x1;
        out.x2[static_cast<size_t>(i)] = p.x2;
        if (integ) out.integral[static_cast<size_t>(i)] = p.I;
    }
}

int resolve_jobs(int jobs) {
    if (jobs > 0) return jobs;
    const unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

}  // namespace

Vec2 SimulationRun::mean() const {
    Vec2 m = Vec2::Zero();
    for (size_t i = 0; i < x1.size(); ++i) m += Vec2(x1[i], x2[i]);
    return m / static_cast<double>(x1.size());
}

Mat2 SimulationRun::covariance() const {
    const Vec2 m = mean();
    Mat2 C = Mat2::Zero();
    for (size_t i = 0; i < x1.size(); ++i) {
        const Vec2 e(x1[i] - m[0], x2[i] - m[1]);
        C += e * e.transpose();
    }
    return C / static_cast<double>(x1.size() - 1);
}

void SimulationRun::write_samples(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    // header: 8-byte magic, uint64 N, uint64 M, uint64 seed, float64 s, float64 t;
    // then N float64 x1 followed by N float64 x2 (host byte order, little-endian on supported targets)
    const char magic[8] = {'K', 'P', 'X', 'S', 'A', 'M', 'P', '1'};
    f.write(magic, 8);
    const std::uint64_t hdr[3] = {static_cast<std::uint64_t>(x1.size()), static_cast<std::uint64_t>(M), seed};
    f.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    f.write(reinterpret_cast<const char*>(&s), sizeof s);
    f.write(reinterpret_cast<const char*>(&t), sizeof t);
    f.write(reinterpret_cast<const char*>(x1.data()), static_cast<std::streamsize>(x1.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(x2.data()), static_cast<std::streamsize>(x2.size() * sizeof(double)));
}

SimulationRun euler_maruyama(const ModelSpec& model, const SimConfig& cfg) {
    if (model.d != 1) throw ConfigError("euler_maruyama: d = 1 only");
    if (cfg.M < 256) throw DomainError("euler_maruyama: need M >= 256 steps");
    if (cfg.coarsen < 1) throw DomainError("euler_maruyama: coarsen must be >= 1");
    if (cfg.N < 1) throw DomainError("euler_maruyama: need N >= 1 paths");
    if (!(cfg.t > cfg.s)) throw DomainError("euler_maruyama: need t > s");
    if (cfg.x.dim() != 1) throw DomainError("euler_maruyama: start point must have d = 1");

    const std::vector<SpectralField> b = drift_slices(model, cfg.n);
    const double dt = (cfg.t - cfg.s) / cfg.M;
    SimulationRun run;
    run.s = cfg.s;
    run.t = cfg.t;
    run.M = cfg.M;
    run.n = cfg.n;
    run.seed = cfg.seed;
    const auto N = static_cast<size_t>(cfg.N);
    run.x1.resize(N);
    run.x2.resize(N);
    if (cfg.integrand) run.integral.resize(N);

    std::vector<int> rec_steps;
    for (double r : cfg.record_times) {
        if (r < cfg.s - 1e-12 || r > cfg.t + 1e-12) throw DomainError("euler_maruyama: record time outside [s, t]");
        rec_steps.push_back(static_cast<int>(std::lround((r - cfg.s) / dt)));
    }
    std::vector<size_t> order(rec_steps.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t c) { return rec_steps[a] < rec_steps[c]; });
    std::vector<int> sorted_steps;
    for (size_t i : order) {
        sorted_steps.push_back(rec_steps[i]);
        run.record_times.push_back(cfg.s + rec_steps[i] * dt);
    }
    run.rec_x1.assign(sorted_steps.size(), std::vector<double>(N));
    run.rec_x2.assign(sorted_steps.size(), std::vector<double>(N));
    run.rec_integral.assign(sorted_steps.size(), std::vector<double>(cfg.integrand ? N : 0));

    const int jobs = std::min<long>(resolve_jobs(cfg.jobs), cfg.N);
    if (jobs <= 1) {
        run_range(model, cfg, b, sorted_steps, 0, cfg.N, run);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(static_cast<size_t>(jobs));
        for (int w = 0; w < jobs; ++w) {
            const long lo = cfg.N * w / jobs, hi = cfg.N * (w + 1) / jobs;
            pool.emplace_back([&, lo, hi, w] {
                try {
                    run_range(model, cfg, b, sorted_steps, lo, hi, run);
                } catch (...) {
                    errs[static_cast<size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }
    return run;
}

DensityField kde_density(const SimulationRun& run, const ForwardGrid& grid, double scale, int bins) {
    const long N = run.size();
    if (N < 2) throw DomainError("kde_density: need at least 2 samples");
    if (!(scale > 0)) throw DomainError("kde_density: bandwidth scale must be positive");
    if (bins < 16) throw DomainError("kde_density: too few bins");
    const Vec2 mu = run.mean();
    const Mat2 C = run.covariance();
    Eigen::LLT<Mat2> llt(C);
    if (llt.info() != Eigen::Success || !(C.determinant() > 0))
        throw NumericalError("kde_density: degenerate sample covariance");
    const Mat2 L = llt.matrixL();
    const Mat2 Li = L.inverse();
    const double h = scale * std::pow(static_cast<double>(N), -1.0 / 6.0);

    // cloud-in-cell histogram of whitened samples on the torus [−R, R)^2
    const double R = 10.0 + 4.0 * h;
    GridField hist;
    hist.n1 = hist.n2 = bins;
    hist.L1 = hist.L2 = 2.0 * R;
    hist.v.assign(static_cast<size_t>(bins) * bins, 0.0);
    const double cell = 2.0 * R / bins;
    for (long i = 0; i < N; ++i) {
        const Vec2 u = Li * (Vec2(run.x1[static_cast<size_t>(i)], run.x2[static_cast<size_t>(i)]) - mu);
        const double a = (u[0] + R) / cell, c = (u[1] + R) / cell;
        const int i1 = static_cast<int>(std::floor(a)), i2 = static_cast<int>(std::floor(c));
        if (i1 < 0 || i2 < 0 || i1 + 1 >= bins || i2 + 1 >= bins) continue;  // far tail: counted in N only
        const double f1 = a - i1, f2 = c - i2;
        hist.at(i1, i2) += (1 - f1) * (1 - f2);
        hist.at(i1 + 1, i2) += f1 * (1 - f2);
        hist.at(i1, i2 + 1) += (1 - f1) * f2;
        hist.at(i1 + 1, i2 + 1) += f1 * f2;
    }
    const double norm = 1.0 / (static_cast<double>(N) * cell * cell);
    for (double& v : hist.v) v *= norm;
    const GridField f = apply_multiplier(hist, [h](double k1, double k2) {
        return std::exp(-0.5 * h * h * (k1 * k1 + k2 * k2));
    });

    const double jac = 1.0 / L.determinant();
    auto interp = [&](const Vec2& u) {
        const double a = (u[0] + R) / cell, c = (u[1] + R) / cell;
        const int i1 = static_cast<int>(std::floor(a)), i2 = static_cast<int>(std::floor(c));
        if (i1 < 0 || i2 < 0 || i1 + 1 >= bins || i2 + 1 >= bins) return 0.0;
        const double f1 = a - i1, f2 = c - i2;
        return (1 - f1) * (1 - f2) * f.at(i1, i2) + f1 * (1 - f2) * f.at(i1 + 1, i2) +
               (1 - f1) * f2 * f.at(i1, i2 + 1) + f1 * f2 * f.at(i1 + 1, i2 + 1);
    };

    DensityField out;
    out.s = run.s;
    out.t = run.t;
    out.source = "kde";
    out.grid = grid;
    out.values.resize(static_cast<size_t>(grid.size()));
    for (int i1 = 0; i1 < grid.n; ++i1)
        for (int i2 = 0; i2 < grid.n; ++i2) {
            const PhasePoint y = grid.point(i1, i2);
            const Vec2 u = Li * (Vec2(y.x1[0], y.x2[0]) - mu);
            out.values[static_cast<size_t>(i1) * grid.n + i2] = std::max(0.0, interp(u) * jac);
        }
    return out;
}

PhasePoint transported_mean(const ModelSpec& model, int n, double s, const PhasePoint& x, double t) {
    VectorFieldSpec G = model.F;
    const std::vector<SpectralField> b = drift_slices(model, n);
    if (!b.empty()) {
        const DriftSpec* D = model.drift.get();
        const FieldFn F1 = model.F.F1;
        G.F1 = [F1, D, b](double r, const PhasePoint& y) {
            Vec v = F1(r, y);
            v[0] += b[static_cast<size_t>(D->slice_of(r))].eval(y.x1[0], y.x2[0]);
            return v;
        };
        G.affine = false;
        G.piecewise_constant_time = true;
        G.time_breaks = D->slice_times;
    }
    return mollified_flow(G, t, s, x);
}

BoundReport aronson_fit(const DensityField& density, const ModelSpec& model, int n, double central) {
    if (!(density.t > density.s)) throw DomainError("aronson_fit: need t > s");
    if (!(central > 0)) throw DomainError("aronson_fit: central radius must be positive");
    if (model.d != 1) throw ConfigError("aronson_fit: d = 1 only");
    const double dt = density.t - density.s;

    BoundReport rep;
    rep.flow_point = transported_mean(model, n, density.s, density.x, density.t);

    std::vector<double> p, tail_p, grad;
    std::vector<PhasePoint> z, tail_z, grad_z;
    const ForwardGrid& g = density.grid;
    const bool with_grad = density.grad_x1.size() == density.values.size();
    for (int i1 = 0; i1 < g.n; ++i1)
        for (int i2 = 0; i2 < g.n; ++i2) {
            const PhasePoint y = g.point(i1, i2);
            const Vec2 u = g.whiten(y);
            const double r = std::max(std::abs(u[0]), std::abs(u[1]));
            const double v = density.at(i1, i2);
            const PhasePoint d = rep.flow_point - y;
            if (r <= central) {
                if (!(v > 0)) throw NumericalError("aronson_fit: non-positive density on the central region");
                p.push_back(v);
                z.push_back(d);
                if (with_grad) {
                    grad.push_back(density.grad_x1[static_cast<size_t>(i1) * g.n + i2]);
                    grad_z.push_back(d);
                }
            } else if (r <= central + 2.0) {
                tail_p.push_back(v);
                tail_z.push_back(d);
            }
        }
    if (p.size() < 4) throw DomainError("aronson_fit: central region holds too few grid points");
    rep.fit = fit_sandwich(p, z, dt);
    GaussKernelParams kp;
    kp.lambda = rep.fit.lambda_upper;
    for (size_t i = 0; i < tail_p.size(); ++i) {
        const double env = rep.fit.C_upper * gauss_deg(kp, dt, tail_z[i]);
        if (env > 0) rep.tail_ratio = std::max(rep.tail_ratio, tail_p[i] / env);
    }
    if (with_grad) {
        const SandwichFit gf = fit_upper(grad, grad_z, dt, 1.0 / std::sqrt(dt));
        rep.grad_C = gf.C;
        rep.grad_lambda = gf.lambda;
    }
    return rep;
}

ProbeResult holder_probe(const std::function<double(const PhasePoint&, const PhasePoint&)>& f, HolderVariable var,
                         double eta, double s, double t, const PhasePoint& x, const std::vector<PhasePoint>& ys,
                         const std::function<double(const PhasePoint&, const PhasePoint&)>& kernel) {
    if (!(eta > 0 && eta <= 1)) throw DomainError("holder_probe: exponent must lie in (0, 1]");
    if (!(t > s)) throw DomainError("holder_probe: need t > s");
    if (ys.empty()) throw DomainError("holder_probe: empty battery");
    const double dt = t - s;
    const int K = 7;
    ProbeResult res;

    std::vector<std::vector<double>> inc;  // per direction, per distance
    std::vector<double> dist;
    if (var == HolderVariable::backward_x2) {
        dist = logspace(0.1 * std::pow(dt, 1.5), 1e-3 * std::pow(dt, 1.5), K);
        inc.assign(1, std::vector<double>(K, 0.0));
        const double ex = (1.0 + eta) / 3.0;
        for (int k = 0; k < K; ++k) {
            const PhasePoint xs = PhasePoint::d1(x.x1[0], x.x2[0] + dist[static_cast<size_t>(k)]);
            for (const PhasePoint& y : ys) {
                const double a = std::abs(f(xs, y) - f(x, y));
                inc[0][static_cast<size_t>(k)] = std::max(inc[0][static_cast<size_t>(k)], a);
                const double e = kernel(x, y) + kernel(xs, y);
                if (e > 0)
                    res.constant = std::max(res.constant,
                                            a * std::pow(dt, 1.5 * ex) / (std::pow(dist[static_cast<size_t>(k)], ex) * e));
            }
        }
    } else {
        dist = logspace(0.1 * std::sqrt(dt), 1e-3 * std::sqrt(dt), K);
        inc.assign(2, std::vector<double>(K, 0.0));
        const bool fwd = var == HolderVariable::forward;
        for (int dir = 0; dir < 2; ++dir)
            for (int k = 0; k < K; ++k) {
                const double d = dist[static_cast<size_t>(k)];
                auto shift = [&](const PhasePoint& q) {
                    return dir == 0 ? PhasePoint::d1(q.x1[0] + d, q.x2[0]) : PhasePoint::d1(q.x1[0], q.x2[0] + d * d * d);
                };
                const PhasePoint xs = fwd ? x : shift(x);
                for (const PhasePoint& y : ys) {
                    const PhasePoint ysft = fwd ? shift(y) : y;
                    const double a = std::abs(f(xs, ysft) - f(x, y));
                    auto& slot = inc[static_cast<size_t>(dir)][static_cast<size_t>(k)];
                    slot = std::max(slot, a);
                    const double e = kernel(x, y) + kernel(xs, ysft);
                    if (e > 0) res.constant = std::max(res.constant, a * std::pow(dt, 0.5 * eta) / (std::pow(d, eta) * e));
                }
            }
    }

    res.distances = dist;
    res.increments.assign(static_cast<size_t>(K), 0.0);
    res.slope = INFINITY;
    res.r2 = 1.0;
    for (const auto& row : inc) {
        std::vector<double> lx, ly;
        for (int k = 0; k < K; ++k) {
            res.increments[static_cast<size_t>(k)] = std::max(res.increments[static_cast<size_t>(k)], row[static_cast<size_t>(k)]);
            if (row[static_cast<size_t>(k)] > 0) {
                lx.push_back(std::log(dist[static_cast<size_t>(k)]));
                ly.push_back(std::log(row[static_cast<size_t>(k)]));
            }
        }
        if (lx.size() < 2) continue;  // no measurable increment in this direction
        const LinearFit fit = linear_fit(lx, ly);
        if (fit.slope < res.slope) {
            res.slope = fit.slope;
            res.r2 = fit.r2;
        }
    }
    return res;
}

DefectResult martingale_defect(const ModelSpec& model, int n, const MildSolution& u, const CauchyData& data,
                               SimConfig cfg, int mid) {
    if (u.nodes() < 2) throw DomainError("martingale_defect: solution has no time ladder");
    if (mid <= 0 || mid >= u.nodes() - 1) throw DomainError("martingale_defect: mid must be an interior ladder node");
    cfg.s = u.times.front();
    cfg.t = u.t;
    cfg.n = n;
    const double t1 = u.times[static_cast<size_t>(mid)];
    const double dt = (cfg.t - cfg.s) / cfg.M;
    if (std::abs(std::round((t1 - cfg.s) / dt) * dt - (t1 - cfg.s)) > 1e-9)
        throw DomainError("martingale_defect: ladder node is not on the simulation step grid");
    cfg.record_times = {t1};
    cfg.integrand = [&data](double r, const PhasePoint& y) {
        // source slices are right-continuous; the last instant belongs to the final slice
        return data.g_at(r).eval(y.x1[0], y.x2[0]);
    };
    const SimulationRun run = euler_maruyama(model, cfg);

    const SpectralField u_mid = u.field(mid), u_end = u.field(u.nodes() - 1);
    const double u0 = u.eval(0, cfg.x);
    DefectResult res;
    res.N = run.size();
    res.features = {"early", "1", "x1", "x2", "sin x1", "cos x1"};
    const size_t F = res.features.size();
    std::vector<double> sum(F, 0.0), sum2(F, 0.0);
    for (long i = 0; i < run.size(); ++i) {
        const auto ii = static_cast<size_t>(i);
        const double a1 = run.rec_x1[0][ii], a2 = run.rec_x2[0][ii];
        const double um = u_mid.eval(a1, a2);
        const double early = um - u0 - run.rec_integral[0][ii];
        const double late = u_end.eval(run.x1[ii], run.x2[ii]) - um - (run.integral[ii] - run.rec_integral[0][ii]);
        const double w[6] = {early, late, late * a1, late * a2, late * std::sin(a1), late * std::cos(a1)};
        for (size_t k = 0; k < F; ++k) {
            sum[k] += w[k];
            sum2[k] += w[k] * w[k];
        }
    }
    const double Nd = static_cast<double>(res.N);
    for (size_t k = 0; k < F; ++k) {
        const double m = sum[k] / Nd;
        const double var = std::max(0.0, (sum2[k] / Nd - m * m) * Nd / std::max(1.0, Nd - 1.0));
        const double se = std::sqrt(var / Nd);
        res.mean.push_back(m);
        res.se.push_back(se);
        double tk;
        if (se > 0) {
            tk = std::abs(m) / se;
        } else {
            tk = m == 0.0 ? 0.0 : INFINITY;
        }
        res.max_abs_t = std::max(res.max_abs_t, tk);
    }
    return res;
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw DomainError("ks_distance: empty sample");
    std::sort(samples.begin(), samples.end());
    const double N = static_cast<double>(samples.size());
    double D = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double F = cdf(samples[i]);
        D = std::max({D, (i + 1) / N - F, F - i / N});
    }
    return D;
}

}  // namespace kpx
