#include "kpx/quadrature.hpp"

#include "kpx/common.hpp"

#include <gsl/gsl_integration.h>

#include <map>
#include <memory>
#include <mutex>

namespace kpx {

namespace {

Rule fixed_rule(const gsl_integration_fixed_type* type, int n, double a, double b) {
    std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
        gsl_integration_fixed_alloc(type, static_cast<size_t>(n), a, b, 0.0, 0.0),
        &gsl_integration_fixed_free);
    if (!ws) throw NumericalError("quadrature rule allocation failed");
    Rule r;
    const double* x = gsl_integration_fixed_nodes(ws.get());
    const double* w = gsl_integration_fixed_weights(ws.get());
    r.x.assign(x, x + n);
    r.w.assign(w, w + n);
    return r;
}

}  // namespace

Rule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw DomainError("gauss_legendre: n < 1");
    static std::mutex mu;
    static std::map<int, Rule> cache;
    Rule ref;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, fixed_rule(gsl_integration_fixed_legendre, n, -1.0, 1.0)).first;
        ref = it->second;
    }
    const double c = 0.5 * (b - a), m = 0.5 * (b + a);
    for (int i = 0; i < n; ++i) {
        ref.x[i] = m + c * ref.x[i];
        ref.w[i] *= c;
    }
    return ref;
}

const Rule& gauss_hermite_normal(int n) {
    if (n < 1) throw DomainError("gauss_hermite_normal: n < 1");
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Rule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        // weight exp(-x^2/2) corresponds to b = 1/2 in GSL's exp(-b (x-a)^2)
        Rule r = fixed_rule(gsl_integration_fixed_hermite, n, 0.0, 0.5);
        const double norm = 1.0 / std::sqrt(2.0 * kPi);
        for (auto& w : r.w) w *= norm;
        slot = std::make_unique<Rule>(std::move(r));
    }
    return *slot;
}

std::vector<double> simpson_weights(int n, double a, double b) {
    if (n < 3 || n % 2 == 0) throw DomainError("simpson_weights: need odd n >= 3");
    const double h = (b - a) / (n - 1);
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        if (i == 0 || i == n - 1)
            w[i] = h / 3.0;
        else
            w[i] = (i % 2 ? 4.0 : 2.0) * h / 3.0;
    }
    return w;
}

double trapezoid(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n; ++i) s += f(a + i * h);
    return s * h;
}

double trapezoid2(const std::function<double(double, double)>& f, double ax, double bx,
                  double ay, double by, int nx, int ny) {
    const double hx = (bx - ax) / nx, hy = (by - ay) / ny;
    double s = 0.0;
    for (int i = 0; i <= nx; ++i) {
        const double wx = (i == 0 || i == nx) ? 0.5 : 1.0;
        const double x = ax + i * hx;
        for (int j = 0; j <= ny; ++j) {
            const double wy = (j == 0 || j == ny) ? 0.5 : 1.0;
            s += wx * wy * f(x, ay + j * hy);
        }
    }
    return s * hx * hy;
}

double adaptive_gl(const std::function<double(double)>& f, double a, double b, double tol,
                   int max_nodes) {
    auto eval = [&](int n) {
        Rule r = gauss_legendre(n, a, b);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += r.w[i] * f(r.x[i]);
        return s;
    };
    int n = 16;
    double prev = eval(n);
    while (2 * n <= max_nodes) {
        n *= 2;
        const double cur = eval(n);
        if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw NumericalError("adaptive_gl: no convergence within node budget");
}

}  // namespace kpx
