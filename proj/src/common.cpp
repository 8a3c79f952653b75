#include "kpx/common.hpp"

#include <algorithm>

namespace kpx {

double sup_relative(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ConfigError("sup_relative: size mismatch");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
    return num / den;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    if (n < 2 || y.size() != n) throw DomainError("linear_fit: need >= 2 matching points");
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = (sxx > 0 && syy > 0) ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

std::vector<double> logspace(double a, double b, int n) {
    std::vector<double> v = linspace(std::log(a), std::log(b), n);
    for (auto& x : v) x = std::exp(x);
    return v;
}

}  // namespace kpx
