#include "kpx/density.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

namespace kpx {

PhasePoint ForwardGrid::point_u(double u1, double u2) const {
    const Vec2 y = L * Vec2(u1, u2);
    return PhasePoint::d1(center.x1[0] + y[0], center.x2[0] + y[1]);
}

PhasePoint ForwardGrid::point(int i1, int i2) const { return point_u(u(i1), u(i2)); }

Vec2 ForwardGrid::whiten(const PhasePoint& y) const {
    const Vec2 e(y.x1[0] - center.x1[0], y.x2[0] - center.x2[0]);
    return L.triangularView<Eigen::Lower>().solve(e);
}

double ForwardGrid::cell_weight() const {
    const double h = 2.0 * half_width / (n - 1);
    return h * h * std::abs(L.determinant());
}

double DensityField::mass() const {
    const int n = grid.n;
    double m = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double w = (i == 0 || i == n - 1 ? 0.5 : 1.0) * (j == 0 || j == n - 1 ? 0.5 : 1.0);
            m += w * at(i, j);
        }
    return m * grid.cell_weight();
}

PhasePoint DensityField::mean() const {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) {
            const PhasePoint y = grid.point(i, j);
            const double p = at(i, j);
            m0 += p;
            m1 += p * y.x1[0];
            m2 += p * y.x2[0];
        }
    return PhasePoint::d1(m1 / m0, m2 / m0);
}

double DensityField::min_value() const { return *std::min_element(values.begin(), values.end()); }

void DensityField::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << std::setprecision(12);
    f << "i1,i2,y1,y2,value" << (grad_x1.empty() ? "" : ",grad_x1") << "\n";
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) {
            const PhasePoint y = grid.point(i, j);
            const size_t k = static_cast<size_t>(i) * grid.n + j;
            f << i << ',' << j << ',' << y.x1[0] << ',' << y.x2[0] << ',' << values[k];
            if (!grad_x1.empty()) f << ',' << grad_x1[k];
            f << "\n";
        }
}

}  // namespace kpx
