#include "kpx/model.hpp"

namespace kpx {

Mat ModelSpec::diffusion(double t, const PhasePoint& x) const {
    const Mat s = sigma(t, x);
    return s * s.transpose();
}

void ModelSpec::validate() const {
    if (!(beta > -0.5 && beta < 0.0))
        throw ConfigError("beta = " + std::to_string(beta) + " outside (-1/2, 0)");
    if (!(nu > -2.0 * beta && nu < 1.0))
        throw ConfigError("nu = " + std::to_string(nu) + " outside (-2 beta, 1) = (" + std::to_string(-2 * beta) + ", 1)");
    if (!(T > 0)) throw ConfigError("T must be positive");
    if (d < 1) throw ConfigError("d must be >= 1");
    if (!sigma || !F.F1 || !F.F2 || !F.gradF2) throw ConfigError("model '" + name + "': missing coefficient");
    const PhasePoint o = PhasePoint::zero(d);
    Eigen::SelfAdjointEigenSolver<Mat> es(diffusion(0.0, o));
    if (es.eigenvalues().minCoeff() <= 0) throw ConfigError("model '" + name + "': sigma is not elliptic");
    F.check_hormander(0.0, o, hormander_lo, hormander_hi);
}

ModelSpec make_model(const std::string& name, double lambda) {
    ModelSpec m;
    m.name = name;
    m.F = VectorFieldSpec::kinetic(1);
    m.sigma_x1_only = true;
    m.kinetic_base = true;
    if (name == "kinetic_const") {
        const double s = std::sqrt(lambda);
        m.sigma1 = [s](double, double, double) { return s; };
        m.sigma_constant = true;
    } else if (name == "kinetic_smooth") {
        m.sigma1 = [](double, double x1, double) { return 2.0 + 0.5 * std::sin(x1); };
    } else if (name == "rough_sigma") {
        m.sigma1 = [](double, double x1, double) {
            const double s = std::sin(x1);
            return 1.5 + 0.5 * std::copysign(std::sqrt(std::abs(s)), s);
        };
        m.sigma_holder = 0.5;
    } else {
        throw ConfigError("unknown model '" + name + "' (known: kinetic_const, kinetic_smooth, rough_sigma)");
    }
    auto s1 = m.sigma1;
    m.sigma = [s1](double t, const PhasePoint& x) { return Mat::Constant(1, 1, s1(t, x.x1[0], x.x2[0])); };
    return m;
}

std::vector<std::string> model_names() { return {"kinetic_const", "kinetic_smooth", "rough_sigma"}; }

}  // namespace kpx
