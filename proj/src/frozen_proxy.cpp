#include "kpx/frozen_proxy.hpp"

namespace kpx {

PhasePoint FrozenMoments::mean(const PhasePoint& x) const {
    return PhasePoint::from_stacked(R * x.stacked() + m);
}

double FrozenMoments::density(const PhasePoint& x, const PhasePoint& y) const {
    const Vec e = y.stacked() - R * x.stacked() - m;
    const int d = x.dim();
    return std::exp(-0.5 * e.dot(precision * e) - 0.5 * log_det - d * std::log(2.0 * kPi));
}

Vec FrozenMoments::grad_x(const PhasePoint& x, const PhasePoint& y) const {
    const Vec e = y.stacked() - R * x.stacked() - m;
    return R.transpose() * (precision * e) * density(x, y);
}

Vec FrozenMoments::grad_x1(const PhasePoint& x, const PhasePoint& y) const {
    return grad_x(x, y).head(x.dim());
}

Mat FrozenMoments::hess_x(const PhasePoint& x, const PhasePoint& y) const {
    const Vec e = y.stacked() - R * x.stacked() - m;
    const Vec Pe = precision * e;
    return R.transpose() * (Pe * Pe.transpose() - precision) * R * density(x, y);
}

FrozenProxy::FrozenProxy(const ModelSpec& model, double tau, const PhasePoint& xi, double t_lo, double t_hi,
                         int path_steps)
    : model_(&model), tau_(tau), xi_(xi), t_lo_(t_lo), t_hi_(t_hi) {
    if (!(t_lo <= tau && tau <= t_hi)) throw DomainError("FrozenProxy: need t_lo <= tau <= t_hi");
    if (xi.dim() != model.d) throw ConfigError("FrozenProxy: freezing point dimension differs from the model");
    if (t_lo < tau) {
        back_ = integrate_flow_path(model.F, tau, t_lo, xi, path_steps);
        has_back_ = true;
    }
    if (t_hi > tau) {
        fwd_ = integrate_flow_path(model.F, tau, t_hi, xi, path_steps);
        has_fwd_ = true;
    }
}

PhasePoint FrozenProxy::theta(double r) const {
    if (r < t_lo_ - 1e-12 || r > t_hi_ + 1e-12) throw DomainError("FrozenProxy: time outside the stored path");
    if (r < tau_ && has_back_) return back_.at(r);
    if (r > tau_ && has_fwd_) return fwd_.at(r);
    return xi_;
}

FrozenMoments FrozenProxy::moments(double t, double s, int nodes) const {
    if (nodes < 3 || nodes % 2 == 0) throw DomainError("moments: node count must be odd and >= 3");
    const int d = model_->d;
    FrozenMoments mo;
    mo.s = s;
    mo.t = t;
    mo.R = Mat::Identity(2 * d, 2 * d);
    mo.m = Vec::Zero(2 * d);
    mo.K = Mat::Zero(2 * d, 2 * d);
    if (t == s) {
        mo.K_hat = mo.K;
        return mo;
    }
    if (t < s) throw DomainError("moments: need s <= t");
    const double h = (t - s) / (nodes - 1);
    const std::vector<double> w = simpson_weights(nodes, s, t);
    std::vector<Mat> G(nodes), Sig(nodes);
    std::vector<Vec> c(nodes);
    for (int i = 0; i < nodes; ++i) {
        const double r = s + i * h;
        const PhasePoint th = theta(r);
        G[i] = model_->F.gradF2(r, th);
        Sig[i] = model_->diffusion(r, th);
        Vec ci(2 * d);
        ci << model_->F.F1(r, th), model_->F.F2(r, th) - G[i] * th.x1;
        c[i] = ci;
    }
    // Γ_i = ∫_{r_i}^t G, third-order panels from the right
    std::vector<Mat> Gam(nodes, Mat::Zero(d, d));
    for (int i = nodes - 2; i >= 0; --i) {
        Mat piece;
        if (i + 2 <= nodes - 1)
            piece = h / 12.0 * (5.0 * G[i] + 8.0 * G[i + 1] - G[i + 2]);
        else
            piece = h / 12.0 * (-G[i - 1] + 8.0 * G[i] + 5.0 * G[i + 1]);
        Gam[i] = Gam[i + 1] + piece;
    }
    for (int i = 0; i < nodes; ++i) {
        // R_{t,r} B = [I; Γ]
        Mat RB(2 * d, d);
        RB << Mat::Identity(d, d), Gam[i];
        mo.K += w[i] * RB * Sig[i] * RB.transpose();
        Vec Rc = c[i];
        Rc.tail(d) += Gam[i] * c[i].head(d);
        mo.m += w[i] * Rc;
    }
    mo.R.bottomLeftCorner(d, d) = Gam[0];
    mo.K = 0.5 * (mo.K + mo.K.transpose());

    const ScaleMatrix T(t - s);
    const Mat Ti = T.inverse_matrix(d);
    mo.K_hat = Ti * mo.K * Ti;
    Eigen::SelfAdjointEigenSolver<Mat> es(mo.K_hat);
    mo.hat_eigenvalues = es.eigenvalues();
    const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 1e-13 * lmax) || !std::isfinite(lmax))
        throw NumericalError("frozen covariance lost definiteness: scaled eigenvalues [" + std::to_string(lmin) +
                             ", " + std::to_string(lmax) + "], t - s = " + std::to_string(t - s));
    const Mat Khi = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    mo.precision = Ti * Khi * Ti;
    mo.log_det = es.eigenvalues().array().log().sum() + 4.0 * d * std::log(t - s);
    return mo;
}

Mat FrozenProxy::resolvent(double t, double s) const { return moments(t, s).R; }

PhasePoint FrozenProxy::frozen_mean(double t, double s, const PhasePoint& x) const {
    return moments(t, s).mean(x);
}

Mat FrozenProxy::frozen_cov(double t, double s) const { return moments(t, s).K; }

double FrozenProxy::frozen_density(double s, const PhasePoint& x, double t, const PhasePoint& y) const {
    if (!(t > s)) throw DomainError("frozen_density: need t > s");
    return moments(t, s).density(x, y);
}

Vec FrozenProxy::frozen_density_grad_x1(double s, const PhasePoint& x, double t, const PhasePoint& y) const {
    if (!(t > s)) throw DomainError("frozen_density: need t > s");
    return moments(t, s).grad_x1(x, y);
}

double FrozenProxy::generator_gap_apply(double v, const PhasePoint& w, double t, const PhasePoint& y) const {
    if (!(v < t)) throw DomainError("generator_gap_apply: need v < t");
    return generator_gap_apply(moments(t, v), w, y);
}

double FrozenProxy::generator_gap_apply(const FrozenMoments& mo, const PhasePoint& w, const PhasePoint& y) const {
    const int d = model_->d;
    const double v = mo.s;
    const PhasePoint th = theta(v);
    double out = 0.0;
    if (!model_->sigma_constant) {
        const Mat da = model_->diffusion(v, w) - model_->diffusion(v, th);
        const Mat H = mo.hess_x(w, y);
        out += 0.5 * (da.array() * H.topLeftCorner(d, d).array()).sum();
    }
    if (!model_->F.affine) {
        const Mat G = model_->F.gradF2(v, th);
        Vec diff = model_->F.eval(v, w) - model_->F.eval(v, th);
        diff.tail(d) -= G * (w.x1 - th.x1);
        out += diff.dot(mo.grad_x(w, y));
    }
    return out;
}

ScalingDefect scaling_defect(const FrozenProxy& proxy, double t, double s, const std::vector<PhasePoint>& sample) {
    const FrozenMoments mo = proxy.moments(t, s);
    const int d = proxy.xi().dim();
    const ScaleMatrix T(t - s);
    const Mat Khi = mo.K_hat.inverse();
    const Mat Rh = T.inverse_matrix(d) * mo.R * T.matrix(d);
    ScalingDefect out;
    out.condition = mo.hat_eigenvalues.maxCoeff() / mo.hat_eigenvalues.minCoeff();
    double qmin = INFINITY, qmax = 0.0, rmin = INFINITY, rmax = 0.0;
    for (const PhasePoint& x : sample) {
        const Vec u = T.apply_inverse(x).stacked();
        const double n2 = u.squaredNorm();
        if (n2 == 0.0) continue;
        const double q = u.dot(Khi * u) / n2;
        qmin = std::min(qmin, q);
        qmax = std::max(qmax, q);
        const double rr = (Rh * u).squaredNorm() / n2;
        rmin = std::min(rmin, rr);
        rmax = std::max(rmax, rr);
    }
    if (qmax > 0) {
        out.kappa_form = std::max({1.0, qmax, 1.0 / qmin});
        out.kappa_resolvent = std::max({1.0, std::sqrt(rmax), 1.0 / std::sqrt(rmin)});
        out.kappa = std::max(out.kappa_form, out.kappa_resolvent);
    }
    return out;
}

}  // namespace kpx
