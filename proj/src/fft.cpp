#include "kpx/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace kpx {

namespace {
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct RealFft2D::Impl {
    double* r = nullptr;
    fftw_complex* c = nullptr;
    fftw_plan fwd = nullptr, bwd = nullptr;
};

RealFft2D::RealFft2D(int n1, int n2) : n1_(n1), n2_(n2), impl_(std::make_unique<Impl>()) {
    if (n1 < 2 || n2 < 2) throw std::invalid_argument("RealFft2D: grid too small");
    std::lock_guard<std::mutex> lk(plan_mutex());
    impl_->r = fftw_alloc_real(static_cast<size_t>(n1) * n2);
    impl_->c = fftw_alloc_complex(static_cast<size_t>(n1) * (n2 / 2 + 1));
    impl_->fwd = fftw_plan_dft_r2c_2d(n1, n2, impl_->r, impl_->c, FFTW_ESTIMATE);
    impl_->bwd = fftw_plan_dft_c2r_2d(n1, n2, impl_->c, impl_->r, FFTW_ESTIMATE);
}

RealFft2D::~RealFft2D() {
    std::lock_guard<std::mutex> lk(plan_mutex());
    fftw_destroy_plan(impl_->fwd);
    fftw_destroy_plan(impl_->bwd);
    fftw_free(impl_->r);
    fftw_free(impl_->c);
}

void RealFft2D::forward(const std::vector<double>& in, std::vector<cplx>& out) {
    const size_t n = static_cast<size_t>(n1_) * n2_, nc = static_cast<size_t>(n1_) * n2c();
    std::copy(in.begin(), in.begin() + n, impl_->r);
    fftw_execute(impl_->fwd);
    out.resize(nc);
    const cplx* c = reinterpret_cast<const cplx*>(impl_->c);
    std::copy(c, c + nc, out.begin());
}

void RealFft2D::backward(const std::vector<cplx>& in, std::vector<double>& out) {
    const size_t n = static_cast<size_t>(n1_) * n2_, nc = static_cast<size_t>(n1_) * n2c();
    std::copy(in.begin(), in.begin() + nc, reinterpret_cast<cplx*>(impl_->c));
    fftw_execute(impl_->bwd);  // c2r destroys its input; we own the buffer
    out.resize(n);
    const double s = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) out[i] = impl_->r[i] * s;
}

struct AxisFft::Impl {
    fftw_complex* buf = nullptr;
    fftw_plan plan = nullptr;
};

AxisFft::AxisFft(int n_rows, int n_cols, int axis, int sign)
    : impl_(std::make_unique<Impl>()), n_rows_(n_rows), n_cols_(n_cols) {
    std::lock_guard<std::mutex> lk(plan_mutex());
    impl_->buf = fftw_alloc_complex(static_cast<size_t>(n_rows) * n_cols);
    const int fs = sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD;
    if (axis == 1) {
        int n[] = {n_cols};
        impl_->plan = fftw_plan_many_dft(1, n, n_rows, impl_->buf, nullptr, 1, n_cols, impl_->buf, nullptr, 1, n_cols,
                                         fs, FFTW_ESTIMATE | FFTW_UNALIGNED);
    } else {
        int n[] = {n_rows};
        impl_->plan = fftw_plan_many_dft(1, n, n_cols, impl_->buf, nullptr, n_cols, 1, impl_->buf, nullptr, n_cols, 1,
                                         fs, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
}

AxisFft::~AxisFft() {
    std::lock_guard<std::mutex> lk(plan_mutex());
    fftw_destroy_plan(impl_->plan);
    fftw_free(impl_->buf);
}

void AxisFft::execute(std::vector<cplx>& data) {
    fftw_execute_dft(impl_->plan, reinterpret_cast<fftw_complex*>(data.data()),
                     reinterpret_cast<fftw_complex*>(data.data()));
}

}  // namespace kpx
