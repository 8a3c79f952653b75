#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace kpx {

using cplx = std::complex<double>;

// Real 2D transform on an n1 x n2 row-major grid; spectrum is n1 x (n2/2+1).
// Unnormalized forward, backward divides by n1 n2.
class RealFft2D {
public:
    RealFft2D(int n1, int n2);
    ~RealFft2D();
    RealFft2D(const RealFft2D&) = delete;
    RealFft2D& operator=(const RealFft2D&) = delete;

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int n2c() const { return n2_ / 2 + 1; }
    void forward(const std::vector<double>& in, std::vector<cplx>& out);
    void backward(const std::vector<cplx>& in, std::vector<double>& out);

private:
    struct Impl;
    int n1_, n2_;
    std::unique_ptr<Impl> impl_;
};

// In-place complex transforms along one axis of a row-major n_rows x n_cols array.
// axis 0 transforms columns (length n_rows), axis 1 transforms rows (length n_cols).
// sign = -1 forward, +1 backward (unnormalized both ways).
class AxisFft {
public:
    AxisFft(int n_rows, int n_cols, int axis, int sign);
    ~AxisFft();
    AxisFft(const AxisFft&) = delete;
    AxisFft& operator=(const AxisFft&) = delete;
    void execute(std::vector<cplx>& data);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int n_rows_, n_cols_;
};

// Angular frequency of FFT index i on a period of length L with n samples.
inline double fft_freq(int i, int n, double L) {
    const int m = i <= n / 2 ? i : i - n;
    return 2.0 * 3.14159265358979323846 * m / L;
}

}  // namespace kpx
