#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpx {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument ranges (nonpositive time, bad λ, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Bad configuration or incompatible inputs.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Derivative or thermic order the code does not provide.
class UnsupportedOrder : public Error {
public:
    using Error::Error;
};

// Loss of definiteness, non-convergence, quadrature failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, std::vector<double> trace)
        : NumericalError(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

inline double sqr(double x) { return x * x; }

// max |a-b| / max |b| over the supplied values.
double sup_relative(const std::vector<double>& a, const std::vector<double>& b);

// Least-squares slope and intercept of y against x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

std::vector<double> linspace(double a, double b, int n);
std::vector<double> logspace(double a, double b, int n);

}  // namespace kpx
