#pragma once

#include <span>
#include <vector>

namespace vfq {

// 1D interpolants over strictly increasing knots.

/// Fritsch-Carlson monotone piecewise cubic Hermite interpolant.
class MonotoneCubic {
public:
    MonotoneCubic(std::vector<double> x, std::vector<double> y);
    double operator()(double t) const;

private:
    std::vector<double> x_, y_, m_;
};

/**
 * C2 cubic spline with end slopes clamped to three-point one-sided estimates.
 * Needs at least three knots; with exactly two it degrades to the line.
 */
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y);
    double operator()(double t) const;
    double derivative(double t) const;
    std::span<const double> knots() const { return x_; }

private:
    std::size_t segment(double t) const;
    std::vector<double> x_, y_, m_;  // m_: first derivative at each knot
};

/// Piecewise-linear interpolation; clamps outside the knot range.
double lerp_table(std::span<const double> x, std::span<const double> y, double t);

/**
 * Discrete cubic smoothing spline on (possibly non-uniform) knots:
 * minimizes sum (y_i - f_i)^2 + lambda * sum (h_i * f''_i)^2 where f''_i is the
 * second divided difference and h_i the local mean spacing. lambda carries mm^2.
 * Linear data is a fixed point for every lambda.
 */
std::vector<double> smooth_second_difference(std::span<const double> x, std::span<const double> y, double lambda);

}  // namespace vfq
