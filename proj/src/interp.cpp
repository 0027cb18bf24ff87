#include "vfq/interp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "vfq/core.hpp"

namespace vfq {

namespace {

void check_knots(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_count) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("interpolant: knot and value counts differ");
    }
    if (x.size() < min_count) {
        throw GeometryError("interpolant: not enough knots");
    }
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) {
            throw GeometryError("interpolant: knots must be strictly increasing");
        }
    }
}

std::size_t find_segment(const std::vector<double>& x, double t) {
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const auto idx = static_cast<std::ptrdiff_t>(it - x.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(x.size()) - 2));
}

double hermite(double y0, double y1, double m0, double m1, double h, double s) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * m1;
}

double hermite_slope(double y0, double y1, double m0, double m1, double h, double s) {
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * m1) / h;
}

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    check_knots(x_, y_, 2);
    const std::size_t n = x_.size();
    std::vector<double> delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        delta[k] = (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);
    }
    m_.assign(n, 0.0);
    m_[0] = delta[0];
    m_[n - 1] = delta[n - 2];
    for (std::size_t k = 1; k + 1 < n; ++k) {
        m_[k] = delta[k - 1] * delta[k] <= 0.0 ? 0.0 : 0.5 * (delta[k - 1] + delta[k]);
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (delta[k] == 0.0) {
            m_[k] = 0.0;
            m_[k + 1] = 0.0;
            continue;
        }
        const double a = m_[k] / delta[k];
        const double b = m_[k + 1] / delta[k];
        const double r2 = a * a + b * b;
        if (r2 > 9.0) {
            const double tau = 3.0 / std::sqrt(r2);
            m_[k] = tau * a * delta[k];
            m_[k + 1] = tau * b * delta[k];
        }
    }
}

double MonotoneCubic::operator()(double t) const {
    t = std::clamp(t, x_.front(), x_.back());
    const std::size_t k = find_segment(x_, t);
    const double h = x_[k + 1] - x_[k];
    return hermite(y_[k], y_[k + 1], m_[k], m_[k + 1], h, (t - x_[k]) / h);
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    check_knots(x_, y_, 2);
    const std::size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = x_[k + 1] - x_[k];
        delta[k] = (y_[k + 1] - y_[k]) / h[k];
    }
    m_.assign(n, delta[0]);
    if (n == 2) {
        return;
    }
    m_[0] = delta[0] - h[0] * (delta[1] - delta[0]) / (h[0] + h[1]);
    m_[n - 1] = delta[n - 2] + h[n - 2] * (delta[n - 2] - delta[n - 3]) / (h[n - 3] + h[n - 2]);

    // Thomas algorithm on the interior slopes.
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), lower(m), rhs(m);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = r + 1;
        lower[r] = h[i];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        upper[r] = h[i - 1];
        rhs[r] = 3.0 * (h[i] * delta[i - 1] + h[i - 1] * delta[i]);
    }
    rhs[0] -= lower[0] * m_[0];
    rhs[m - 1] -= upper[m - 1] * m_[n - 1];
    for (std::size_t r = 1; r < m; ++r) {
        const double w = lower[r] / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    m_[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t r = m - 1; r-- > 0;) {
        m_[r + 1] = (rhs[r] - upper[r] * m_[r + 2]) / diag[r];
    }
}

std::size_t CubicSpline::segment(double t) const { return find_segment(x_, t); }

double CubicSpline::operator()(double t) const {
    if (t < x_.front()) {
        return y_.front() + m_.front() * (t - x_.front());
    }
    if (t > x_.back()) {
        return y_.back() + m_.back() * (t - x_.back());
    }
    const std::size_t k = segment(t);
    const double h = x_[k + 1] - x_[k];
    return hermite(y_[k], y_[k + 1], m_[k], m_[k + 1], h, (t - x_[k]) / h);
}

double CubicSpline::derivative(double t) const {
    if (t <= x_.front()) {
        return m_.front();
    }
    if (t >= x_.back()) {
        return m_.back();
    }
    const std::size_t k = segment(t);
    const double h = x_[k + 1] - x_[k];
    return hermite_slope(y_[k], y_[k + 1], m_[k], m_[k + 1], h, (t - x_[k]) / h);
}

double lerp_table(std::span<const double> x, std::span<const double> y, double t) {
    if (x.size() != y.size() || x.empty()) {
        throw std::invalid_argument("lerp_table: bad table");
    }
    if (x.size() == 1 || t <= x.front()) {
        return y.front();
    }
    if (t >= x.back()) {
        return y.back();
    }
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - x.begin()) - 1;
    const double f = (t - x[k]) / (x[k + 1] - x[k]);
    return y[k] + f * (y[k + 1] - y[k]);
}

std::vector<double> smooth_second_difference(std::span<const double> x, std::span<const double> y, double lambda) {
    const std::size_t n = x.size();
    if (y.size() != n) {
        throw std::invalid_argument("smoothing: size mismatch");
    }
    std::vector<double> out(y.begin(), y.end());
    if (lambda <= 0.0 || n < 3) {
        return out;
    }
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> d_entries;
    d_entries.reserve(3 * (n - 2));
    std::vector<double> weight(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        const double scale = 2.0 / (h0 + h1);
        const auto r = static_cast<int>(i - 1);
        d_entries.emplace_back(r, static_cast<int>(i - 1), scale / h0);
        d_entries.emplace_back(r, static_cast<int>(i), -scale * (1.0 / h0 + 1.0 / h1));
        d_entries.emplace_back(r, static_cast<int>(i + 1), scale / h1);
        const double hbar = 0.5 * (h0 + h1);
        weight[i - 1] = lambda * hbar * hbar;
    }
    Eigen::SparseMatrix<double> d(static_cast<int>(n - 2), static_cast<int>(n));
    d.setFromTriplets(d_entries.begin(), d_entries.end());
    Eigen::SparseMatrix<double> w(static_cast<int>(n - 2), static_cast<int>(n - 2));
    std::vector<Triplet> w_entries;
    for (std::size_t i = 0; i < n - 2; ++i) {
        w_entries.emplace_back(static_cast<int>(i), static_cast<int>(i), weight[i]);
    }
    w.setFromTriplets(w_entries.begin(), w_entries.end());
    Eigen::SparseMatrix<double> eye(static_cast<int>(n), static_cast<int>(n));
    eye.setIdentity();
    const Eigen::SparseMatrix<double> system = eye + Eigen::SparseMatrix<double>(d.transpose() * w * d);

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
    if (solver.info() != Eigen::Success) {
        throw GeometryError("smoothing system factorization failed");
    }
    const Eigen::Map<const Eigen::VectorXd> rhs(y.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd f = solver.solve(rhs);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = f[static_cast<Eigen::Index>(i)];
    }
    return out;
}

}  // namespace vfq
