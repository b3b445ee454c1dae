#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lnb/common.hpp"

namespace lnb {

/// Tridiagonal matrix stored by diagonals. lower[i] couples row i to i−1
/// (lower[0] unused), upper[i] couples row i to i+1 (upper[m−1] unused).
struct Tridiagonal {
    std::vector<double> lower, diag, upper;

    explicit Tridiagonal(std::size_t m = 0) : lower(m, 0.0), diag(m, 0.0), upper(m, 0.0) {}
    [[nodiscard]] std::size_t size() const noexcept { return diag.size(); }

    void multiply(std::span<const double> x, std::span<double> y) const {
        const std::size_t m = size();
        for (std::size_t i = 0; i < m; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += lower[i] * x[i - 1];
            if (i + 1 < m) s += upper[i] * x[i + 1];
            y[i] = s;
        }
    }
};

/// Thomas algorithm without pivoting. Intended for the diagonally dominant
/// Jacobians produced by the profile discretisation.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& a, std::span<const double> rhs) {
    const std::size_t m = a.size();
    if (rhs.size() != m) throw DomainError("solve_tridiagonal: size mismatch");
    std::vector<double> c(m), d(m), x(m);
    double beta = a.diag[0];
    if (beta == 0.0) throw Error("solve_tridiagonal: zero pivot");
    c[0] = m > 1 ? a.upper[0] / beta : 0.0;
    d[0] = rhs[0] / beta;
    for (std::size_t i = 1; i < m; ++i) {
        beta = a.diag[i] - a.lower[i] * c[i - 1];
        if (beta == 0.0) throw Error("solve_tridiagonal: zero pivot");
        c[i] = i + 1 < m ? a.upper[i] / beta : 0.0;
        d[i] = (rhs[i] - a.lower[i] * d[i - 1]) / beta;
    }
    x[m - 1] = d[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

/// LDLᵀ factorisation of a symmetric tridiagonal matrix (sub-diagonal in
/// `off`, with off[i] coupling i and i+1). The number of negative pivots is
/// the number of eigenvalues below zero (Sylvester's law of inertia).
struct SymmetricTridiagonalLDL {
    std::vector<double> d;  // pivots
    std::vector<double> l;  // unit lower bidiagonal multipliers
    std::size_t negative_pivots = 0;

    SymmetricTridiagonalLDL(std::span<const double> diag, std::span<const double> off) {
        const std::size_t m = diag.size();
        d.resize(m);
        l.assign(m, 0.0);
        d[0] = diag[0];
        for (std::size_t i = 1; i < m; ++i) {
            l[i] = off[i - 1] / d[i - 1];
            d[i] = diag[i] - l[i] * off[i - 1];
        }
        for (double v : d)
            if (v < 0) ++negative_pivots;
    }

    [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const {
        const std::size_t m = d.size();
        std::vector<double> y(rhs.begin(), rhs.end());
        for (std::size_t i = 1; i < m; ++i) y[i] -= l[i] * y[i - 1];
        for (std::size_t i = 0; i < m; ++i) y[i] /= d[i];
        for (std::size_t i = m - 1; i-- > 0;) y[i] -= l[i + 1] * y[i + 1];
        return y;
    }
};

/// Natural cubic spline through (x_i, y_i) with strictly increasing x.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t m = x_.size();
        if (m < 3 || y_.size() != m) throw DomainError("CubicSpline needs at least three nodes");
        m2_.assign(m, 0.0);
        Tridiagonal a(m - 2);
        std::vector<double> rhs(m - 2);
        for (std::size_t i = 1; i + 1 < m; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            if (h0 <= 0 || h1 <= 0) throw DomainError("CubicSpline: abscissae must increase");
            const std::size_t r = i - 1;
            a.lower[r] = h0 / 6.0;
            a.diag[r] = (h0 + h1) / 3.0;
            a.upper[r] = h1 / 6.0;
            rhs[r] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
        }
        const auto sol = solve_tridiagonal(a, rhs);
        for (std::size_t i = 1; i + 1 < m; ++i) m2_[i] = sol[i - 1];
    }

    [[nodiscard]] double operator()(double t) const {
        const std::size_t i = interval(t);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m2_[i] + (b * b * b - b) * m2_[i + 1]) * h * h / 6.0;
    }

    [[nodiscard]] std::size_t interval(double t) const {
        if (t <= x_.front()) return 0;
        if (t >= x_.back()) return x_.size() - 2;
        std::size_t lo = 0, hi = x_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= t ? lo : hi) = mid;
        }
        return lo;
    }

    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return x_; }

private:
    std::vector<double> x_, y_, m2_;
};

}  // namespace lnb
