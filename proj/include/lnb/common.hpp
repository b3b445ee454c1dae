#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lnb {

// ---------------------------------------------------------------------------
// Errors
//
// Every failure mode that a caller may want to distinguish has its own type.
// The CLI maps each of them to a distinct exit status.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented precondition (bad dimension, point outside
/// a chart, empty window, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Iterative method failed; carries the iteration history for diagnostics.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> trace)
        : Error(what), trace_(std::move(trace)) {}
    [[nodiscard]] const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// A verified numerical property does not hold (bound violated, monotonicity
/// broken, structure inequality unbounded, ...).
class CheckFailure : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Exponents of the equation  Δu = ¼n(n−2)u^{(n+2)/(n−2)}.
// ---------------------------------------------------------------------------

struct Exponents {
    int n;

    /// (n−2)/2: u ~ d^{-k} at the boundary and u_V = r^{-k} g(θ).
    [[nodiscard]] constexpr double k() const noexcept { return 0.5 * (n - 2); }
    /// (n+2)/(n−2)
    [[nodiscard]] constexpr double p() const noexcept { return double(n + 2) / double(n - 2); }
    /// ¼n(n−2)
    [[nodiscard]] constexpr double c() const noexcept { return 0.25 * n * (n - 2); }
    /// n(n+2)/4, coefficient of ρ^{-2} in the linearised operator.
    [[nodiscard]] constexpr double potential() const noexcept { return 0.25 * n * (n + 2); }
};

inline void require_dimension(int n) {
    if (n < 3) throw DomainError("dimension must be at least 3, got " + std::to_string(n));
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline constexpr double pi = std::numbers::pi;

template <typename T>
constexpr T sqr(T v) {
    return v * v;
}

/// Least-squares line y = a + b x; returns {intercept, slope, r²}.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    double rms = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_line needs at least two points");
    const double m = double(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += sqr(x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += sqr(y[i] - my);
    }
    if (sxx <= 0) throw DomainError("fit_line: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sse += sqr(y[i] - f.intercept - f.slope * x[i]);
    f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    f.rms = std::sqrt(sse / m);
    return f;
}

}  // namespace lnb
