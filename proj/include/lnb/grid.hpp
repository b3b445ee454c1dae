#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lnb/common.hpp"

namespace lnb {

enum class SphereGeometry { polar_sphere, circle_arc };
enum class EndCondition { blowup, regular_pole };

inline std::string to_string(SphereGeometry g) { return g == SphereGeometry::polar_sphere ? "polar-sphere" : "circle-arc"; }
inline std::string to_string(EndCondition c) { return c == EndCondition::blowup ? "blowup" : "regular-pole"; }

/// An interval of polar angle on S^{n−1} (axisymmetric domain) or an arc of
/// the unit circle (cross-section of a wedge times a line).
struct SphericalDomain1D {
    SphereGeometry geometry = SphereGeometry::polar_sphere;
    double lo = 0.0;
    double hi = pi / 2;
    EndCondition lo_end = EndCondition::regular_pole;
    EndCondition hi_end = EndCondition::blowup;
    std::string label;

    void validate() const {
        if (!(lo < hi)) throw DomainError("spherical domain: need lo < hi");
        if (geometry == SphereGeometry::polar_sphere) {
            if (lo < 0 || hi > pi) throw DomainError("polar-sphere interval must lie in [0, pi]");
            if (lo_end == EndCondition::regular_pole && lo != 0.0)
                throw DomainError("regular pole at lower end requires lo = 0");
            if (hi_end == EndCondition::regular_pole && hi != pi)
                throw DomainError("regular pole at upper end requires hi = pi");
        } else {
            if (hi - lo >= 2 * pi) throw DomainError("circle arc must be shorter than 2 pi");
            if (lo_end == EndCondition::regular_pole || hi_end == EndCondition::regular_pole)
                throw DomainError("circle arcs have no poles");
        }
        if (lo_end == EndCondition::regular_pole && hi_end == EndCondition::regular_pole)
            throw DomainError("domain without a blowup endpoint");
    }

    [[nodiscard]] double length() const { return hi - lo; }

    /// Measure density of the angular variable: sin^{n−2}θ or 1.
    [[nodiscard]] double weight(double theta, int n) const {
        return geometry == SphereGeometry::polar_sphere ? std::pow(std::sin(theta), n - 2) : 1.0;
    }

    static SphericalDomain1D cap(double theta0, std::string label = {}) {
        return {SphereGeometry::polar_sphere, 0.0, theta0, EndCondition::regular_pole, EndCondition::blowup,
                label.empty() ? "cap" : std::move(label)};
    }
    static SphericalDomain1D cap_complement(double r, std::string label = {}) {
        return {SphereGeometry::polar_sphere, r, pi, EndCondition::blowup, EndCondition::regular_pole,
                label.empty() ? "cap-complement" : std::move(label)};
    }
    static SphericalDomain1D band(double a, double b, std::string label = {}) {
        return {SphereGeometry::polar_sphere, a, b, EndCondition::blowup, EndCondition::blowup,
                label.empty() ? "band" : std::move(label)};
    }
    static SphericalDomain1D arc(double opening, std::string label = {}) {
        return {SphereGeometry::circle_arc, 0.0, opening, EndCondition::blowup, EndCondition::blowup,
                label.empty() ? "arc" : std::move(label)};
    }
};

struct GridSpec {
    int intervals = 800;
    double uniform_fraction = 0.3;
    double grading = 1.0;     // node density ∝ (d + floor)^{-grading} near clustered ends
    double floor = 1e-10;     // smallest resolved distance
};

/// Nodes on [lo, hi] clustered toward the flagged ends. Offsets from both
/// ends are stored separately so that spacings of nodes a few ulps away from
/// an end keep full relative precision.
struct GradedNodes {
    double lo = 0.0, hi = 1.0;
    std::vector<double> x, from_lo, from_hi;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    [[nodiscard]] double spacing(std::size_t j) const {
        if (from_lo[j + 1] <= from_hi[j]) return from_lo[j + 1] - from_lo[j];
        return from_hi[j] - from_hi[j + 1];
    }
};

inline GradedNodes graded_nodes(double lo, double hi, bool cluster_lo, bool cluster_hi, const GridSpec& spec) {
    if (!(lo < hi)) throw DomainError("graded_nodes: need lo < hi");
    if (spec.intervals < 4) throw DomainError("grid needs at least four intervals");
    if (spec.uniform_fraction <= 0 || spec.uniform_fraction > 1) throw DomainError("uniform fraction must lie in (0, 1]");
    if (spec.grading <= 0 || spec.floor <= 0) throw DomainError("grading and floor must be positive");
    if (!cluster_lo && !cluster_hi && spec.uniform_fraction != 1.0) {
        GridSpec uniform = spec;
        uniform.uniform_fraction = 1.0;
        return graded_nodes(lo, hi, false, false, uniform);
    }
    const double L = hi - lo;
    auto G = [&](double y) {
        const double f = spec.floor, g = spec.grading;
        if (std::abs(g - 1.0) < 1e-12) return std::log1p(y / f);
        return (std::pow(y + f, 1 - g) - std::pow(f, 1 - g)) / (1 - g);
    };
    const double u = spec.uniform_fraction;
    const int nb = int(cluster_lo) + int(cluster_hi);
    const double share = nb ? (1.0 - u) / nb : 0.0;
    // x and y = L − x are the offsets from lo and hi; F maps them into [0, 1]
    auto F = [&](double x, double y) {
        double v = u * x / L;
        if (cluster_lo) v += share * G(x) / G(L);
        if (cluster_hi) v += share * (1.0 - G(y) / G(L));
        return v;
    };
    const int N = spec.intervals;
    GradedNodes g;
    g.lo = lo;
    g.hi = hi;
    g.x.resize(N + 1);
    g.from_lo.resize(N + 1);
    g.from_hi.resize(N + 1);
    const double Fmid = F(0.5 * L, 0.5 * L);
    for (int j = 0; j <= N; ++j) {
        const double target = double(j) / N;
        double x, y;
        if (j == 0) {
            x = 0, y = L;
        } else if (j == N) {
            x = L, y = 0;
        } else if (target <= Fmid) {
            double a = 0, b = 0.5 * L;
            for (int it = 0; it < 200 && b - a > 1e-300; ++it) {
                const double m = 0.5 * (a + b);
                (F(m, L - m) < target ? a : b) = m;
            }
            x = 0.5 * (a + b);
            y = L - x;
        } else {
            double a = 0, b = 0.5 * L;
            for (int it = 0; it < 200 && b - a > 1e-300; ++it) {
                const double m = 0.5 * (a + b);
                (F(L - m, m) > target ? a : b) = m;
            }
            y = 0.5 * (a + b);
            x = L - y;
        }
        g.from_lo[j] = x;
        g.from_hi[j] = y;
        g.x[j] = x <= y ? lo + x : hi - y;
    }
    for (int j = 0; j < N; ++j)
        if (!(g.spacing(j) > 0)) throw DomainError("grid construction produced a non-increasing node sequence");
    return g;
}

/// Five-point Gauss–Legendre integral of w over [a, a + len].
template <typename W>
double integrate_weight(const W& w, double a, double len) {
    static constexpr std::array<double, 5> x{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                             0.9061798459386640};
    static constexpr std::array<double, 5> c{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                             0.4786286704993665, 0.2369268850561891};
    double s = 0;
    for (int i = 0; i < 5; ++i) s += c[i] * w(a + 0.5 * len * (1 + x[i]));
    return 0.5 * len * s;
}

/// Finite-volume data for the weighted operator w^{-1}(w f')':
/// face[j] = w(x_{j+½})/h_j couples j and j+1; volume[j] = ∫ w over the
/// control volume of node j (half cells at the ends).
struct FiniteVolume1D {
    std::vector<double> face, volume;
};

template <typename W>
FiniteVolume1D finite_volume(const GradedNodes& g, const W& w) {
    const std::size_t m = g.size();
    FiniteVolume1D fv;
    fv.face.assign(m - 1, 0.0);
    fv.volume.assign(m, 0.0);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double h = g.spacing(j);
        const double mid = g.x[j] + 0.5 * h;
        fv.face[j] = w(mid) / h;
        fv.volume[j] += integrate_weight(w, g.x[j], 0.5 * h);
        fv.volume[j + 1] += integrate_weight(w, mid, 0.5 * h);
    }
    return fv;
}

/// Node set on a 1-D spherical domain, clustered toward blowup endpoints,
/// with the finite-volume data of the measure sin^{n−2}θ dθ (or dθ on arcs).
class AngularGrid {
public:
    AngularGrid() = default;

    AngularGrid(const SphericalDomain1D& dom, const GridSpec& spec, int n) : dom_(dom), spec_(spec), n_(n) {
        require_dimension(n);
        dom.validate();
        nodes_ = graded_nodes(dom.lo, dom.hi, dom.lo_end == EndCondition::blowup, dom.hi_end == EndCondition::blowup,
                              spec);
        fv_ = finite_volume(nodes_, [&](double t) { return dom_.weight(t, n_); });
    }

    [[nodiscard]] const SphericalDomain1D& domain() const noexcept { return dom_; }
    [[nodiscard]] const GridSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const GradedNodes& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] double theta(std::size_t j) const { return nodes_.x[j]; }
    [[nodiscard]] const std::vector<double>& thetas() const noexcept { return nodes_.x; }
    [[nodiscard]] double from_lo(std::size_t j) const { return nodes_.from_lo[j]; }
    [[nodiscard]] double from_hi(std::size_t j) const { return nodes_.from_hi[j]; }
    [[nodiscard]] double spacing(std::size_t j) const { return nodes_.spacing(j); }

    [[nodiscard]] bool is_blowup_node(std::size_t j) const {
        return (j == 0 && dom_.lo_end == EndCondition::blowup) ||
               (j + 1 == size() && dom_.hi_end == EndCondition::blowup);
    }

    /// Arc distance to the nearest blowup endpoint.
    [[nodiscard]] double blowup_distance(std::size_t j) const {
        double d = std::numeric_limits<double>::infinity();
        if (dom_.lo_end == EndCondition::blowup) d = std::min(d, from_lo(j));
        if (dom_.hi_end == EndCondition::blowup) d = std::min(d, from_hi(j));
        return d;
    }
    [[nodiscard]] double blowup_distance_at(double th) const {
        double d = std::numeric_limits<double>::infinity();
        if (dom_.lo_end == EndCondition::blowup) d = std::min(d, th - dom_.lo);
        if (dom_.hi_end == EndCondition::blowup) d = std::min(d, dom_.hi - th);
        return d;
    }

    [[nodiscard]] double face(std::size_t j) const { return fv_.face[j]; }
    [[nodiscard]] double volume(std::size_t j) const { return fv_.volume[j]; }
    [[nodiscard]] const std::vector<double>& volumes() const noexcept { return fv_.volume; }
    [[nodiscard]] int dimension() const noexcept { return n_; }

private:
    SphericalDomain1D dom_;
    GridSpec spec_;
    int n_ = 3;
    GradedNodes nodes_;
    FiniteVolume1D fv_;
};

}  // namespace lnb
