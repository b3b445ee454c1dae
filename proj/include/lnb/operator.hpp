#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lnb/common.hpp"
#include "lnb/geometry.hpp"

namespace lnb {

/// Entry h_ij of a metric perturbation: Σ coef · Π x_l^{powers_l}.
struct MetricEntry {
    int i = 0, j = 0;
    std::vector<Monomial> terms;  // powers over all n coordinates
};

/// Riemannian metric g_ij = δ_ij + h_ij(x) on a coordinate ball, with
/// h = O(|x|²) at the origin.
class MetricFamily {
public:
    static MetricFamily euclidean(int n) { return MetricFamily(n, "euclidean", [n](const Vec&) { return Mat::Identity(n, n); }); }

    /// (1 + q|x|²)^{4/(n−2)} δ.
    static MetricFamily conformal_quadratic(int n, double q) {
        const double e = 4.0 / (n - 2);
        MetricFamily m(n, fmt::format("conformal-quadratic(q={:g})", q), [n, q, e](const Vec& x) {
            return Mat(std::pow(1.0 + q * x.squaredNorm(), e) * Mat::Identity(n, n));
        });
        m.q_ = q;
        return m;
    }

    static MetricFamily polynomial(int n, std::vector<MetricEntry> entries, std::string label = "polynomial") {
        for (const auto& e : entries) {
            if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n) throw DomainError("metric entry index out of range");
            for (const auto& t : e.terms) {
                if (int(t.powers.size()) != n) throw DomainError("metric monomial has the wrong number of variables");
                int deg = 0;
                for (int p : t.powers) deg += p;
                if (deg < 2 && t.coef != 0.0)
                    throw DomainError("metric perturbation must vanish to second order at the origin");
            }
        }
        return MetricFamily(n, std::move(label), [n, entries](const Vec& x) {
            Mat g = Mat::Identity(n, n);
            for (const auto& e : entries) {
                double v = 0;
                for (const auto& t : e.terms) {
                    double m = t.coef;
                    for (int l = 0; l < n; ++l) m *= std::pow(x[l], t.powers[l]);
                    v += m;
                }
                g(e.i, e.j) += v;
                if (e.i != e.j) g(e.j, e.i) += v;
            }
            return g;
        });
    }

    [[nodiscard]] int dimension() const noexcept { return n_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }
    [[nodiscard]] Mat operator()(const Vec& x) const { return g_(x); }
    [[nodiscard]] std::optional<double> conformal_parameter() const { return q_; }

    /// Checks h(0) = 0, ∇h(0) = 0 and positive definiteness on samples of B_radius.
    void validate(double radius = 2.0) const {
        const Vec z = Vec::Zero(n_);
        if ((g_(z) - Mat::Identity(n_, n_)).cwiseAbs().maxCoeff() > 1e-12)
            throw DomainError(label_ + ": metric is not the identity at the origin");
        const double h = 1e-4;
        for (int l = 0; l < n_; ++l) {
            Vec e = Vec::Zero(n_);
            e[l] = h;
            const Mat d = (g_(e) - g_(-e)) / (2 * h);
            if (d.cwiseAbs().maxCoeff() > 1e-6) throw DomainError(label_ + ": metric has a first-order term at the origin");
        }
        for (int s = 1; s <= 200; ++s) {
            const Vec x = halton_point(s, n_) * radius;
            if (x.norm() > radius) continue;
            Eigen::SelfAdjointEigenSolver<Mat> es(g_(x), Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() <= 0) throw DomainError(label_ + ": metric is not positive definite");
        }
    }

    /// Point of the Halton sequence mapped to the cube [−1, 1]^n.
    static Vec halton_point(int index, int n, int offset = 0) {
        static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
        Vec x(n);
        for (int c = 0; c < n; ++c) {
            int i = index;
            const int b = primes[(c + offset) % 16];
            double f = 1, r = 0;
            while (i > 0) {
                f /= b;
                r += f * (i % b);
                i /= b;
            }
            x[c] = 2 * r - 1;
        }
        return x;
    }

private:
    MetricFamily(int n, std::string label, std::function<Mat(const Vec&)> g)
        : n_(n), label_(std::move(label)), g_(std::move(g)) {
        require_dimension(n);
    }

    int n_ = 3;
    std::string label_;
    std::function<Mat(const Vec&)> g_;
    std::optional<double> q_;
};

/// L = Σ a_ij ∂_ij + Σ b_i ∂_i + c.
struct OperatorSpec {
    int n = 3;
    std::string label = "laplacian";
    std::function<Mat(const Vec&)> a;
    std::function<Vec(const Vec&)> b;
    std::function<double(const Vec&)> c;
    double structure_constant = 0.0;
    double validity_radius = 1.0;
    bool is_laplacian = false;

    static OperatorSpec laplacian(int n) {
        OperatorSpec s;
        s.n = n;
        s.a = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
        s.b = [n](const Vec&) { return Vec(Vec::Zero(n)); };
        s.c = [](const Vec&) { return 0.0; };
        s.is_laplacian = true;
        s.validity_radius = 2.0;
        return s;
    }
};

// ---------------------------------------------------------------------------
// Curvature by finite differences.
// ---------------------------------------------------------------------------

namespace detail {

/// Fourth-order central difference of a matrix-valued map along e_l.
template <typename F>
Mat fd4(const F& f, const Vec& x, int l, double h) {
    Vec e = Vec::Zero(x.size());
    e[l] = h;
    return Mat((f(x - 2 * e) - 8 * f(x - e) + 8 * f(x + e) - f(x + 2 * e)) / (12 * h));
}

/// Christoffel symbols Γ^k_ij, stored as gamma[k](i, j).
inline std::vector<Mat> christoffel(const MetricFamily& g, const Vec& x, double h) {
    const int n = g.dimension();
    std::vector<Mat> dg(n);
    for (int l = 0; l < n; ++l) dg[l] = fd4([&](const Vec& y) { return Mat(g(y)); }, x, l, h);
    const Mat ginv = g(x).inverse();
    std::vector<Mat> gamma(n, Mat::Zero(n, n));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double s = 0;
                for (int l = 0; l < n; ++l) s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
                gamma[k](i, j) = gamma[k](j, i) = 0.5 * s;
            }
    return gamma;
}

inline double scalar_curvature(const MetricFamily& g, const Vec& x, double h) {
    const int n = g.dimension();
    const auto G = christoffel(g, x, h);
    // ∂_l Γ^k_ij
    std::vector<std::vector<Mat>> dG(n);
    for (int l = 0; l < n; ++l) {
        Vec e = Vec::Zero(n);
        e[l] = h;
        const auto m2 = christoffel(g, x - 2 * e, h), m1 = christoffel(g, x - e, h);
        const auto p1 = christoffel(g, x + e, h), p2 = christoffel(g, x + 2 * e, h);
        dG[l].resize(n);
        for (int k = 0; k < n; ++k) dG[l][k] = (m2[k] - 8 * m1[k] + 8 * p1[k] - p2[k]) / (12 * h);
    }
    const Mat ginv = g(x).inverse();
    double S = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double Rij = 0;
            for (int k = 0; k < n; ++k) {
                Rij += dG[k][k](i, j) - dG[j][k](i, k);
                for (int l = 0; l < n; ++l) Rij += G[k](k, l) * G[l](i, j) - G[k](j, l) * G[l](i, k);
            }
            S += ginv(i, j) * Rij;
        }
    return S;
}

}  // namespace detail

inline constexpr double curvature_step = 1e-3;

/// S_g at x with the Richardson check between steps h and h/2.
inline double scalar_curvature(const MetricFamily& g, const Vec& x, bool verify = true) {
    const double S1 = detail::scalar_curvature(g, x, curvature_step);
    if (verify) {
        const double S2 = detail::scalar_curvature(g, x, 0.5 * curvature_step);
        if (std::abs(S1 - S2) > 1e-4 * std::max(std::abs(S2), 1.0))
            throw ConvergenceError(fmt::format("scalar curvature FD disagreement {:.3e} at |x| = {:.3e}",
                                               std::abs(S1 - S2), x.norm()),
                                   {S1, S2});
    }
    return S1;
}

/// −L_g u = Δ_g u − (n−2)/(4(n−1)) S_g u, expanded as a = g^{ij},
/// b^j = |g|^{-1/2} ∂_i(|g|^{1/2} g^{ij}), c = −(n−2)/(4(n−1)) S_g.
inline OperatorSpec conformal_operator(const MetricFamily& metric, double validity_radius = 1.0) {
    metric.validate(validity_radius);
    const int n = metric.dimension();
    for (int s = 1; s <= 24; ++s) {
        const Vec x = 0.9 * validity_radius * MetricFamily::halton_point(s, n, 3) / std::sqrt(double(n));
        scalar_curvature(metric, x, true);
    }
    OperatorSpec op;
    op.n = n;
    op.label = "conformal:" + metric.label();
    op.validity_radius = validity_radius;
    op.a = [metric](const Vec& x) { return Mat(metric(x).inverse()); };
    op.b = [metric, n](const Vec& x) {
        auto dens = [&](const Vec& y) {
            const Mat g = metric(y);
            return Mat(std::sqrt(g.determinant()) * g.inverse());
        };
        Vec b = Vec::Zero(n);
        for (int i = 0; i < n; ++i) {
            const Mat d = detail::fd4(dens, x, i, curvature_step);
            b += d.row(i).transpose();
        }
        return Vec(b / std::sqrt(metric(x).determinant()));
    };
    const double factor = -(n - 2.0) / (4.0 * (n - 1.0));
    op.c = [metric, factor](const Vec& x) { return factor * scalar_curvature(metric, x, false); };
    return op;
}

/// Operator that saturates the structure inequality with constant C at every
/// point while pushing every coefficient in the direction that works against
/// radially increasing supersolutions.
inline OperatorSpec saturating_operator(int n, double C) {
    OperatorSpec op;
    op.n = n;
    op.label = fmt::format("saturating(C={:g})", C);
    op.a = [n, C](const Vec& x) { return Mat((1.0 + C * x.squaredNorm() / (3.0 * n)) * Mat::Identity(n, n)); };
    op.b = [C](const Vec& x) {
        const double l1 = x.cwiseAbs().sum();
        if (l1 == 0) return Vec(Vec::Zero(x.size()));
        return Vec((C / 3.0) * x.norm() / l1 * x);
    };
    op.c = [C](const Vec&) { return C / 3.0; };
    op.structure_constant = C;
    op.validity_radius = 2.0;
    return op;
}

/// a = δ, b = (|x|, 0, …, 0), c = 0.
inline OperatorSpec drift_operator(int n) {
    OperatorSpec op = OperatorSpec::laplacian(n);
    op.label = "drift";
    op.is_laplacian = false;
    op.b = [n](const Vec& x) {
        Vec b = Vec::Zero(n);
        b[0] = x.norm();
        return b;
    };
    return op;
}

inline double structure_ratio(const OperatorSpec& op, const Vec& x) {
    const double r2 = x.squaredNorm();
    const Mat a = op.a(x) - Mat::Identity(op.n, op.n);
    return (a.cwiseAbs().sum() + std::sqrt(r2) * op.b(x).cwiseAbs().sum() + r2 * std::abs(op.c(x))) / r2;
}

/// sup of the structure ratio over a quasi-random sample of B_radius with
/// |x| ≥ 10⁻⁴. A sup over a shell near the origin that dwarfs the global one
/// signals an unbounded ratio.
inline double structure_constant(const OperatorSpec& op, double radius, int samples = 10000, int seed = 0) {
    if (radius > op.validity_radius + 1e-12) throw DomainError("structure_constant: radius exceeds the validity ball");
    double sup = 0, inner = 0;
    int used = 0;
    for (int s = 1; used < samples; ++s) {
        Vec x = MetricFamily::halton_point(s + 7919 * seed, op.n, seed);
        if (x.norm() > 1.0 || x.norm() == 0) continue;
        ++used;
        Vec y = radius * x;
        if (y.norm() >= 1e-4) sup = std::max(sup, structure_ratio(op, y));
        Vec z = x / x.norm() * (1e-4 * std::pow(10.0, x.norm()));
        inner = std::max(inner, structure_ratio(op, z));
    }
    if (!std::isfinite(sup) || inner > 10 * sup + 1.0)
        throw CheckFailure(fmt::format("{}: structure ratio grows near the origin ({:.3e} vs {:.3e})", op.label, inner, sup));
    return sup;
}

/// Central-difference evaluation of L f at x with step h.
inline double apply_at(const OperatorSpec& op, const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    const int n = op.n;
    const Mat a = op.a(x);
    const Vec b = op.b(x);
    const double f0 = f(x);
    double s = op.c(x) * f0;
    for (int i = 0; i < n; ++i) {
        Vec e = Vec::Zero(n);
        e[i] = h;
        s += a(i, i) * (f(x + e) - 2 * f0 + f(x - e)) / (h * h);
        s += b[i] * (f(x + e) - f(x - e)) / (2 * h);
        for (int j = i + 1; j < n; ++j) {
            if (a(i, j) == 0.0) continue;
            Vec d = Vec::Zero(n);
            d[j] = h;
            s += 2 * a(i, j) * (f(x + e + d) - f(x + e - d) - f(x - e + d) + f(x - e - d)) / (4 * h * h);
        }
    }
    return s;
}

/// Uniform tensor-product mesh in R^n.
struct CartesianMesh {
    Vec origin;
    double spacing = 0.1;
    std::vector<int> counts;

    [[nodiscard]] std::size_t size() const {
        std::size_t s = 1;
        for (int c : counts) s *= std::size_t(c);
        return s;
    }
    [[nodiscard]] std::vector<int> index(std::size_t flat) const {
        std::vector<int> id(counts.size());
        for (std::size_t d = 0; d < counts.size(); ++d) {
            id[d] = int(flat % counts[d]);
            flat /= counts[d];
        }
        return id;
    }
    [[nodiscard]] std::size_t flat(const std::vector<int>& id) const {
        std::size_t f = 0, stride = 1;
        for (std::size_t d = 0; d < counts.size(); ++d) {
            f += stride * std::size_t(id[d]);
            stride *= counts[d];
        }
        return f;
    }
    [[nodiscard]] Vec point(const std::vector<int>& id) const {
        Vec x = origin;
        for (std::size_t d = 0; d < counts.size(); ++d) x[d] += spacing * id[d];
        return x;
    }
};

/// L applied at every interior node of the mesh (boundary nodes get NaN).
inline std::vector<double> apply(const OperatorSpec& op, std::span<const double> field, const CartesianMesh& mesh) {
    if (field.size() != mesh.size() || int(mesh.counts.size()) != op.n)
        throw DomainError("apply: mesh/field shape mismatch");
    const int n = op.n;
    const double h = mesh.spacing;
    std::vector<double> out(field.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t f = 0; f < field.size(); ++f) {
        auto id = mesh.index(f);
        bool interior = true;
        for (int d = 0; d < n; ++d) interior = interior && id[d] > 0 && id[d] + 1 < mesh.counts[d];
        if (!interior) continue;
        const Vec x = mesh.point(id);
        const Mat a = op.a(x);
        const Vec b = op.b(x);
        auto at = [&](int i, int si, int j, int sj) {
            auto k = id;
            k[i] += si;
            k[j] += sj;
            return field[mesh.flat(k)];
        };
        double s = op.c(x) * field[f];
        for (int i = 0; i < n; ++i) {
            s += a(i, i) * (at(i, 1, i, 0) - 2 * field[f] + at(i, -1, i, 0)) / (h * h);
            s += b[i] * (at(i, 1, i, 0) - at(i, -1, i, 0)) / (2 * h);
            for (int j = i + 1; j < n; ++j)
                if (a(i, j) != 0.0)
                    s += 2 * a(i, j) * (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) / (4 * h * h);
        }
        out[f] = s;
    }
    return out;
}

/// Coefficients of an axisymmetric operator acting on U(ρ, z), ρ = |x'|,
/// evaluated at the meridian point ρ e_1 + z e_n:
///   L U = Aρρ Uρρ + Aρz Uρz + Azz Uzz + Aperp Uρ/ρ + Bρ Uρ + Bz Uz + C U.
struct MeridianCoefficients {
    double arr = 1, arz = 0, azz = 1, aperp = 0, br = 0, bz = 0, c = 0;
};

inline MeridianCoefficients meridian_coefficients(const OperatorSpec& op, double rho, double z) {
    const int n = op.n;
    Vec x = Vec::Zero(n);
    x[0] = rho;
    x[n - 1] = z;
    const Mat a = op.a(x);
    const Vec b = op.b(x);
    MeridianCoefficients m;
    m.arr = a(0, 0);
    m.arz = 2 * a(0, n - 1);
    m.azz = a(n - 1, n - 1);
    m.aperp = a.trace() - a(0, 0) - a(n - 1, n - 1);
    m.br = b[0];
    m.bz = b[n - 1];
    m.c = op.c(x);
    return m;
}

/// Samples the operator at rotated copies of meridian points and reports the
/// largest deviation from rotation covariance about the e_n axis.
inline double axisymmetry_defect(const OperatorSpec& op, int samples = 16) {
    const int n = op.n;
    double worst = 0;
    for (int s = 1; s <= samples; ++s) {
        const Vec h = MetricFamily::halton_point(s, 3, 5);
        const double rho = 0.4 * (h[0] + 1) + 0.05, z = 0.4 * h[1], ang = pi * h[2];
        Vec x = Vec::Zero(n), y = Vec::Zero(n);
        x[0] = rho;
        x[n - 1] = z;
        Mat R = Mat::Identity(n, n);
        R(0, 0) = std::cos(ang);
        R(1, 0) = std::sin(ang);
        R(0, 1) = -std::sin(ang);
        R(1, 1) = std::cos(ang);
        y = R * x;
        worst = std::max(worst, (op.a(y) - R * op.a(x) * R.transpose()).cwiseAbs().maxCoeff());
        worst = std::max(worst, (op.b(y) - R * op.b(x)).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(op.c(y) - op.c(x)));
    }
    return worst;
}

inline void write_operator_csv(const OperatorSpec& op, const std::vector<Vec>& points, std::ostream& os) {
    const int n = op.n;
    for (int i = 0; i < n; ++i) os << "x" << i + 1 << ",";
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) os << "a" << i + 1 << j + 1 << ",";
    for (int i = 0; i < n; ++i) os << "b" << i + 1 << ",";
    os << "c\n";
    for (const auto& x : points) {
        const Mat a = op.a(x);
        const Vec b = op.b(x);
        for (int i = 0; i < n; ++i) os << fmt::format("{:.17g},", x[i]);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) os << fmt::format("{:.17g},", a(i, j));
        for (int i = 0; i < n; ++i) os << fmt::format("{:.17g},", b[i]);
        os << fmt::format("{:.17g}\n", op.c(x));
    }
}

}  // namespace lnb
