#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lnb/common.hpp"

namespace lnb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Monomial c · Π y_i^{e_i} in the n−1 graph variables.
struct Monomial {
    double coef = 0.0;
    std::vector<int> powers;
};

/// C² hypersurface written as a graph y_n = f(y') in a rotated frame y = Qx.
/// Points with y_n > f(y') have positive signed distance.
class GraphSurface {
public:
    enum class Form { polynomial, sphere };

    static GraphSurface plane(int n, Mat frame = {}) { return GraphSurface(n, Form::polynomial, {}, 0.0, std::move(frame)); }

    static GraphSurface polynomial(int n, std::vector<Monomial> terms, Mat frame = {}) {
        for (const auto& t : terms) {
            if (int(t.powers.size()) != n - 1) throw DomainError("monomial has the wrong number of variables");
            int deg = 0;
            for (int e : t.powers) {
                if (e < 0) throw DomainError("negative monomial power");
                deg += e;
            }
            if (deg == 0 && t.coef != 0.0) throw DomainError("graph must pass through the origin");
        }
        return GraphSurface(n, Form::polynomial, std::move(terms), 0.0, std::move(frame));
    }

    /// Sphere of radius R tangent to the plane y_n = 0 at 0, centred at R e_n:
    /// its lower cap f(y') = R − √(R² − |y'|²); the ball is the positive side.
    static GraphSurface sphere(int n, double radius, Mat frame = {}) {
        if (!(radius > 0)) throw DomainError("sphere radius must be positive");
        return GraphSurface(n, Form::sphere, {}, radius, std::move(frame));
    }

    /// x² paraboloid |y'|² (curvature 2 at the origin).
    static GraphSurface paraboloid(int n, double a = 1.0, Mat frame = {}) {
        std::vector<Monomial> t;
        for (int i = 0; i < n - 1; ++i) {
            Monomial m{a, std::vector<int>(n - 1, 0)};
            m.powers[i] = 2;
            t.push_back(m);
        }
        return polynomial(n, std::move(t), std::move(frame));
    }

    [[nodiscard]] int dimension() const noexcept { return n_; }
    [[nodiscard]] const Mat& frame() const noexcept { return Q_; }
    [[nodiscard]] Form form() const noexcept { return form_; }
    [[nodiscard]] double radius() const noexcept { return R_; }

    /// Radius of the chart ball in the graph variables.
    [[nodiscard]] double chart_radius() const { return form_ == Form::sphere ? 0.9 * R_ : 1.0; }

    [[nodiscard]] double f(const Vec& y) const {
        if (form_ == Form::sphere) {
            const double s = y.squaredNorm();
            if (s >= R_ * R_) throw DomainError("sphere graph evaluated outside its chart");
            return s / (R_ + std::sqrt(R_ * R_ - s));
        }
        double v = 0;
        for (const auto& t : terms_) {
            double m = t.coef;
            for (int i = 0; i < n_ - 1; ++i) m *= std::pow(y[i], t.powers[i]);
            v += m;
        }
        return v;
    }

    [[nodiscard]] Vec grad(const Vec& y) const {
        Vec g = Vec::Zero(n_ - 1);
        if (form_ == Form::sphere) {
            const double w = std::sqrt(R_ * R_ - y.squaredNorm());
            return y / w;
        }
        for (const auto& t : terms_)
            for (int i = 0; i < n_ - 1; ++i) {
                if (t.powers[i] == 0) continue;
                double m = t.coef * t.powers[i];
                for (int j = 0; j < n_ - 1; ++j) m *= std::pow(y[j], t.powers[j] - (i == j ? 1 : 0));
                g[i] += m;
            }
        return g;
    }

    [[nodiscard]] Mat hess(const Vec& y) const {
        Mat H = Mat::Zero(n_ - 1, n_ - 1);
        if (form_ == Form::sphere) {
            const double w2 = R_ * R_ - y.squaredNorm(), w = std::sqrt(w2);
            return Mat::Identity(n_ - 1, n_ - 1) / w + y * y.transpose() / (w2 * w);
        }
        for (const auto& t : terms_)
            for (int i = 0; i < n_ - 1; ++i)
                for (int j = 0; j < n_ - 1; ++j) {
                    std::vector<int> e = t.powers;
                    if (e[i] == 0) continue;
                    double m = t.coef * e[i];
                    --e[i];
                    if (e[j] == 0) continue;
                    m *= e[j];
                    --e[j];
                    for (int l = 0; l < n_ - 1; ++l) m *= std::pow(y[l], e[l]);
                    H(i, j) += m;
                }
        return H;
    }

    /// Unit normal at 0 on the positive side, in ambient coordinates.
    [[nodiscard]] Vec normal_at_origin() const {
        Vec local(n_);
        local.head(n_ - 1) = -grad(Vec::Zero(n_ - 1));
        local[n_ - 1] = 1.0;
        return Q_.transpose() * local.normalized();
    }

    /// Sup of the Hessian operator norm over a sample of the ball of the
    /// given radius in graph variables.
    [[nodiscard]] double c2_seminorm(double radius = 0.25) const {
        radius = std::min(radius, 0.95 * chart_radius());
        auto opnorm = [](const Mat& H) {
            return Eigen::SelfAdjointEigenSolver<Mat>(H, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
        };
        double worst = opnorm(hess(Vec::Zero(n_ - 1)));
        const int rays = 64, rings = 8;
        for (int a = 0; a < rays; ++a)
            for (int b = 1; b <= rings; ++b) {
                Vec y = Vec::Zero(n_ - 1);
                const double t = 2 * pi * a / rays, s = radius * b / rings;
                y[0] = s * std::cos(t);
                if (n_ - 1 > 1) y[1] = s * std::sin(t);
                if (n_ - 1 > 2) y[n_ - 2] = 0.5 * s * std::sin(3 * t);
                worst = std::max(worst, opnorm(hess(y)));
            }
        return worst;
    }

    /// Ambient point on the surface above graph parameter y'.
    [[nodiscard]] Vec lift(const Vec& yp) const {
        Vec y(n_);
        y.head(n_ - 1) = yp;
        y[n_ - 1] = f(yp);
        return Q_.transpose() * y;
    }

private:
    GraphSurface(int n, Form form, std::vector<Monomial> terms, double R, Mat frame)
        : n_(n), form_(form), terms_(std::move(terms)), R_(R) {
        require_dimension(n);
        Q_ = frame.size() == 0 ? Mat::Identity(n, n) : std::move(frame);
        if (Q_.rows() != n || Q_.cols() != n) throw DomainError("surface frame has the wrong size");
        if ((Q_ * Q_.transpose() - Mat::Identity(n, n)).norm() > 1e-10)
            throw DomainError("surface frame must be orthogonal");
    }

    int n_ = 3;
    Form form_ = Form::polynomial;
    std::vector<Monomial> terms_;
    double R_ = 0.0;
    Mat Q_;
};

// ---------------------------------------------------------------------------
// Signed distance by damped Newton projection onto the graph.
// ---------------------------------------------------------------------------

struct ProjectionResult {
    double distance = 0.0;
    Vec foot;
};

namespace detail {

inline bool project_from(const GraphSurface& s, const Vec& y, Vec yp, double& best, Vec& best_foot) {
    const int m = s.dimension() - 1;
    const Vec target = y.head(m);
    const double yn = y[s.dimension() - 1];
    auto objective = [&](const Vec& p) { return 0.5 * ((p - target).squaredNorm() + sqr(s.f(p) - yn)); };
    const double rc = s.chart_radius();
    if (yp.norm() >= rc) yp *= 0.5 * rc / yp.norm();
    double obj = objective(yp);
    for (int it = 0; it < 100; ++it) {
        const double fv = s.f(yp);
        const Vec gf = s.grad(yp);
        const Vec grad = (yp - target) + (fv - yn) * gf;
        if (grad.norm() <= 1e-15 * (1.0 + y.norm())) break;
        Mat H = Mat::Identity(m, m) + gf * gf.transpose() + (fv - yn) * s.hess(yp);
        Eigen::LLT<Mat> llt(H);
        double shift = 0;
        while (llt.info() != Eigen::Success) {
            shift = shift == 0 ? 1e-6 : 10 * shift;
            llt.compute(H + shift * Mat::Identity(m, m));
            if (shift > 1e6) return false;
        }
        const Vec step = llt.solve(grad);
        double lam = 1.0;
        bool moved = false;
        for (int h = 0; h < 50; ++h, lam *= 0.5) {
            Vec trial = yp - lam * step;
            if (trial.norm() >= rc) continue;
            const double o = objective(trial);
            if (o <= obj) {
                const double change = (trial - yp).norm();
                yp = trial;
                obj = o;
                moved = true;
                if (change <= 1e-16 * (1.0 + yp.norm())) it = 1000;
                break;
            }
        }
        if (!moved) break;
    }
    const double fv = s.f(yp);
    const Vec gf = s.grad(yp);
    const Vec grad = (yp - target) + (fv - yn) * gf;
    if (grad.norm() > 1e-10 * (1.0 + y.norm())) return false;
    const double dist = std::sqrt(2 * obj);
    if (dist < best) {
        best = dist;
        best_foot = yp;
    }
    return true;
}

}  // namespace detail

inline ProjectionResult project(const GraphSurface& s, const Vec& x) {
    const int n = s.dimension();
    if (x.size() != n) throw DomainError("point has the wrong dimension");
    const Vec y = s.frame() * x;
    if (y.head(n - 1).norm() >= s.chart_radius()) throw DomainError("point outside the surface chart");
    const double eps = 0.1 * std::max(y.norm(), 1e-3);
    std::vector<Vec> seeds;
    const Vec base = y.head(n - 1);
    seeds.push_back(base);
    seeds.push_back(0.5 * base);
    for (int sgn : {1, -1}) {
        Vec v = base;
        v[0] += sgn * eps;
        seeds.push_back(v);
    }
    {
        Vec v = base;
        v[n > 2 ? 1 : 0] += eps;
        seeds.push_back(v);
    }
    double best = std::numeric_limits<double>::infinity();
    Vec foot;
    for (const auto& seed : seeds) detail::project_from(s, y, seed, best, foot);
    if (!std::isfinite(best)) {
        const double resid = y[n - 1] - s.f(base);
        throw ConvergenceError(fmt::format("foot-point projection failed at |x| = {:.3e}", x.norm()),
                               {x.norm(), resid});
    }
    return {best, s.lift(foot)};
}

inline double signed_distance(const GraphSurface& s, const Vec& x) {
    const Vec y = s.frame() * x;
    const int n = s.dimension();
    const double side = y[n - 1] - s.f(y.head(n - 1));
    if (side == 0.0) return 0.0;
    const double d = project(s, x).distance;
    return side > 0 ? d : -d;
}

// ---------------------------------------------------------------------------
// Tangent cones, fans and the straightening map.
// ---------------------------------------------------------------------------

enum class ConeTag { halfspace, wedge, cap_cone, fan };

inline std::string to_string(ConeTag t) {
    switch (t) {
        case ConeTag::halfspace: return "halfspace";
        case ConeTag::wedge: return "wedge";
        case ConeTag::cap_cone: return "cap-cone";
        default: return "fan";
    }
}

struct TangentConeSpec {
    ConeTag tag = ConeTag::halfspace;
    int n = 3;
    std::vector<Vec> normals;  // half-spaces {⟨ν, x⟩ > 0}
    Vec axis;                  // halfspace normal or cap-cone axis
    double aperture = 0.0;     // wedge opening, or cap-cone half-angle

    [[nodiscard]] bool contains(const Vec& x) const {
        if (tag == ConeTag::cap_cone) {
            const double r = x.norm();
            return r > 0 && std::acos(std::clamp(axis.dot(x) / r, -1.0, 1.0)) < aperture;
        }
        return std::all_of(normals.begin(), normals.end(), [&](const Vec& v) { return v.dot(x) > 0; });
    }

    static TangentConeSpec cap(int n, double half_angle) {
        TangentConeSpec c;
        c.tag = ConeTag::cap_cone;
        c.n = n;
        c.axis = Vec::Unit(n, n - 1);
        c.aperture = half_angle;
        return c;
    }
};

inline TangentConeSpec tangent_cone(const std::vector<GraphSurface>& surfaces) {
    if (surfaces.empty()) throw DomainError("tangent_cone needs at least one surface");
    const int n = surfaces.front().dimension();
    TangentConeSpec c;
    c.n = n;
    for (const auto& s : surfaces) {
        if (s.dimension() != n) throw DomainError("surfaces of different dimensions");
        c.normals.push_back(s.normal_at_origin());
    }
    for (std::size_t i = 0; i < c.normals.size(); ++i)
        for (std::size_t j = i + 1; j < c.normals.size(); ++j)
            if (1.0 - std::abs(c.normals[i].dot(c.normals[j])) < 1e-12)
                throw DomainError(fmt::format("normals of surfaces {} and {} are linearly dependent", i, j));
    Mat N(n, int(c.normals.size()));
    for (std::size_t i = 0; i < c.normals.size(); ++i) N.col(int(i)) = c.normals[i];
    if (Eigen::FullPivLU<Mat>(N).rank() < int(c.normals.size()))
        throw DomainError("surface normals at the origin are linearly dependent");
    if (c.normals.size() == 1) {
        c.tag = ConeTag::halfspace;
        c.axis = c.normals.front();
    } else if (c.normals.size() == 2) {
        c.tag = ConeTag::wedge;
        c.aperture = pi - std::acos(std::clamp(c.normals[0].dot(c.normals[1]), -1.0, 1.0));
        c.axis = (c.normals[0] + c.normals[1]).normalized();
    } else {
        c.tag = ConeTag::fan;
    }
    return c;
}

/// Unit direction e maximising min_i ⟨ν_i, e⟩: a quasi-uniform grid of about
/// 10⁴ directions followed by local coordinate refinement.
inline std::pair<Vec, double> choose_reference_direction(const std::vector<Vec>& normals, int samples = 10000) {
    if (normals.empty()) throw DomainError("no normals");
    const int n = int(normals.front().size());
    auto score = [&](const Vec& e) {
        double s = std::numeric_limits<double>::infinity();
        for (const auto& v : normals) s = std::min(s, v.dot(e));
        return s;
    };
    Vec best = normals.front();
    double best_score = score(best);
    // Halton points pushed through Box–Muller give a deterministic, roughly
    // uniform cloud of directions.
    auto radical = [](int i, int base) {
        double f = 1, r = 0;
        while (i > 0) {
            f /= base;
            r += f * (i % base);
            i /= base;
        }
        return r;
    };
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (int i = 1; i <= samples; ++i) {
        Vec e(n);
        for (int c = 0; c < n; ++c) {
            const double u1 = std::max(radical(i, primes[(2 * c) % 12]), 1e-12), u2 = radical(i, primes[(2 * c + 1) % 12]);
            e[c] = std::sqrt(-2 * std::log(u1)) * std::cos(2 * pi * u2);
        }
        if (e.norm() == 0) continue;
        e.normalize();
        const double s = score(e);
        if (s > best_score) best_score = s, best = e;
    }
    double step = 0.05;
    while (step > 1e-12) {
        bool improved = false;
        for (int c = 0; c < n; ++c)
            for (int sgn : {1, -1}) {
                Vec e = best;
                e[c] += sgn * step;
                e.normalize();
                const double s = score(e);
                if (s > best_score + 1e-15) best_score = s, best = e, improved = true;
            }
        if (!improved) step *= 0.5;
    }
    return {best, best_score};
}

class HyperplaneFan {
public:
    explicit HyperplaneFan(std::vector<Vec> normals) : normals_(std::move(normals)) {
        if (normals_.empty()) throw DomainError("fan needs at least one normal");
        const int n = int(normals_.front().size());
        const int k = int(normals_.size());
        if (k > n) throw DomainError("more normals than dimensions");
        Mat A(n, k);
        for (int i = 0; i < k; ++i) A.col(i) = normals_[i].normalized(), normals_[i] = A.col(i);
        Mat gram = A.transpose() * A;
        if (std::abs(gram.determinant()) < 1e-12) throw DomainError("fan normals are linearly dependent");
        // Orthonormal basis of span(ν)^⊥ from a full QR of A.
        Eigen::HouseholderQR<Mat> qr(A);
        Mat Qfull = qr.householderQ() * Mat::Identity(n, n);
        for (int i = k; i < n; ++i) completion_.push_back(Qfull.col(i));
        auto [e, margin] = choose_reference_direction(normals_);
        reference_ = e;
        margin_ = margin;
        rows_ = Mat(n, n);
        for (int i = 0; i < k; ++i) rows_.row(i) = normals_[i].transpose();
        for (int i = k; i < n; ++i) rows_.row(i) = completion_[i - k].transpose();
        rows_inv_ = rows_.inverse();
    }

    [[nodiscard]] int dimension() const { return int(rows_.rows()); }
    [[nodiscard]] int count() const { return int(normals_.size()); }
    [[nodiscard]] const std::vector<Vec>& normals() const { return normals_; }
    [[nodiscard]] const std::vector<Vec>& completion() const { return completion_; }
    [[nodiscard]] const Vec& reference_direction() const { return reference_; }
    [[nodiscard]] double reference_margin() const { return margin_; }
    /// Rows ν₁..ν_n: the linear map x ↦ (d_{P_1}(x), …, d_{P_n}(x)).
    [[nodiscard]] const Mat& plane_map() const { return rows_; }
    [[nodiscard]] const Mat& plane_map_inverse() const { return rows_inv_; }

private:
    std::vector<Vec> normals_, completion_;
    Vec reference_;
    double margin_ = 0.0;
    Mat rows_, rows_inv_;
};

/// x ↦ x̄ with d_{S_i}(x) = d_{P_i}(x̄) for the surfaces and unchanged
/// distances to the completing planes.
class DiffeoT {
public:
    DiffeoT(std::vector<GraphSurface> surfaces, HyperplaneFan fan)
        : surfaces_(std::move(surfaces)), fan_(std::move(fan)) {
        if (int(surfaces_.size()) != fan_.count()) throw DomainError("one fan normal per surface is required");
        double c2 = 0;
        for (const auto& s : surfaces_) c2 = std::max(c2, s.c2_seminorm());
        radius_ = c2 > 0 ? std::min(0.25, 0.1 / c2) : 0.25;
    }

    static DiffeoT build(std::vector<GraphSurface> surfaces) {
        std::vector<Vec> normals;
        for (const auto& s : surfaces) normals.push_back(s.normal_at_origin());
        HyperplaneFan fan(std::move(normals));
        return DiffeoT(std::move(surfaces), std::move(fan));
    }

    [[nodiscard]] double radius() const noexcept { return radius_; }
    [[nodiscard]] const std::vector<GraphSurface>& surfaces() const noexcept { return surfaces_; }
    [[nodiscard]] const HyperplaneFan& fan() const noexcept { return fan_; }

    [[nodiscard]] Vec distances(const Vec& x) const {
        const int n = fan_.dimension(), k = fan_.count();
        Vec d(n);
        for (int i = 0; i < k; ++i) d[i] = signed_distance(surfaces_[i], x);
        for (int i = k; i < n; ++i) d[i] = fan_.completion()[i - k].dot(x);
        return d;
    }

    [[nodiscard]] Vec apply(const Vec& x) const {
        if (x.norm() >= radius_) throw DomainError(fmt::format("point |x| = {:.4g} outside r_T = {:.4g}", x.norm(), radius_));
        return fan_.plane_map_inverse() * distances(x);
    }

    [[nodiscard]] Mat jacobian(const Vec& x, double scale = 1.0) const {
        const int n = fan_.dimension();
        const double h = scale * 1e-5 * std::max(x.norm(), 1e-3);
        Mat J(n, n);
        for (int j = 0; j < n; ++j) {
            Vec xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            J.col(j) = (apply(xp) - apply(xm)) / (2 * h);
        }
        return J;
    }

private:
    std::vector<GraphSurface> surfaces_;
    HyperplaneFan fan_;
    double radius_ = 0.25;
};

inline Vec apply_T(const DiffeoT& T, const Vec& x) { return T.apply(x); }
inline Mat jacobian_T(const DiffeoT& T, const Vec& x) { return T.jacobian(x); }

/// Richardson estimate of the FD Jacobian error: |J(h) − J(h/2)|_max.
inline double jacobian_richardson_gap(const DiffeoT& T, const Vec& x) {
    return (T.jacobian(x, 1.0) - T.jacobian(x, 0.5)).cwiseAbs().maxCoeff();
}

/// Log–log slope of |Tx − x| against |x| along the ray t·dir, t in [t_lo, t_hi].
inline LineFit displacement_slope(const DiffeoT& T, const Vec& dir, double t_lo, double t_hi, int samples = 12) {
    std::vector<double> lx, ly;
    const Vec u = dir.normalized();
    for (int i = 0; i < samples; ++i) {
        const double t = t_lo * std::pow(t_hi / t_lo, double(i) / (samples - 1));
        const Vec x = t * u;
        const double disp = (T.apply(x) - x).norm();
        if (disp <= 0) continue;
        lx.push_back(std::log(t));
        ly.push_back(std::log(disp));
    }
    if (lx.size() < 2) throw DomainError("ray displacement vanishes identically");
    return fit_line(lx, ly);
}

/// |Δ_x(f∘T)(x) − Δf(Tx)| and the reference size |∇f(Tx)| + |x||∇²f(Tx)|,
/// by central differences with step h.
struct CompositionError {
    double error = 0.0;
    double scale = 0.0;
};

inline CompositionError composition_error(const DiffeoT& T, const std::function<double(const Vec&)>& f, const Vec& x,
                                          double h) {
    const int n = int(x.size());
    const Vec xb = T.apply(x);
    const double fx = f(xb);
    double lap_comp = 0, lap_f = 0, grad2 = 0;
    Mat H(n, n);
    for (int i = 0; i < n; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        lap_comp += (f(T.apply(xp)) - 2 * fx + f(T.apply(xm))) / (h * h);
        Vec bp = xb, bm = xb;
        bp[i] += h;
        bm[i] -= h;
        lap_f += (f(bp) - 2 * fx + f(bm)) / (h * h);
        grad2 += sqr((f(bp) - f(bm)) / (2 * h));
        for (int j = 0; j < n; ++j) {
            Vec a = xb, b = xb, c = xb, d = xb;
            a[i] += h, a[j] += h;
            b[i] += h, b[j] -= h;
            c[i] -= h, c[j] += h;
            d[i] -= h, d[j] -= h;
            H(i, j) = (f(a) - f(b) - f(c) + f(d)) / (4 * h * h);
        }
    }
    return {std::abs(lap_comp - lap_f), std::sqrt(grad2) + x.norm() * H.norm()};
}

/// Sample points with their signed distances, columns x1..xn, d1..dk.
inline void write_samples_csv(const DiffeoT& T, const std::vector<Vec>& points, std::ostream& os) {
    const int n = T.fan().dimension(), k = T.fan().count();
    for (int i = 0; i < n; ++i) os << (i ? "," : "") << "x" << i + 1;
    for (int i = 0; i < k; ++i) os << ",d" << i + 1;
    os << "\n";
    for (const auto& x : points) {
        const Vec d = T.distances(x);
        os << fmt::format("{:.17g}", x[0]);
        for (int i = 1; i < n; ++i) os << fmt::format(",{:.17g}", x[i]);
        for (int i = 0; i < k; ++i) os << fmt::format(",{:.17g}", d[i]);
        os << "\n";
    }
}

}  // namespace lnb
