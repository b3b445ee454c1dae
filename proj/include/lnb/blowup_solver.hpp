#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lnb/cap_profile.hpp"
#include "lnb/common.hpp"
#include "lnb/grid.hpp"
#include "lnb/operator.hpp"

namespace lnb {

inline double exact_halfspace(int n, double d) {
    require_dimension(n);
    if (!(d > 0)) throw DomainError("exact_halfspace: distance must be positive");
    return std::pow(d, -Exponents{n}.k());
}

/// u_R(x) = (2R/(R² − |x|²))^{(n−2)/2}, the solution on the ball B_R(0).
inline double exact_ball(int n, double R, double x_norm) {
    require_dimension(n);
    if (!(x_norm < R)) throw DomainError("exact_ball: point outside the ball");
    return std::pow(2 * R / (R * R - x_norm * x_norm), Exponents{n}.k());
}

inline double exact_ball(int n, double R, const Vec& x) { return exact_ball(n, R, x.norm()); }

enum class Reduction { meridian, cross_section, ball };

inline std::string to_string(Reduction r) {
    switch (r) {
        case Reduction::meridian: return "meridian";
        case Reduction::cross_section: return "cross-section";
        default: return "ball";
    }
}

/// Two-dimensional reduction of a blowup problem near the origin.
///  meridian:      axisymmetric {θ < θ_b(r)}, θ measured from e_n, vertex at 0.
///  cross_section: wedge {0 < θ < θ₀} in the x' plane, times R^{n−2}.
///  ball:          B_R(0), all of its boundary blows up.
struct DomainSpec2D {
    Reduction reduction = Reduction::meridian;
    int n = 3;
    double theta0 = pi / 2;
    std::function<double(double)> boundary;          // θ_b(r); empty means θ₀
    std::function<double(double, double)> distance;  // d(r, θ); empty means the cone formula
    double r_min = std::ldexp(1.0, -8);
    double r_max = 1.0;
    double ball_radius = 1.0;
    std::string label;

    void validate() const {
        require_dimension(n);
        if (reduction == Reduction::ball) {
            if (!(ball_radius > 0)) throw DomainError("ball radius must be positive");
            return;
        }
        if (!(r_min > 0 && r_min < r_max && r_max <= 1.0)) throw DomainError("need 0 < r_min < r_max <= 1");
        if (!(theta0 > 0 && theta0 < (reduction == Reduction::meridian ? pi : 2 * pi)))
            throw DomainError("opening angle out of range");
        if (boundary) {
            if (std::abs(boundary(0.0) - theta0) > 1e-12) throw DomainError("boundary curve must start at theta0");
            if (reduction != Reduction::meridian) throw DomainError("curved boundaries need the meridian reduction");
        }
    }

    [[nodiscard]] double boundary_angle(double r) const { return boundary ? boundary(r) : theta0; }

    [[nodiscard]] double boundary_distance(double r, double theta) const {
        if (distance) return distance(r, theta);
        const double tb = boundary_angle(r);
        if (reduction == Reduction::cross_section) {
            const double a = std::min(theta, tb - theta);
            return a >= pi / 2 ? r : r * std::sin(a);
        }
        const double a = tb - theta;
        return a >= pi / 2 ? r : r * std::sin(a);
    }

    static DomainSpec2D cap_cone(int n, double theta0, double r_min = std::ldexp(1.0, -8), double r_max = 1.0) {
        DomainSpec2D d;
        d.n = n;
        d.theta0 = theta0;
        d.r_min = r_min;
        d.r_max = r_max;
        d.label = fmt::format("cap-cone(n={},theta0={:.6g})", n, theta0);
        return d;
    }

    static DomainSpec2D wedge(int n, double opening, double r_min = std::ldexp(1.0, -8), double r_max = 1.0) {
        DomainSpec2D d = cap_cone(n, opening, r_min, r_max);
        d.reduction = Reduction::cross_section;
        d.label = fmt::format("wedge(n={},opening={:.6g})", n, opening);
        return d;
    }

    /// The ball B_R(R e_n) seen from its boundary point 0: cos θ_b = r/(2R).
    static DomainSpec2D tangent_ball(int n, double R, double r_min, double r_max) {
        DomainSpec2D d = cap_cone(n, pi / 2, r_min, r_max);
        if (!(r_max < 2 * R)) throw DomainError("tangent ball: r_max must be below the diameter");
        d.boundary = [R](double r) { return std::acos(r / (2 * R)); };
        d.distance = [R](double r, double th) {
            const double rho = r * std::sin(th), z = r * std::cos(th) - R;
            return R - std::hypot(rho, z);
        };
        d.label = fmt::format("tangent-ball(n={},R={:g})", n, R);
        return d;
    }

    static DomainSpec2D centered_ball(int n, double R = 1.0) {
        DomainSpec2D d;
        d.reduction = Reduction::ball;
        d.n = n;
        d.ball_radius = R;
        d.label = fmt::format("ball(n={},R={:g})", n, R);
        return d;
    }
};

struct SolveConfig {
    std::vector<double> levels;  // truncation schedule; empty means the profile's level
    double newton_tolerance = 1e-10;
    int max_newton = 80;
    double bracket_low = 0.5;
    double bracket_high = 2.0;
    double localization_tolerance = 1e-3;
    bool strict_localization = true;
    int radial_intervals = 96;    // cells in log r (cones) or in r (ball)
    GridSpec angular{400, 0.3, 1.0, 1e-10};
    GridSpec radial{2000, 0.3, 1.0, 1e-9};  // ball only
    int ball_angular_intervals = 4;
    TruncationSchedule profile_schedule;  // used to pick the level when `levels` is empty

    void validate() const {
        for (std::size_t i = 1; i < levels.size(); ++i)
            if (!(levels[i] > levels[i - 1])) throw ConfigError("truncation schedule must be strictly increasing");
        if (!(bracket_low > 0 && bracket_low < bracket_high)) throw ConfigError("need 0 < bracket low < bracket high");
        if (!(newton_tolerance > 0) || !(localization_tolerance > 0)) throw ConfigError("tolerances must be positive");
        if (radial_intervals < 4) throw ConfigError("too few radial intervals");
    }
};

/// Discrete solution on a rows × cols mesh: row i is a radius (or log radius),
/// column j an angle.
struct SolutionField {
    Reduction reduction = Reduction::meridian;
    int n = 3;
    std::string label, operator_label;
    std::size_t rows = 0, cols = 0;
    std::vector<double> r;                      // per row
    std::vector<double> theta, u, d, v;         // per node (v = r^k u for cones)
    std::vector<char> fixed;                    // Dirichlet nodes
    std::vector<char> wall;                     // blowup-boundary nodes
    double level = 0.0;
    double r_min = 0.0, r_max = 1.0;
    std::vector<double> u_high;                 // high outer data (cones)
    double bracket_low = 0.5, bracket_high = 2.0;
    double bracket_width = 0.0;
    std::vector<double> level_history, level_increments;
    std::vector<std::vector<double>> level_fields;  // u at each level of the schedule
    std::optional<BlowupProfile> reference;     // profile on the same angular grid and level
    std::vector<double> beta;                   // θ_b(r)/θ₀ per row (meridian)

    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const { return i * cols + j; }
};

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// F(U) = A·U_all − vol ⊙ c·U^p over unknown rows. `cols_all` indexes every
/// node; `unknown_of` maps nodes to unknown indices (−1 for Dirichlet).
struct DiscreteSystem {
    std::size_t nodes = 0;
    std::vector<long> unknown_of;
    std::vector<std::size_t> node_of;
    SpMat A_all;    // unknown rows × all nodes
    SpMat A_free;   // unknown rows × unknown columns
    std::vector<double> vol;
    double c = 0, p = 1;

    [[nodiscard]] Eigen::VectorXd residual(const std::vector<double>& all) const {
        Eigen::Map<const Eigen::VectorXd> x(all.data(), Eigen::Index(all.size()));
        Eigen::VectorXd r = A_all * x;
        for (std::size_t k = 0; k < node_of.size(); ++k) r[Eigen::Index(k)] -= vol[k] * c * std::pow(all[node_of[k]], p);
        return r;
    }

    [[nodiscard]] Eigen::VectorXd scale(const std::vector<double>& all) const {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(Eigen::Index(node_of.size()));
        for (int k = 0; k < A_all.outerSize(); ++k)
            for (SpMat::InnerIterator it(A_all, k); it; ++it) s[it.row()] += std::abs(it.value() * all[std::size_t(it.col())]);
        for (std::size_t k = 0; k < node_of.size(); ++k)
            s[Eigen::Index(k)] += vol[k] * c * std::pow(all[node_of[k]], p);
        return s;
    }
};

inline void finalize(DiscreteSystem& sys, const std::vector<Triplet>& trip) {
    const auto m = Eigen::Index(sys.node_of.size());
    sys.A_all = SpMat(m, Eigen::Index(sys.nodes));
    sys.A_all.setFromTriplets(trip.begin(), trip.end());
    std::vector<Triplet> free;
    free.reserve(trip.size());
    for (const auto& t : trip) {
        const long u = sys.unknown_of[std::size_t(t.col())];
        if (u >= 0) free.emplace_back(t.row(), u, t.value());
    }
    sys.A_free = SpMat(m, m);
    sys.A_free.setFromTriplets(free.begin(), free.end());
}

inline std::vector<double> newton_solve(const DiscreteSystem& sys, std::vector<double> all, double tol, int max_it,
                                        const std::string& what) {
    const std::size_t m = sys.node_of.size();
    auto merit = [&](const std::vector<double>& v) {
        const auto r = sys.residual(v);
        const auto s = sys.scale(v);
        double w = 0;
        for (std::size_t k = 0; k < m; ++k) w = std::max(w, std::abs(r[Eigen::Index(k)]) / std::max(s[Eigen::Index(k)], 1e-300));
        return w;
    };
    std::vector<double> trace;
    double current = merit(all);
    trace.push_back(current);
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    bool analysed = false;
    for (int it = 0; it < max_it; ++it) {
        SpMat J = sys.A_free;
        for (std::size_t k = 0; k < m; ++k)
            J.coeffRef(Eigen::Index(k), Eigen::Index(k)) -= sys.vol[k] * sys.c * sys.p * std::pow(all[sys.node_of[k]], sys.p - 1);
        if (!analysed) {
            lu.analyzePattern(J);
            analysed = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) throw ConvergenceError(what + ": singular Newton matrix", trace);
        const Eigen::VectorXd step = lu.solve(sys.residual(all));
        double update = 0;
        for (std::size_t k = 0; k < m; ++k) update = std::max(update, std::abs(step[Eigen::Index(k)]) / all[sys.node_of[k]]);
        double lambda = 1.0;
        std::vector<double> trial = all;
        bool accepted = false;
        for (int half = 0; half < 60; ++half, lambda *= 0.5) {
            bool positive = true;
            for (std::size_t k = 0; k < m; ++k) {
                const double v = all[sys.node_of[k]] - lambda * step[Eigen::Index(k)];
                trial[sys.node_of[k]] = v;
                if (!(v > 0)) positive = false;
            }
            if (!positive) continue;
            const double next = merit(trial);
            if (next < current || half >= 30) {
                current = next;
                accepted = true;
                break;
            }
        }
        if (!accepted) throw ConvergenceError(what + ": no admissible damped step", trace);
        all.swap(trial);
        trace.push_back(current);
        if (lambda * update < tol) return all;
    }
    throw ConvergenceError(what + ": Newton iteration limit reached", trace);
}

/// Three-point first and second derivative weights on a nonuniform grid.
struct Stencil3 {
    std::array<double, 3> d1{}, d2{};
};

inline Stencil3 stencil(double h0, double h1) {
    Stencil3 s;
    s.d1 = {-h1 / (h0 * (h0 + h1)), (h1 - h0) / (h0 * h1), h0 / (h1 * (h0 + h1))};
    s.d2 = {2 / (h0 * (h0 + h1)), -2 / (h0 * h1), 2 / (h1 * (h0 + h1))};
    return s;
}

/// Cone-type reductions in (t, η), t = ln r, θ = β(t)η, for v = r^k u.
struct ConeMesh {
    int n = 3;
    Reduction reduction = Reduction::meridian;
    std::vector<double> t;
    AngularGrid eta;
    std::vector<double> beta, gamma, dgamma;  // β, β'/β, (β'/β)'
    std::vector<FiniteVolume1D> fv;           // per row
};

inline ConeMesh make_cone_mesh(const DomainSpec2D& dom, const SolveConfig& cfg) {
    ConeMesh m;
    m.n = dom.n;
    m.reduction = dom.reduction;
    const int N = cfg.radial_intervals;
    const double t0 = std::log(dom.r_min), t1 = std::log(dom.r_max);
    m.t.resize(N + 1);
    for (int i = 0; i <= N; ++i) m.t[i] = t0 + (t1 - t0) * i / N;
    const auto sd = dom.reduction == Reduction::meridian ? SphericalDomain1D::cap(dom.theta0)
                                                         : SphericalDomain1D::arc(dom.theta0);
    m.eta = AngularGrid(sd, cfg.angular, dom.n);
    auto beta_of = [&](double t) { return dom.boundary_angle(std::exp(t)) / dom.theta0; };
    m.beta.resize(N + 1);
    m.gamma.assign(N + 1, 0.0);
    m.dgamma.assign(N + 1, 0.0);
    for (int i = 0; i <= N; ++i) {
        m.beta[i] = beta_of(m.t[i]);
        if (dom.boundary) {
            const double h = 1e-4;
            auto lb = [&](double t) { return std::log(beta_of(t)); };
            m.gamma[i] = (lb(m.t[i] + h) - lb(m.t[i] - h)) / (2 * h);
            m.dgamma[i] = (lb(m.t[i] + h) - 2 * lb(m.t[i]) + lb(m.t[i] - h)) / (h * h);
        }
        const double b = m.beta[i];
        const int n = dom.n;
        if (dom.reduction == Reduction::meridian)
            m.fv.push_back(finite_volume(m.eta.nodes(), [b, n](double e) { return std::pow(std::sin(b * e), n - 2); }));
        else
            m.fv.push_back(finite_volume(m.eta.nodes(), [](double) { return 1.0; }));
    }
    return m;
}

inline DiscreteSystem assemble_cone(const ConeMesh& m, const OperatorSpec& op) {
    const Exponents e{m.n};
    const double k = e.k();
    const std::size_t rows = m.t.size(), cols = m.eta.size();
    const bool meridian = m.reduction == Reduction::meridian;
    const double sigma = meridian ? -1.0 : 1.0;
    const double first_order = meridian ? 0.0 : -2.0 * k;
    DiscreteSystem sys;
    sys.nodes = rows * cols;
    sys.unknown_of.assign(sys.nodes, -1);
    sys.c = e.c();
    sys.p = e.p();
    for (std::size_t i = 1; i + 1 < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            if (!m.eta.is_blowup_node(j)) {
                sys.unknown_of[i * cols + j] = long(sys.node_of.size());
                sys.node_of.push_back(i * cols + j);
            }
    sys.vol.resize(sys.node_of.size());
    const double ht = m.t[1] - m.t[0];
    std::vector<Triplet> trip;
    trip.reserve(sys.node_of.size() * 11);
    const bool perturbed = !op.is_laplacian;
    for (std::size_t row = 0; row < sys.node_of.size(); ++row) {
        const std::size_t node = sys.node_of[row];
        const std::size_t i = node / cols, j = node % cols;
        const auto& fv = m.fv[i];
        const double vol = fv.volume[j];
        sys.vol[row] = vol;
        double coef[3][3] = {};  // [di+1][dj+1]
        const double b2 = m.beta[i] * m.beta[i];
        // angular flux form
        if (j + 1 < cols) coef[1][2] += fv.face[j] / b2, coef[1][1] -= fv.face[j] / b2;
        if (j > 0) coef[1][0] += fv.face[j - 1] / b2, coef[1][1] -= fv.face[j - 1] / b2;
        // pointwise terms, multiplied by vol below
        double pc[3][3] = {};
        auto add = [&](int di, int dj, double w) { pc[di + 1][dj + 1] += w; };
        const bool pole = meridian && j == 0;
        Stencil3 s{};
        if (!pole && j > 0 && j + 1 < cols) s = stencil(m.eta.spacing(j - 1), m.eta.spacing(j));
        const double h0 = (j + 1 < cols) ? m.eta.spacing(j) : 0.0;
        // derivative stencils as (di, dj, weight) lists
        auto Veta = [&](double w, int di = 0) {
            if (pole) return;
            for (int q = 0; q < 3; ++q) add(di, q - 1, w * s.d1[q]);
        };
        auto Veta2 = [&](double w, int di = 0) {
            if (pole) {
                add(di, 0, -2 * w / (h0 * h0));
                add(di, 1, 2 * w / (h0 * h0));
                return;
            }
            for (int q = 0; q < 3; ++q) add(di, q - 1, w * s.d2[q]);
        };
        auto Vt = [&](double w) {
            add(1, 0, w / (2 * ht));
            add(-1, 0, -w / (2 * ht));
        };
        auto Vtt = [&](double w) {
            add(1, 0, w / (ht * ht));
            add(-1, 0, w / (ht * ht));
            add(0, 0, -2 * w / (ht * ht));
        };
        auto Vteta = [&](double w) {
            Veta(w / (2 * ht), 1);
            Veta(-w / (2 * ht), -1);
        };
        const double eta = m.eta.theta(j), g = m.gamma[i], dg = m.dgamma[i], beta = m.beta[i];
        // v_tt, v_t in mapped variables
        auto vtt = [&](double w) {
            Vtt(w);
            Vteta(-2 * eta * g * w);
            Veta2(eta * eta * g * g * w);
            Veta(eta * (g * g - dg) * w);
        };
        auto vt = [&](double w) {
            Vt(w);
            Veta(-eta * g * w);
        };
        auto vth = [&](double w) { Veta(w / beta); };
        auto vthth = [&](double w) { Veta2(w / (beta * beta)); };
        auto vtth = [&](double w) {
            Vteta(w / beta);
            Veta(-g * w / beta);
            Veta2(-g * eta * w / beta);
        };
        vtt(1.0);
        if (first_order != 0.0) vt(first_order);
        add(0, 0, sigma * k * k);
        if (perturbed) {
            const double r = std::exp(m.t[i]), th = beta * eta;
            const double sn = std::sin(th), cs = std::cos(th);
            const auto mc = meridian_coefficients(op, r * sn, r * cs);
            const double darr = mc.arr - 1, dazz = mc.azz - 1, arz = mc.arz, dap = mc.aperp - (m.n - 2);
            // scaled polar pieces: Dr = v_t − k v, Drr = v_tt − (2k+1)v_t + k(k+1)v,
            // Dth = v_θ, Dthth = v_θθ, Drth = v_tθ − k v_θ
            auto Dr = [&](double w) { vt(w), add(0, 0, -k * w); };
            auto Drr = [&](double w) { vtt(w), vt(-(2 * k + 1) * w), add(0, 0, k * (k + 1) * w); };
            auto Dth = [&](double w) { vth(w); };
            auto Dthth = [&](double w) { vthth(w); };
            auto Drth = [&](double w) { vtth(w), vth(-k * w); };
            auto Hrr = [&](double w) { Drr(w); };
            auto Hrth = [&](double w) { Drth(w), Dth(-w); };
            auto Hthth = [&](double w) { Dthth(w), Dr(w); };
            const double a_rr = darr * sn * sn + arz * sn * cs + dazz * cs * cs;
            const double a_rth = 2 * darr * sn * cs + arz * (cs * cs - sn * sn) - 2 * dazz * sn * cs;
            const double a_thth = darr * cs * cs - arz * sn * cs + dazz * sn * sn;
            Hrr(a_rr);
            Hrth(a_rth);
            Hthth(a_thth);
            if (pole) {
                Dr(dap);
                Dthth(dap);
            } else {
                Dr(dap);
                Dth(dap * cs / sn);
            }
            Dr(r * (mc.br * sn + mc.bz * cs));
            Dth(r * (mc.br * cs - mc.bz * sn));
            add(0, 0, r * r * mc.c);
        }
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) coef[a][b] += vol * pc[a][b];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                if (coef[a][b] == 0.0) continue;
                const long ii = long(i) + a - 1, jj = long(j) + b - 1;
                if (jj < 0 || jj >= long(cols)) continue;  // weights there are zero by construction
                trip.emplace_back(Eigen::Index(row), Eigen::Index(std::size_t(ii) * cols + std::size_t(jj)), coef[a][b]);
            }
    }
    finalize(sys, trip);
    return sys;
}

/// Ball B_R(0) in (r, θ) with both poles regular; u itself is the unknown.
struct BallMesh {
    int n = 3;
    double R = 1.0;
    GradedNodes r, th;
    FiniteVolume1D fr, fr2, fth;  // weights r^{n−1}, r^{n−3}, sin^{n−2}θ
};

inline BallMesh make_ball_mesh(const DomainSpec2D& dom, const SolveConfig& cfg) {
    BallMesh m;
    m.n = dom.n;
    m.R = dom.ball_radius;
    m.r = graded_nodes(0.0, m.R, false, true, cfg.radial);
    GridSpec ang{cfg.ball_angular_intervals, 1.0, 1.0, 1e-10};
    m.th = graded_nodes(0.0, pi, false, false, ang);
    const int n = dom.n;
    m.fr = finite_volume(m.r, [n](double r) { return std::pow(r, n - 1); });
    m.fr2 = finite_volume(m.r, [n](double r) { return std::pow(r, n - 3); });
    m.fth = finite_volume(m.th, [n](double t) { return std::pow(std::sin(t), n - 2); });
    return m;
}

inline DiscreteSystem assemble_ball(const BallMesh& m) {
    const Exponents e{m.n};
    const std::size_t rows = m.r.size(), cols = m.th.size();
    DiscreteSystem sys;
    sys.nodes = rows * cols;
    sys.unknown_of.assign(sys.nodes, -1);
    sys.c = e.c();
    sys.p = e.p();
    for (std::size_t i = 0; i + 1 < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            sys.unknown_of[i * cols + j] = long(sys.node_of.size());
            sys.node_of.push_back(i * cols + j);
        }
    sys.vol.resize(sys.node_of.size());
    std::vector<Triplet> trip;
    for (std::size_t row = 0; row < sys.node_of.size(); ++row) {
        const std::size_t node = sys.node_of[row], i = node / cols, j = node % cols;
        sys.vol[row] = m.fr.volume[i] * m.fth.volume[j];
        auto link = [&](std::size_t other, double w) {
            trip.emplace_back(Eigen::Index(row), Eigen::Index(other), w);
            trip.emplace_back(Eigen::Index(row), Eigen::Index(node), -w);
        };
        if (i + 1 < rows) link(node + cols, m.fr.face[i] * m.fth.volume[j]);
        if (i > 0) link(node - cols, m.fr.face[i - 1] * m.fth.volume[j]);
        if (j + 1 < cols) link(node + 1, m.fr2.volume[i] * m.fth.face[j]);
        if (j > 0) link(node - 1, m.fr2.volume[i] * m.fth.face[j - 1]);
    }
    finalize(sys, trip);
    return sys;
}

inline double interior_change(const std::vector<double>& a, const std::vector<double>& b, const std::vector<char>& mask) {
    double w = 0;
    for (std::size_t q = 0; q < a.size(); ++q)
        if (mask[q]) w = std::max(w, std::abs(a[q] - b[q]) / std::abs(a[q]));
    return w;
}

}  // namespace detail

/// Relative width max (u_high − u_low)/u_low over non-boundary nodes with
/// r ≤ report_radius (default r_max/4).
inline double bracket_width(const SolutionField& f, std::optional<double> report_radius = std::nullopt) {
    if (f.u_high.empty()) return 0.0;
    const double cut = report_radius.value_or(0.25 * f.r_max) * (1 + 1e-12);
    double w = 0;
    for (std::size_t i = 0; i < f.rows; ++i) {
        if (f.r[i] > cut) continue;
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            if (f.fixed[q]) continue;
            w = std::max(w, std::abs(f.u_high[q] - f.u[q]) / f.u[q]);
        }
    }
    return w;
}

class LocalizationError : public CheckFailure {
public:
    LocalizationError(const std::string& what, double width) : CheckFailure(what), width_(width) {}
    [[nodiscard]] double width() const noexcept { return width_; }

private:
    double width_;
};

inline void require_localized(const SolutionField& f, double tolerance) {
    if (f.bracket_width > tolerance)
        throw LocalizationError(fmt::format("{}: outer-data bracket width {:.3e} exceeds {:.1e} on r <= r_max/4",
                                            f.label, f.bracket_width, tolerance),
                                f.bracket_width);
}

namespace detail {

inline SolutionField solve_ball(const DomainSpec2D& dom, const OperatorSpec& op, const SolveConfig& cfg) {
    if (!op.is_laplacian) throw DomainError("ball reduction supports the Laplacian only");
    const auto mesh = make_ball_mesh(dom, cfg);
    const auto sys = assemble_ball(mesh);
    const double k = Exponents{dom.n}.k();
    SolutionField f;
    f.reduction = Reduction::ball;
    f.n = dom.n;
    f.label = dom.label;
    f.operator_label = op.label;
    f.rows = mesh.r.size();
    f.cols = mesh.th.size();
    f.r = mesh.r.x;
    f.r_min = 0;
    f.r_max = dom.ball_radius;
    const std::size_t N = f.rows * f.cols;
    f.theta.resize(N);
    f.d.resize(N);
    f.fixed.assign(N, 0);
    f.wall.assign(N, 0);
    std::vector<char> interior(N, 0);
    for (std::size_t i = 0; i < f.rows; ++i)
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            f.theta[q] = mesh.th.x[j];
            f.d[q] = mesh.r.from_hi[i];
            f.fixed[q] = f.wall[q] = i + 1 == f.rows;
            interior[q] = f.d[q] >= 0.1 * dom.ball_radius;
        }
    auto levels = cfg.levels;
    if (levels.empty())
        for (double layer : {1e-4, 1e-5, 1e-6}) levels.push_back(std::pow(layer, -k));
    std::vector<double> prev;
    for (double M : levels) {
        std::vector<double> all(N);
        for (std::size_t q = 0; q < N; ++q)
            all[q] = f.wall[q] ? M : std::min(M, std::pow(2.0 / f.d[q], k));
        all = newton_solve(sys, std::move(all), cfg.newton_tolerance, cfg.max_newton, dom.label);
        f.level_history.push_back(M);
        if (!prev.empty()) f.level_increments.push_back(interior_change(all, prev, interior));
        f.level_fields.push_back(all);
        prev = all;
    }
    f.u = prev;
    f.level = levels.back();
    f.v = f.u;
    f.bracket_low = f.bracket_high = 1.0;
    f.bracket_width = 0.0;
    return f;
}

inline SolutionField solve_cone(const DomainSpec2D& dom, const OperatorSpec& op, const SolveConfig& cfg) {
    if (dom.reduction == Reduction::cross_section && !op.is_laplacian)
        throw DomainError("cross-section reduction supports the Laplacian only");
    if (!op.is_laplacian) {
        if (op.validity_radius < dom.r_max) throw DomainError("operator validity ball does not cover the domain");
        if (dom.reduction == Reduction::meridian && axisymmetry_defect(op) > 1e-8)
            throw DomainError("meridian reduction needs an axisymmetric operator");
    }
    const auto mesh = make_cone_mesh(dom, cfg);
    const auto sys = assemble_cone(mesh, op);
    const double k = Exponents{dom.n}.k();
    SolutionField f;
    f.reduction = dom.reduction;
    f.n = dom.n;
    f.label = dom.label;
    f.operator_label = op.label;
    f.rows = mesh.t.size();
    f.cols = mesh.eta.size();
    f.r_min = dom.r_min;
    f.r_max = dom.r_max;
    f.bracket_low = cfg.bracket_low;
    f.bracket_high = cfg.bracket_high;
    f.beta = mesh.beta;
    for (double t : mesh.t) f.r.push_back(std::exp(t));
    f.r.front() = dom.r_min;
    f.r.back() = dom.r_max;
    const std::size_t N = f.rows * f.cols;
    f.theta.resize(N);
    f.d.resize(N);
    f.fixed.assign(N, 0);
    f.wall.assign(N, 0);
    std::vector<char> interior(N, 0);
    const auto inner = interior_nodes(mesh.eta);
    for (std::size_t i = 0; i < f.rows; ++i)
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            f.theta[q] = mesh.beta[i] * mesh.eta.theta(j);
            f.d[q] = dom.boundary_distance(f.r[i], f.theta[q]);
            f.wall[q] = mesh.eta.is_blowup_node(j);
            f.fixed[q] = f.wall[q] || i == 0 || i + 1 == f.rows;
        }
    for (std::size_t i = 1; i + 1 < f.rows; ++i)
        for (std::size_t j : inner) interior[f.index(i, j)] = 1;

    std::vector<double> levels = cfg.levels;
    if (levels.empty()) {
        const double M = solve_profile(mesh.eta, cfg.profile_schedule).level();
        levels = {M / 4, M};
    }
    auto run = [&](const BlowupProfile& ref, double M, double kappa) {
        std::vector<double> all(N);
        const double t0 = mesh.t.front(), t1 = mesh.t.back();
        for (std::size_t i = 0; i < f.rows; ++i) {
            const double w = std::exp(2.0 * (mesh.t[i] - t1)) * (mesh.t[i] - t0) / (t1 - t0);
            for (std::size_t j = 0; j < f.cols; ++j) {
                const auto q = f.index(i, j);
                const double g = ref.g()[j];
                if (f.wall[q]) all[q] = M;
                else if (i == 0) all[q] = g;
                else if (i + 1 == f.rows) all[q] = kappa * g;
                else all[q] = g * (1.0 + (kappa - 1.0) * w);
            }
        }
        return newton_solve(sys, std::move(all), cfg.newton_tolerance, cfg.max_newton, dom.label);
    };
    std::vector<double> prev_u;
    std::optional<BlowupProfile> ref;
    for (double M : levels) {
        ref = solve_profile_fixed(mesh.eta, M);
        auto v = run(*ref, M, cfg.bracket_low);
        std::vector<double> u(N);
        for (std::size_t q = 0; q < N; ++q) u[q] = std::pow(f.r[q / f.cols], -k) * v[q];
        f.level_history.push_back(M);
        if (!prev_u.empty()) f.level_increments.push_back(interior_change(u, prev_u, interior));
        f.level_fields.push_back(u);
        prev_u = u;
        f.v = std::move(v);
    }
    f.u = prev_u;
    f.level = levels.back();
    f.reference = ref;
    const auto vh = run(*ref, f.level, cfg.bracket_high);
    f.u_high.resize(N);
    for (std::size_t q = 0; q < N; ++q) f.u_high[q] = std::pow(f.r[q / f.cols], -k) * vh[q];
    f.bracket_width = bracket_width(f);
    return f;
}

}  // namespace detail

inline SolutionField solve(const DomainSpec2D& domain, const OperatorSpec& op, const SolveConfig& config) {
    domain.validate();
    config.validate();
    if (op.n != domain.n) throw DomainError("operator and domain dimensions differ");
    auto f = domain.reduction == Reduction::ball ? detail::solve_ball(domain, op, config)
                                                 : detail::solve_cone(domain, op, config);
    if (config.strict_localization) require_localized(f, config.localization_tolerance);
    return f;
}

struct MonotoneReport {
    bool monotone = true;
    double worst_violation = 0.0;  // most negative relative increment
    std::size_t worst_node = 0;
    std::vector<double> increments;  // max relative interior increase between successive fields
};

/// Nodewise u_{i+1} ≥ u_i − 10⁻¹⁰|u_i| across the schedule.
inline MonotoneReport monotone_check(const std::vector<std::vector<double>>& fields, const std::vector<char>& interior,
                                     double slack = 1e-10) {
    if (fields.size() < 2) throw DomainError("monotone_check needs at least two fields");
    MonotoneReport rep;
    for (std::size_t s = 1; s < fields.size(); ++s) {
        const auto& a = fields[s - 1];
        const auto& b = fields[s];
        if (a.size() != b.size()) throw DomainError("monotone_check: fields live on different meshes");
        double inc = 0;
        for (std::size_t q = 0; q < a.size(); ++q) {
            const double rel = (b[q] - a[q]) / std::abs(a[q]);
            if (rel < -slack && rel < rep.worst_violation) {
                rep.monotone = false;
                rep.worst_violation = rel;
                rep.worst_node = q;
            }
            if (interior.empty() || interior[q]) inc = std::max(inc, std::abs(rel));
        }
        rep.increments.push_back(inc);
    }
    if (!rep.monotone)
        throw CheckFailure(fmt::format("truncation fields not monotone: relative drop {:.3e} at node {}",
                                       rep.worst_violation, rep.worst_node));
    return rep;
}

inline MonotoneReport monotone_check(const SolutionField& f, double slack = 1e-10) {
    std::vector<char> interior(f.u.size(), 0);
    for (std::size_t q = 0; q < f.u.size(); ++q) interior[q] = !f.fixed[q] && f.d[q] >= 0.1 * f.r_max;
    return monotone_check(f.level_fields, interior, slack);
}

struct GrowthBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// min/max of d^k u over non-boundary nodes with d ≤ 0.1, r ≤ r_max/4 and d
/// outside the truncation layer.
inline GrowthBounds growth_check(const SolutionField& f) {
    const double k = Exponents{f.n}.k();
    const double layer = 10.0 * std::pow(f.level, -1.0 / k);
    GrowthBounds g{std::numeric_limits<double>::infinity(), 0.0};
    std::size_t count = 0;
    for (std::size_t i = 0; i < f.rows; ++i) {
        if (f.reduction != Reduction::ball && f.r[i] > 0.25 * f.r_max * (1 + 1e-12)) continue;
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            if (f.fixed[q] || f.d[q] > 0.1) continue;
            const double scale = f.reduction == Reduction::ball ? 1.0 : f.r[i];
            if (f.d[q] < layer * scale) continue;
            const double v = std::pow(f.d[q], k) * f.u[q];
            g.lower = std::min(g.lower, v);
            g.upper = std::max(g.upper, v);
            ++count;
        }
    }
    if (count == 0 || !(g.lower > 0) || !std::isfinite(g.upper))
        throw CheckFailure("growth_check: degenerate ratio d^k u");
    return g;
}

struct CurvatureBound {
    double worst_ratio = std::numeric_limits<double>::infinity();  // min of u / (−S_g/(n(n−1)))^{(n−2)/4}
    std::size_t nodes = 0;
    double worst_r = 0.0, worst_theta = 0.0;
    bool holds = false;
};

/// u ≥ (−S_g/(n(n−1)))^{(n−2)/4} at unknown nodes with S_g < 0 and r in
/// [4 r_min, r_max/4] (the whole ball for the ball reduction); nodes sit at
/// r(sin θ e_1 + cos θ e_n).
inline CurvatureBound curvature_lower_bound(const SolutionField& f, const MetricFamily& metric) {
    if (f.reduction == Reduction::cross_section) throw DomainError("curvature bound needs a meridian or ball field");
    if (metric.dimension() != f.n) throw DomainError("metric and field dimensions differ");
    const double e = (f.n - 2) / 4.0, nn = f.n * (f.n - 1.0);
    const bool ball = f.reduction == Reduction::ball;
    CurvatureBound out;
    for (std::size_t i = 0; i < f.rows; ++i) {
        if (!ball && (f.r[i] < 4 * f.r_min * (1 - 1e-12) || f.r[i] > 0.25 * f.r_max * (1 + 1e-12))) continue;
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            if (f.fixed[q]) continue;
            Vec x = Vec::Zero(f.n);
            x[0] = f.r[i] * std::sin(f.theta[q]);
            x[f.n - 1] = f.r[i] * std::cos(f.theta[q]);
            const double S = scalar_curvature(metric, x, false);
            if (!(S < 0)) continue;
            const double ratio = f.u[q] / std::pow(-S / nn, e);
            ++out.nodes;
            if (ratio < out.worst_ratio) out.worst_ratio = ratio, out.worst_r = f.r[i], out.worst_theta = f.theta[q];
        }
    }
    out.holds = out.nodes > 0 && out.worst_ratio >= 1.0;
    return out;
}

/// Discrete defect (A u − vol c u^p)/vol of the ball discretisation at the
/// unknown nodes for an arbitrary field on the ball mesh.
inline std::vector<double> ball_defect(const DomainSpec2D& dom, const SolveConfig& cfg, const std::vector<double>& all) {
    const auto mesh = detail::make_ball_mesh(dom, cfg);
    const auto sys = detail::assemble_ball(mesh);
    if (all.size() != sys.nodes) throw DomainError("ball_defect: field does not match the mesh");
    const auto r = sys.residual(all);
    std::vector<double> out(sys.node_of.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = r[Eigen::Index(k)] / sys.vol[k];
    return out;
}

/// "# {json}" metadata line, then r,theta,u,d,u_high,node with node 0 for
/// unknowns, 1 for cut rows and 2 for wall nodes.
inline void write_field_csv(const SolutionField& f, std::ostream& os) {
    nlohmann::json meta{{"reduction", to_string(f.reduction)},
                        {"n", f.n},
                        {"label", f.label},
                        {"operator", f.operator_label},
                        {"rows", f.rows},
                        {"cols", f.cols},
                        {"r_min", f.r_min},
                        {"r_max", f.r_max},
                        {"level", f.level},
                        {"bracket", {f.bracket_low, f.bracket_high}},
                        {"bracket_width", f.bracket_width},
                        {"level_history", f.level_history},
                        {"level_increments", f.level_increments}};
    os << "# " << meta.dump() << "\n";
    os << "r,theta,u,d,u_high,node\n";
    for (std::size_t i = 0; i < f.rows; ++i)
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", f.r[i], f.theta[q], f.u[q], f.d[q],
                              f.u_high.empty() ? f.u[q] : f.u_high[q], f.wall[q] ? 2 : f.fixed[q] ? 1 : 0);
        }
}

inline SolutionField read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ConfigError("field CSV: missing metadata line");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(line.substr(2));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("field CSV: bad metadata: ") + e.what());
    }
    SolutionField f;
    const std::string red = meta.at("reduction");
    f.reduction = red == "ball" ? Reduction::ball : red == "cross-section" ? Reduction::cross_section : Reduction::meridian;
    f.n = meta.at("n");
    f.label = meta.at("label");
    f.operator_label = meta.at("operator");
    f.rows = meta.at("rows");
    f.cols = meta.at("cols");
    f.r_min = meta.at("r_min");
    f.r_max = meta.at("r_max");
    f.level = meta.at("level");
    f.bracket_low = meta.at("bracket")[0];
    f.bracket_high = meta.at("bracket")[1];
    f.bracket_width = meta.at("bracket_width");
    f.level_history = meta.at("level_history").get<std::vector<double>>();
    f.level_increments = meta.at("level_increments").get<std::vector<double>>();
    std::getline(is, line);
    const std::size_t N = f.rows * f.cols;
    f.r.resize(f.rows);
    for (auto* v : {&f.theta, &f.u, &f.d, &f.u_high}) v->resize(N);
    f.fixed.assign(N, 0);
    f.wall.assign(N, 0);
    std::size_t q = 0;
    while (std::getline(is, line) && !line.empty()) {
        if (q >= N) throw ConfigError("field CSV: more rows than the metadata declares");
        double r, th, u, d, uh;
        int node;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%d", &r, &th, &u, &d, &uh, &node) != 6)
            throw ConfigError("field CSV: malformed row '" + line + "'");
        f.r[q / f.cols] = r;
        f.theta[q] = th;
        f.u[q] = u;
        f.d[q] = d;
        f.u_high[q] = uh;
        f.fixed[q] = node != 0;
        f.wall[q] = node == 2;
        ++q;
    }
    if (q != N) throw ConfigError("field CSV: fewer rows than the metadata declares");
    if (f.reduction == Reduction::ball) f.u_high.clear();
    f.v = f.u;
    return f;
}

}  // namespace lnb
