#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lnb/blowup_solver.hpp"
#include "lnb/cap_profile.hpp"
#include "lnb/common.hpp"
#include "lnb/geometry.hpp"
#include "lnb/operator.hpp"
#include "lnb/spectral.hpp"
#include "lnb/tridiag.hpp"

namespace lnb {

// ---------------------------------------------------------------------------
// Barrier certificates
// ---------------------------------------------------------------------------

/// margin = min over the region of (c w^p − Lw)/scale, scale the sum of the
/// magnitudes of the terms involved; PASS iff margin > 0.
struct BarrierCertificate {
    std::string label;
    std::string region;
    double margin = -std::numeric_limits<double>::infinity();
    std::size_t nodes = 0;
    bool pass = false;
    std::map<std::string, double> constants;
};

/// Sample points x of a region together with their distance to the blowup set.
struct SampleRegion {
    std::string label;
    std::vector<Vec> points;
    std::vector<double> distance;
};

/// Points of B(center, radius) ∩ B_clip(0) with distance to the sphere
/// ∂B(center, radius) at least floor·radius: quasi-random interior points plus
/// layers at relative depths 10⁻¹, 10⁻², … toward the sphere.
inline SampleRegion ball_region(int n, const Vec& center, double radius, double clip, int count, double floor = 1e-3) {
    SampleRegion reg;
    reg.label = fmt::format("B({:.3g})∩B_{:.3g}(0), d>={:.0e}R", radius, clip, floor);
    auto keep = [&](const Vec& x) {
        const double d = radius - (x - center).norm();
        if (d >= floor * radius && x.norm() < clip) {
            reg.points.push_back(x);
            reg.distance.push_back(d);
        }
    };
    for (int s = 1; int(reg.points.size()) < count && s < 50 * count; ++s) {
        const Vec y = MetricFamily::halton_point(s, n, 1);
        if (y.norm() > 1.0) continue;
        keep(center + radius * y);
        keep(clip * y);
    }
    for (double depth = 1e-1; depth >= floor * 0.999; depth *= 0.1)
        for (int s = 1, used = 0; used < count / 8 && s < 50 * count; ++s) {
            const Vec y = MetricFamily::halton_point(s, n, 7);
            if (y.norm() > 1.0) continue;
            const Vec dir = clip * y - center;
            if (dir.norm() == 0) continue;
            ++used;
            keep(center + (radius * (1.0 - depth)) * dir / dir.norm());
        }
    if (reg.points.empty()) throw DomainError("ball_region: empty sample region");
    return reg;
}

/// Lw − c w^p evaluated with central differences of step 10⁻³·d.
inline BarrierCertificate certify_candidate(const OperatorSpec& op, const std::function<double(const Vec&)>& w,
                                            const SampleRegion& region, std::string label) {
    const Exponents e{op.n};
    BarrierCertificate cert;
    cert.label = std::move(label);
    cert.region = region.label;
    cert.nodes = region.points.size();
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < region.points.size(); ++i) {
        const Vec& x = region.points[i];
        const double h = 1e-3 * std::min(region.distance[i], std::max(x.norm(), region.distance[i]));
        const double Lw = apply_at(op, w, x, h);
        const double f = e.c() * std::pow(w(x), e.p());
        worst = std::min(worst, (f - Lw) / (std::abs(Lw) + f));
    }
    cert.margin = worst;
    cert.pass = worst > 0;
    return cert;
}

/// 2u_R on B_R(0).
inline BarrierCertificate certify_twice_ball(const OperatorSpec& op, double R, int samples = 2000) {
    const int n = op.n;
    const auto reg = ball_region(n, Vec::Zero(n), R, 2 * R, samples);
    auto cert = certify_candidate(op, [n, R](const Vec& x) { return 2.0 * exact_ball(n, R, x); }, reg, "2u_R");
    cert.constants["R"] = R;
    return cert;
}

/// Largest R = R_valid·2^{-j} such that 2u_R is certified at R and at every smaller
/// radius of the ladder.
inline BarrierCertificate search_twice_ball(const OperatorSpec& op, int levels = 16, int samples = 2000) {
    std::vector<BarrierCertificate> certs;
    for (int j = 0; j < levels; ++j) certs.push_back(certify_twice_ball(op, op.validity_radius * std::ldexp(1.0, -j), samples));
    std::optional<std::size_t> found;
    for (std::size_t j = certs.size(); j-- > 0;) {
        if (!certs[j].pass) break;
        found = j;
    }
    if (!found) {
        auto best = *std::max_element(certs.begin(), certs.end(),
                                      [](const auto& a, const auto& b) { return a.margin < b.margin; });
        best.pass = false;
        return best;
    }
    auto cert = certs[*found];
    cert.constants["R*"] = cert.constants["R"];
    cert.constants["C_L"] = op.structure_constant;
    return cert;
}

/// β of the corrector barrier u + A u^β + B u|x|²: (n−6)/(n−2) for n ≥ 6, else 0.
inline double corrector_exponent(int n) { return n >= 6 ? (n - 6.0) / (n - 2.0) : 0.0; }

/// Ball touching the origin: Ω = B_{1/2}(e_n/2), so that
/// u_* = u_{1/2}(x − e_n/2) in closed form.
struct TouchingBallFixture {
    int n = 3;
    double radius = 0.5;

    [[nodiscard]] Vec center() const {
        Vec c = Vec::Zero(n);
        c[n - 1] = radius;
        return c;
    }
    [[nodiscard]] double u_star(const Vec& x) const { return exact_ball(n, radius, x - center()); }
};

inline BarrierCertificate certify_corrector_barrier(const OperatorSpec& op, double A, double B, double R, int samples = 2000) {
    const TouchingBallFixture fx{op.n};
    const double beta = corrector_exponent(op.n);
    const auto reg = ball_region(op.n, fx.center(), fx.radius, R, samples);
    auto w = [&](const Vec& x) {
        const double u = fx.u_star(x);
        return u + A * std::pow(u, beta) + B * u * x.squaredNorm();
    };
    auto cert = certify_candidate(op, w, reg, "corrector");
    cert.constants = {{"A", A}, {"B", B}, {"R", R}, {"beta", beta}};
    return cert;
}

inline BarrierCertificate search_corrector_barrier(const OperatorSpec& op, int samples = 1500) {
    BarrierCertificate best;
    for (int j = 2; j <= 8; ++j)
        for (double A : {1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4})
            for (double B : {1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4}) {
                auto c = certify_corrector_barrier(op, A, B, std::ldexp(1.0, -j), samples);
                if (c.pass) return c;
                if (c.margin > best.margin) best = c;
            }
    return best;
}

/// u± = u_V ± (A₀u_V r² + A₁r^α + A₂ψ(r)φ₁) with α = (6−n)/2 and ψ chosen by
/// the regime: r^α (μ₁ > 2), −r^α ln r (μ₁ = 2), r^{μ₁−k} − r^α (μ₁ < 2).
struct ConeBarrier {
    Regime regime = Regime::alpha_two;
    double A0 = 1, A1 = 1, A2 = 1, r0 = 0.5;
    int sign = +1;

    /// ψ, r ψ' and r² ψ'' at r.
    [[nodiscard]] std::array<double, 3> psi(double r, double alpha, double mu_shift) const {
        const double L = std::log(r);
        const double ra = std::pow(r, alpha);
        switch (regime) {
            case Regime::alpha_two: return {ra, alpha * ra, alpha * (alpha - 1) * ra};
            case Regime::log:
                return {-ra * L, -ra * (alpha * L + 1), -ra * (alpha * (alpha - 1) * L + 2 * alpha - 1)};
            default: {
                const double rm = std::pow(r, mu_shift);
                return {rm - ra, mu_shift * rm - alpha * ra, mu_shift * (mu_shift - 1) * rm - alpha * (alpha - 1) * ra};
            }
        }
    }
};

/// Δu± − c(u±)^p from Δu_V = c u_V^p and −Δ_θφ₁ + P ρ^{−2}φ₁ = λ₁φ₁, on
/// r ∈ [r0·10⁻⁴, r0] × angular nodes outside the truncation layer.
inline BarrierCertificate certify_cone_barrier(const BlowupProfile& profile, const EigenResult& eig, const ConeBarrier& b,
                                               int radial = 48) {
    const int n = profile.dimension();
    const Exponents e{n};
    const double k = e.k(), c = e.c(), p = e.p(), P = e.potential();
    const double alpha = (6.0 - n) / 2.0, mu_shift = eig.mu - k;
    const auto rho = detail::effective_rho(profile);
    const auto& grid = profile.grid();
    const double layer = 10.0 * profile.truncation_layer();
    BarrierCertificate cert;
    cert.label = fmt::format("cone-{}{}", b.sign > 0 ? "upper" : "lower", "(" + to_string(b.regime) + ")");
    cert.region = fmt::format("V∩B_{:.3g}(0), r>={:.3g}", b.r0, b.r0 * 1e-4);
    cert.constants = {{"A0", b.A0}, {"A1", b.A1}, {"A2", b.A2}, {"r0", b.r0}};
    double worst = std::numeric_limits<double>::infinity();
    const double s = b.sign;
    for (int i = 0; i < radial; ++i) {
        const double r = b.r0 * std::pow(1e-4, double(i) / (radial - 1));
        const auto ps = b.psi(r, alpha, mu_shift);
        const double ra = std::pow(r, alpha);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (grid.is_blowup_node(j) || grid.blowup_distance(j) < layer) continue;
            const double g = profile.g()[j], phi = eig.phi[j];
            const double uV = std::pow(r, -k) * g;
            const double fV = c * std::pow(uV, p);
            const double corr = b.A0 * uV * r * r + b.A1 * ra + b.A2 * ps[0] * phi;
            const double eps = s * corr / uV;
            if (!(eps > -1)) {
                worst = -1;
                continue;
            }
            const double t_nonlinear = -fV * std::expm1(p * std::log1p(eps));
            const double t_quad = s * b.A0 * (fV * r * r + 4 * uV);
            const double t_radial = s * b.A1 * alpha * (alpha + n - 2) * ra / (r * r);
            const double radial_lap = (ps[2] + (n - 1) * ps[1]) / (r * r);
            const double t_phi = s * b.A2 * (radial_lap + ps[0] / (r * r) * (P / sqr(rho[j]) - eig.lambda)) * phi;
            const double D = t_nonlinear + t_quad + t_radial + t_phi;
            const double scale = std::abs(t_nonlinear) + std::abs(t_quad) + std::abs(t_radial) + std::abs(t_phi);
            // upper barrier: D ≤ 0; lower barrier: D ≥ 0
            worst = std::min(worst, -s * D / scale);
            ++cert.nodes;
        }
    }
    cert.margin = worst;
    cert.pass = worst > 0;
    return cert;
}

/// Log-grid search over (r0, A0, k1, k2) with A1 = k1 A0, A2 = k2 A0.
inline BarrierCertificate search_cone_barrier(const BlowupProfile& profile, const EigenResult& eig, int sign = +1) {
    BarrierCertificate best;
    const auto regime = regime_exponent(eig).regime;
    for (int j = 1; j <= 10; ++j)
        for (double A0 : {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2})
            for (double k1 : {1.0, 2.0, 5.0, 10.0, 100.0})
                for (double k2 : {1.0, 2.0, 5.0, 10.0, 100.0}) {
                    ConeBarrier b{regime, A0, k1 * A0, k2 * A0, std::ldexp(1.0, -j), sign};
                    auto c = certify_cone_barrier(profile, eig, b);
                    c.constants["k1"] = k1;
                    c.constants["k2"] = k2;
                    if (c.pass) return c;
                    if (c.margin > best.margin) best = c;
                }
    return best;
}

/// u+ of a cone barrier at an arbitrary point y of the cone, from spline
/// interpolation of the profile and eigenfunction.
class ConeBarrierField {
public:
    ConeBarrierField(const BlowupProfile& profile, const EigenResult& eig, ConeBarrier b)
        : n_(profile.dimension()), b_(b), mu_shift_(eig.mu - Exponents{profile.dimension()}.k()),
          g_(profile.grid().thetas(), profile.g()), phi_(eig.theta, eig.phi), hi_(profile.domain().hi) {}

    [[nodiscard]] double operator()(const Vec& y) const {
        const double r = y.norm();
        const double th = std::acos(std::clamp(y[n_ - 1] / r, -1.0, 1.0));
        if (!(th < hi_)) throw DomainError("cone barrier evaluated outside the cone");
        const double k = Exponents{n_}.k(), alpha = (6.0 - n_) / 2.0;
        const double uV = std::pow(r, -k) * g_(th);
        const auto ps = b_.psi(r, alpha, mu_shift_);
        return uV + b_.sign * (b_.A0 * uV * r * r + b_.A1 * std::pow(r, alpha) + b_.A2 * ps[0] * phi_(th));
    }

private:
    int n_;
    ConeBarrier b_;
    double mu_shift_;
    CubicSpline g_, phi_;
    double hi_;
};

/// The cone barrier pulled back by T, certified for L by finite differences
/// on points of the physical domain inside r_T.
inline BarrierCertificate certify_composed_barrier(const OperatorSpec& op, const DiffeoT& T, const ConeBarrierField& field,
                                                   const SampleRegion& region) {
    auto w = [&](const Vec& x) { return field(T.apply(x)); };
    auto cert = certify_candidate(op, w, region, "T-composed cone barrier");
    cert.constants["r_T"] = T.radius();
    return cert;
}

// ---------------------------------------------------------------------------
// Comparison with the tangent cone and rate fitting
// ---------------------------------------------------------------------------

/// u_V(Tx) and |x − vertex| at a node (r, θ) of a two-dimensional field.
struct ConeReference {
    std::string label;
    std::function<double(double, double)> value;
    std::function<double(double, double)> vertex_distance;
};

/// Exact cone, T = identity: u_V = r^{-k} g(θ).
inline ConeReference cone_reference(const BlowupProfile& profile) {
    const double k = Exponents{profile.dimension()}.k();
    auto spline = std::make_shared<CubicSpline>(profile.grid().thetas(), profile.g());
    return {"identity", [spline, k](double r, double th) { return std::pow(r, -k) * (*spline)(th); },
            [](double r, double) { return r; }};
}

/// u_V(Tx) = d_V(Tx)^{-k} for a half-space tangent cone with T built from the
/// boundary distance: equals d^{-k}; the vertex sits at R e_n for the centred
/// ball (axis column) and at 0 otherwise.
inline ConeReference halfspace_distance_reference(int n, std::function<double(double, double)> distance,
                                                  std::function<double(double, double)> vertex_distance) {
    const double k = Exponents{n}.k();
    return {"distance", [distance, k](double r, double th) { return std::pow(distance(r, th), -k); },
            std::move(vertex_distance)};
}

/// u_V(Tx) with a DiffeoT; x = r(sin θ e_1 + cos θ e_n).
inline ConeReference composed_reference(const BlowupProfile& profile, const DiffeoT& T) {
    const int n = profile.dimension();
    const double k = Exponents{n}.k();
    auto spline = std::make_shared<CubicSpline>(profile.grid().thetas(), profile.g());
    auto Tp = std::make_shared<DiffeoT>(T);
    return {"T",
            [spline, Tp, n, k](double r, double th) {
                Vec x = Vec::Zero(n);
                x[0] = r * std::sin(th);
                x[n - 1] = r * std::cos(th);
                const Vec y = Tp->apply(x);
                const double ry = y.norm();
                return std::pow(ry, -k) * (*spline)(std::acos(std::clamp(y[n - 1] / ry, -1.0, 1.0)));
            },
            [](double r, double) { return r; }};
}

struct RatioField {
    std::string label;
    std::vector<double> radius;  // distance to the vertex
    std::vector<double> value;   // |u/u_V(Tx) − 1|
};

inline constexpr double wall_exclusion = 0.05;

/// |u/u_V(Tx) − 1| on nodes with vertex distance in [4 r_min, r_max/4] and
/// d/|x − vertex| ≥ 0.05.
inline RatioField compare_to_cone(const SolutionField& u, const ConeReference& ref) {
    RatioField out;
    out.label = u.label + " vs " + ref.label;
    const double lo = u.reduction == Reduction::ball ? 0.0 : 4 * u.r_min;
    const double hi = 0.25 * u.r_max * (1 + 1e-12);
    for (std::size_t i = 0; i < u.rows; ++i)
        for (std::size_t j = 0; j < u.cols; ++j) {
            const auto q = u.index(i, j);
            if (u.fixed[q]) continue;
            const double rv = ref.vertex_distance(u.r[i], u.theta[q]);
            if (rv < lo * (1 - 1e-12) || rv > hi || rv <= 0) continue;
            if (u.d[q] < wall_exclusion * rv) continue;
            out.radius.push_back(rv);
            out.value.push_back(std::abs(u.u[q] / ref.value(u.r[i], u.theta[q]) - 1.0));
        }
    return out;
}

struct AnnulusRow {
    double lo = 0, hi = 0;
    double radius = 0;   // location of the maximum
    double max_ratio = 0;
    std::size_t count = 0;
};

struct RateFit {
    double alpha = 0, C = 0, r2 = 0, rms = 0;
    double log_alpha = 0, log_C = 0, log_rms = 0;  // model C r^α |ln r|
    bool log_preferred = false;
    double r_lo = 0, r_hi = 0;
    std::vector<AnnulusRow> table;
};

/// Least-squares fit of log(max over each dyadic annulus of [r_lo, r_hi])
/// against log r, alongside the model C r^α |ln r|.
inline RateFit fit_rate(const RatioField& f, double r_lo, double r_hi) {
    if (!(r_lo > 0 && r_hi > r_lo)) throw DomainError("fit_rate: bad window");
    const int count = int(std::lround(std::log2(r_hi / r_lo)));
    if (count < 4) throw DomainError("fit_rate: window must contain at least four dyadic annuli");
    RateFit fit;
    fit.r_lo = r_lo;
    fit.r_hi = r_hi;
    std::vector<double> x, y, ylog;
    for (int a = 0; a < count; ++a) {
        AnnulusRow row{r_lo * std::ldexp(1.0, a), r_lo * std::ldexp(1.0, a + 1)};
        for (std::size_t q = 0; q < f.radius.size(); ++q) {
            const double r = f.radius[q];
            if (r < row.lo * (1 - 1e-12) || r > row.hi * (1 + 1e-12)) continue;
            ++row.count;
            if (f.value[q] > row.max_ratio) {
                row.max_ratio = f.value[q];
                row.radius = r;
            }
        }
        if (row.count == 0 || !(row.max_ratio > 0))
            throw DomainError(fmt::format("fit_rate: annulus [{:.3g}, {:.3g}] is empty", row.lo, row.hi));
        fit.table.push_back(row);
        x.push_back(std::log(row.radius));
        y.push_back(std::log(row.max_ratio));
        ylog.push_back(std::log(row.max_ratio) - std::log(std::abs(std::log(row.radius))));
    }
    const auto power = fit_line(x, y);
    const auto logm = fit_line(x, ylog);
    fit.alpha = power.slope;
    fit.C = std::exp(power.intercept);
    fit.r2 = power.r2;
    fit.rms = power.rms;
    fit.log_alpha = logm.slope;
    fit.log_C = std::exp(logm.intercept);
    fit.log_rms = logm.rms;
    fit.log_preferred = logm.rms < power.rms;
    return fit;
}

// ---------------------------------------------------------------------------
// Theorem rows and reports
// ---------------------------------------------------------------------------

struct TheoremCase {
    std::string label;
    std::string theorem;          // e.g. "cone regime", "curved boundary"
    double predicted = 2.0;
    std::string predicted_form;
    std::optional<double> sharp_upper;  // asserted only where the rate is sharp
    bool outside_theorem = false;
};

struct TheoremRow {
    TheoremCase spec;
    RateFit fit;
    double measured = 0;
    bool pass = false;
    std::string note;
};

inline constexpr double rate_slack = 0.2;

/// Predicted exponent from the spectral regime of an exact tangent cone.
inline TheoremCase cone_theorem_case(std::string label, const EigenResult& eig) {
    const auto form = regime_exponent(eig);
    return {std::move(label), "cone regime", form.exponent, form.describe(), std::nullopt, false};
}

/// Curved boundary through the vertex: rate 1, and not better in general.
inline TheoremCase curved_theorem_case(std::string label) {
    return {std::move(label), "curved boundary", 1.0, "C|x|", 1.3, false};
}

inline TheoremRow verify_theorem(const TheoremCase& spec, const RateFit& fit) {
    TheoremRow row;
    row.spec = spec;
    row.fit = fit;
    row.measured = spec.predicted_form.find("ln") != std::string::npos && fit.log_preferred ? fit.log_alpha : fit.alpha;
    row.pass = row.measured >= spec.predicted - rate_slack;
    if (spec.sharp_upper && row.measured > *spec.sharp_upper) {
        row.pass = false;
        row.note = fmt::format("decay faster than the sharp rate (> {:g})", *spec.sharp_upper);
    }
    if (spec.outside_theorem) row.note += (row.note.empty() ? "" : "; ") + std::string("outside theorem hypotheses");
    return row;
}

inline void write_rate_csv(const RateFit& fit, std::ostream& os) {
    os << "annulus_lo,annulus_hi,radius,max_ratio,count\n";
    for (const auto& a : fit.table)
        os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{}\n", a.lo, a.hi, a.radius, a.max_ratio, a.count);
}

inline void write_markdown_report(const std::vector<TheoremRow>& rows, const std::vector<BarrierCertificate>& certs,
                                  std::ostream& os) {
    os << "# Verification report\n\n## Rates\n\n";
    os << "| case | statement | predicted | measured | R^2 | log model | result | note |\n";
    os << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows)
        os << fmt::format("| {} | {} | {} (>= {:.2f}) | {:.4f} | {:.5f} | {} | {} | {} |\n", r.spec.label, r.spec.theorem,
                          r.spec.predicted_form, r.spec.predicted - rate_slack, r.measured, r.fit.r2,
                          r.fit.log_preferred ? "preferred" : "-", r.pass ? "PASS" : "FAIL", r.note);
    if (!certs.empty()) {
        os << "\n## Barrier certificates\n\n| barrier | region | margin | nodes | constants | result |\n";
        os << "|---|---|---|---|---|---|\n";
        for (const auto& c : certs) {
            std::string k;
            for (const auto& [name, v] : c.constants) k += fmt::format("{}={:.4g} ", name, v);
            os << fmt::format("| {} | {} | {:.3e} | {} | {} | {} |\n", c.label, c.region, c.margin, c.nodes, k,
                              c.pass ? "PASS" : "FAIL");
        }
    }
}

/// Log–log plot of annulus maxima with the fitted line.
inline void write_svg_plot(const RateFit& fit, const std::string& title, std::ostream& os) {
    const double W = 480, H = 360, m = 50;
    double xmin = std::log10(fit.r_lo), xmax = std::log10(fit.r_hi);
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& a : fit.table) {
        ymin = std::min(ymin, std::log10(a.max_ratio));
        ymax = std::max(ymax, std::log10(a.max_ratio));
    }
    ymin -= 0.5;
    ymax += 0.5;
    auto X = [&](double lx) { return m + (lx - xmin) / (xmax - xmin) * (W - 2 * m); };
    auto Y = [&](double ly) { return H - m - (ly - ymin) / (ymax - ymin) * (H - 2 * m); };
    os << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n", W, H);
    os << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", m, m,
                      W - 2 * m, H - 2 * m);
    os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\">{} (slope {:.3f})</text>\n", m, m - 15, title, fit.alpha);
    os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">log10 r</text>\n", W / 2, H - 15);
    os << fmt::format("<text x=\"5\" y=\"{}\" font-size=\"12\">log10 max ratio</text>\n", m - 30);
    const double l0 = std::log10(fit.C) + fit.alpha * xmin, l1 = std::log10(fit.C) + fit.alpha * xmax;
    os << fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"steelblue\"/>\n", X(xmin),
                      Y(l0), X(xmax), Y(l1));
    for (const auto& a : fit.table)
        os << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"crimson\"/>\n", X(std::log10(a.radius)),
                          Y(std::log10(a.max_ratio)));
    os << "</svg>\n";
}

}  // namespace lnb
