/// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lnb/analysis.hpp"
#include "lnb/blowup_solver.hpp"
#include "lnb/cap_profile.hpp"
#include "lnb/geometry.hpp"
#include "lnb/spectral.hpp"

using namespace lnb;

namespace {

namespace tol {
constexpr double profile_relative = 1e-3;
constexpr double profile_wall_margin = 0.1;
constexpr double eigen_relative = 1e-3;
constexpr double mu_absolute = 1e-3;
constexpr double two_sphere_floor = 0.75;
constexpr double nested_gap = 1e-6;
constexpr double complement_ratio = 0.25;
constexpr double ball_relative = 1e-3;
constexpr double ball_inner_radius = 0.7;
constexpr double ball_rate_center = 1.0;
constexpr double ball_rate_band = 0.1;
constexpr double ball_rate_sharp = 1.3;
constexpr double regime_rate_n6 = 1.8;
constexpr double regime_rate_n3 = 1.7;
constexpr double monotone_slack = 1e-10;
constexpr double increment_decay = 0.5;
constexpr double jacobian_entry = 1e-6;
constexpr double displacement_slope = 1.9;
constexpr double bracket_relative = 1e-3;
}  // namespace tol

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

BlowupProfile profile(const SphericalDomain1D& dom, int n, int intervals) {
    TruncationSchedule s;
    s.interior_tolerance = 1e-8;
    GridSpec g;
    g.intervals = intervals;
    return solve_profile(dom, n, s, g);
}

/// Cap cone of half-angle π/3 under the metric (1 + 0.3|x|²)^{4/(n−2)}δ, solved on
/// [2^-9, r_max] with a fixed log-radial spacing; shared by criteria 8, 10 and 12.
const SolutionField& theorem_field(int n, double r_max = 1.0) {
    static std::map<std::pair<int, double>, SolutionField> cache;
    const auto key = std::make_pair(n, r_max);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    SolveConfig c;
    c.strict_localization = false;
    c.radial_intervals = int(std::lround(128 * std::log2(r_max / std::ldexp(1.0, -9)) / 9.0));
    c.angular.intervals = 400;
    c.levels = {1e2, 1e3, 1e4};
    const auto dom = DomainSpec2D::cap_cone(n, pi / 3, std::ldexp(1.0, -9), r_max);
    const auto op = conformal_operator(MetricFamily::conformal_quadratic(n, 0.3));
    return cache.emplace(key, solve(dom, op, c)).first->second;
}

Outcome check_profile_closed_form() {
    Outcome o;
    for (int n : {3, 6}) {
        const auto p = profile(SphericalDomain1D::cap(pi / 2), n, 3200);
        const double k = Exponents{n}.k();
        double worst = 0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double th = p.grid().theta(j);
            if (th <= pi / 2 - tol::profile_wall_margin) worst = std::max(worst, std::abs(p.g()[j] * std::pow(std::cos(th), k) - 1));
        }
        o.require(worst <= tol::profile_relative, fmt::format("n={} max rel err {:.2e}", n, worst));
    }
    return o;
}

Outcome check_eigen_closed_form() {
    Outcome o;
    for (int n : {3, 4, 6}) {
        const auto e = first_eigenpair(profile(SphericalDomain1D::cap(pi / 2), n, 3200));
        const double exact = (n + 2) * (3 * n - 2) / 4.0;
        const double rel = std::abs(e.lambda / exact - 1);
        o.require(rel <= tol::eigen_relative && std::abs(e.mu - n) <= tol::mu_absolute,
                  fmt::format("n={} lambda {:.6f} (exact {:g}), mu {:.6f}", n, e.lambda, exact, e.mu));
    }
    return o;
}

Outcome check_two_sphere_lower_bound() {
    Outcome o;
    const std::vector<SphericalDomain1D> fixtures{SphericalDomain1D::cap(0.5),       SphericalDomain1D::cap(1.0),
                                                  SphericalDomain1D::cap(2.0),       SphericalDomain1D::cap(2.8),
                                                  SphericalDomain1D::band(0.5, 2.0), SphericalDomain1D::cap_complement(0.5)};
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& d : fixtures) margin = std::min(margin, first_eigenpair(profile(d, 3, 1600)).lambda - tol::two_sphere_floor);
    o.require(margin > 0, fmt::format("{} fixtures, min lambda - 3/4 = {:.4f}", fixtures.size(), margin));
    return o;
}

Outcome check_nested_caps() {
    Outcome o;
    std::vector<double> lambda;
    for (double t : {0.6, 0.9, 1.2, 1.5}) lambda.push_back(first_eigenpair(profile(SphericalDomain1D::cap(t), 3, 1600)).lambda);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < lambda.size(); ++i) gap = std::min(gap, lambda[i - 1] - lambda[i]);
    o.require(gap > tol::nested_gap,
              fmt::format("lambda {:.4f} > {:.4f} > {:.4f} > {:.4f}, min gap {:.3e}", lambda[0], lambda[1], lambda[2], lambda[3], gap));
    return o;
}

Outcome check_cap_complement_trend() {
    Outcome o;
    std::vector<double> lambda;
    for (double r : {0.4, 0.2, 0.1, 0.05})
        lambda.push_back(first_eigenpair(profile(SphericalDomain1D::cap_complement(r), 4, 1600)).lambda);
    bool decreasing = true;
    for (std::size_t i = 1; i < lambda.size(); ++i) decreasing = decreasing && lambda[i] < lambda[i - 1];
    o.require(decreasing, fmt::format("lambda {:.4f}, {:.4f}, {:.4f}, {:.4f} decreasing", lambda[0], lambda[1], lambda[2], lambda[3]));
    o.require(lambda.back() < tol::complement_ratio * lambda.front(),
              fmt::format("lambda(0.05)/lambda(0.4) = {:.3f} < {:g}", lambda.back() / lambda.front(), tol::complement_ratio));
    return o;
}

Outcome check_indicial_exponent() {
    Outcome o;
    std::vector<SphericalDomain1D> fixtures{SphericalDomain1D::band(0.5, 2.0)};
    for (double t : {0.5, 0.6, 0.9, 1.0, 1.2, 1.5, pi / 3, pi / 2, 2.0, 2.8}) fixtures.push_back(SphericalDomain1D::cap(t));
    for (double r : {0.05, 0.1, 0.2, 0.4, 0.5}) fixtures.push_back(SphericalDomain1D::cap_complement(r));
    double worst = std::numeric_limits<double>::infinity();
    int count = 0;
    for (int n : {3, 4, 5, 6})
        for (const auto& d : fixtures) {
            worst = std::min(worst, first_eigenpair(profile(d, n, 800)).mu - std::max((n - 2) / 2.0, 1.0));
            ++count;
        }
    for (double a : {pi / 2, pi, 1.5 * pi}) {
        worst = std::min(worst, first_eigenpair(profile(SphericalDomain1D::arc(a), 3, 800)).mu - 1.0);
        ++count;
    }
    o.require(worst > 0, fmt::format("{} fixtures, min mu - max((n-2)/2, 1) = {:.4f}", count, worst));
    double convex = std::numeric_limits<double>::infinity();
    for (int n : {3, 4, 5})
        for (double t : {0.5, 1.0, pi / 3, pi / 2}) convex = std::min(convex, first_eigenpair(profile(SphericalDomain1D::cap(t), n, 800)).mu);
    o.require(convex > 2, fmt::format("convex caps min mu = {:.4f}", convex));
    return o;
}

Outcome check_ball_exact() {
    Outcome o;
    for (int n : {3, 6}) {
        SolveConfig c;
        c.radial.intervals = 2000;
        const auto f = solve(DomainSpec2D::centered_ball(n, 1.0), OperatorSpec::laplacian(n), c);
        const double k = Exponents{n}.k();
        double err = 0;
        RatioField ratio;
        for (std::size_t i = 0; i < f.rows; ++i)
            for (std::size_t j = 0; j < f.cols; ++j) {
                const auto q = f.index(i, j);
                if (f.r[i] <= tol::ball_inner_radius) err = std::max(err, std::abs(f.u[q] / exact_ball(n, 1.0, f.r[i]) - 1));
                if (f.fixed[q]) continue;
                ratio.radius.push_back(f.d[q]);
                ratio.value.push_back(std::abs(std::pow(f.d[q], k) * f.u[q] - 1));
            }
        const auto fit = fit_rate(ratio, std::ldexp(1.0, -9), std::ldexp(1.0, -3));
        o.require(err <= tol::ball_relative, fmt::format("n={} interior rel err {:.2e}", n, err));
        o.require(std::abs(fit.alpha - tol::ball_rate_center) <= tol::ball_rate_band && fit.alpha <= tol::ball_rate_sharp,
                  fmt::format("n={} rate {:.4f}", n, fit.alpha));
    }
    return o;
}

Outcome check_regime_reproduction() {
    Outcome o;
    for (int n : {6, 3}) {
        const auto& f = theorem_field(n);
        const auto ratio = compare_to_cone(f, cone_reference(*f.reference));
        const auto fit = fit_rate(ratio, std::ldexp(1.0, -7), std::ldexp(1.0, -2));
        const double floor = n == 6 ? tol::regime_rate_n6 : tol::regime_rate_n3;
        o.require(fit.alpha >= floor, fmt::format("n={} rate {:.4f} >= {:g} (R^2 {:.4f})", n, fit.alpha, floor, fit.r2));
    }
    return o;
}

Outcome check_barrier_certificates() {
    Outcome o;
    for (double C : {0.0, 0.5, 2.0}) {
        const auto op = C == 0 ? OperatorSpec::laplacian(3) : saturating_operator(3, C);
        const auto cert = search_twice_ball(op);
        o.require(cert.pass, fmt::format("2u_R C_L={:g} R*={:.4g} margin {:.3f}", C,
                                         cert.constants.count("R*") ? cert.constants.at("R*") : 0.0, cert.margin));
    }
    for (int n : {3, 6}) {
        const auto cert = search_corrector_barrier(OperatorSpec::laplacian(n));
        o.require(cert.pass, fmt::format("corrector n={} margin {:.2e}", n, cert.margin));
    }
    const auto p = profile(SphericalDomain1D::cap(pi / 2), 3, 800);
    const auto e = first_eigenpair(p);
    for (int sign : {+1, -1}) {
        const auto cert = search_cone_barrier(p, e, sign);
        o.require(cert.pass, fmt::format("{} margin {:.3f}", cert.label, cert.margin));
    }
    return o;
}

Outcome check_monotone_scheme() {
    Outcome o;
    SolveConfig c;
    c.radial.intervals = 2000;
    c.levels = {1e2, 1e3, 1e4};
    const auto ball = solve(DomainSpec2D::centered_ball(3, 1.0), OperatorSpec::laplacian(3), c);
    for (const auto* f : {&ball, &theorem_field(3)}) {
        const auto m = monotone_check(*f, tol::monotone_slack);
        const bool geometric = m.increments.size() == 2 && m.increments[0] > 0 && m.increments[1] > 0 &&
                               m.increments[1] <= tol::increment_decay * m.increments[0];
        o.require(m.monotone && geometric, fmt::format("{} increments {:.2e}, {:.2e}", f->label, m.increments.at(0),
                                                       m.increments.at(1)));
    }
    const auto g = MetricFamily::conformal_quadratic(3, 0.3);
    const auto b = curvature_lower_bound(theorem_field(3), g);
    o.require(b.holds, fmt::format("curvature bound on {} nodes, min u/bound {:.3f}", b.nodes, b.worst_ratio));
    return o;
}

Outcome check_t_map() {
    Outcome o;
    const std::vector<std::vector<GraphSurface>> fixtures{
        {GraphSurface::sphere(3, 1.0)},
        {GraphSurface::sphere(4, 2.0)},
        {GraphSurface::paraboloid(3)},
        {GraphSurface::paraboloid(4, 0.5)},
    };
    double jac = 0, slope = std::numeric_limits<double>::infinity();
    for (const auto& s : fixtures) {
        const auto T = DiffeoT::build(s);
        const int n = s.front().dimension();
        jac = std::max(jac, (T.jacobian(Vec::Zero(n)) - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
        for (int a = 1; a <= 3; ++a) {
            const Vec dir = MetricFamily::halton_point(a, n, 3) + Vec::Constant(n, 0.1);
            slope = std::min(slope, displacement_slope(T, dir, 1e-3, 0.5 * T.radius()).slope);
        }
    }
    o.require(jac <= tol::jacobian_entry, fmt::format("max |JT(0) - I| {:.2e}", jac));
    o.require(slope >= tol::displacement_slope, fmt::format("min displacement slope {:.4f}", slope));
    return o;
}

Outcome check_localization() {
    Outcome o;
    for (int n : {6, 3}) {
        const double w = bracket_width(theorem_field(n));
        o.require(w < tol::bracket_relative, fmt::format("n={} bracket width {:.2e}", n, w));
        const double r_report = 0.125;
        const double half = bracket_width(theorem_field(n, 0.5), r_report);
        const double full = bracket_width(theorem_field(n, 1.0), r_report);
        o.require(full < half, fmt::format("n={} width at r<={:g}: {:.2e} (r_max 0.5) -> {:.2e} (r_max 1)", n, r_report, half, full));
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 12));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"profile closed form", check_profile_closed_form},
        {"eigenvalue closed form", check_eigen_closed_form},
        {"spectral lower bound on S^2", check_two_sphere_lower_bound},
        {"nested-cap monotonicity", check_nested_caps},
        {"cap-complement trend (n=4)", check_cap_complement_trend},
        {"indicial exponent bounds", check_indicial_exponent},
        {"ball exact solution and rate", check_ball_exact},
        {"perturbed-cone regime rates", check_regime_reproduction},
        {"barrier certificates", check_barrier_certificates},
        {"monotone scheme and curvature bound", check_monotone_scheme},
        {"T-map properties", check_t_map},
        {"outer-data localization", check_localization},
    };
    const std::set<int> selected(only.begin(), only.end());
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && !selected.count(int(i) + 1)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << fmt::format("{} {:>2} {}: {} ({:.1f} s)", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail, secs)
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
