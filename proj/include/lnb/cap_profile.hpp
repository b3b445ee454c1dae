#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lnb/common.hpp"
#include "lnb/grid.hpp"
#include "lnb/tridiag.hpp"

namespace lnb {

/// Truncation levels for the blowup endpoints. Either an explicit increasing
/// list, or geometric growth from `start` by `factor` until the interior
/// profile stops changing.
struct TruncationSchedule {
    std::vector<double> levels;  // explicit; overrides the geometric rule when non-empty
    double start = 100.0;
    double factor = 2.0;
    double max_level = 1e300;
    double interior_tolerance = 1e-8;

    void validate() const {
        for (std::size_t i = 1; i < levels.size(); ++i)
            if (!(levels[i] > levels[i - 1])) throw ConfigError("truncation schedule must be strictly increasing");
        if (levels.empty() && (!(start > 0) || !(factor > 1) || !(max_level > start)))
            throw ConfigError("truncation schedule needs start > 0, factor > 1, max_level > start");
        if (!(interior_tolerance > 0)) throw ConfigError("interior tolerance must be positive");
    }
};

struct NewtonOptions {
    int max_iterations = 200;
    double tolerance = 1e-13;  // on the max relative update
};

class BlowupProfile {
public:
    BlowupProfile() = default;
    BlowupProfile(AngularGrid grid, std::vector<double> g, double level, double residual)
        : grid_(std::move(grid)), g_(std::move(g)), level_(level), residual_(residual) {
        derive();
    }

    [[nodiscard]] const AngularGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const SphericalDomain1D& domain() const noexcept { return grid_.domain(); }
    [[nodiscard]] int dimension() const noexcept { return grid_.dimension(); }
    [[nodiscard]] std::size_t size() const noexcept { return g_.size(); }
    [[nodiscard]] const std::vector<double>& g() const noexcept { return g_; }
    [[nodiscard]] const std::vector<double>& rho() const noexcept { return rho_; }
    [[nodiscard]] const std::vector<double>& dg() const noexcept { return dg_; }
    [[nodiscard]] const std::vector<double>& d2g() const noexcept { return d2g_; }
    [[nodiscard]] double level() const noexcept { return level_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

    /// Width of the layer next to a blowup endpoint in which the finite level
    /// M visibly bends the profile: the distance at which d^{-k} = M.
    [[nodiscard]] double truncation_layer() const {
        return std::pow(level_, -1.0 / Exponents{dimension()}.k());
    }

    [[nodiscard]] double interpolate(double theta) const {
        if (spline_.nodes().empty()) spline_ = CubicSpline(grid_.thetas(), g_);
        return spline_(theta);
    }

    std::vector<double> level_history;
    std::vector<double> interior_changes;

private:
    void derive() {
        const std::size_t m = g_.size();
        const double k = Exponents{dimension()}.k();
        rho_.resize(m);
        for (std::size_t j = 0; j < m; ++j) rho_[j] = std::pow(g_[j], -1.0 / k);
        dg_.assign(m, 0.0);
        d2g_.assign(m, 0.0);
        for (std::size_t j = 1; j + 1 < m; ++j) {
            const double h0 = grid_.spacing(j - 1), h1 = grid_.spacing(j);
            dg_[j] = (-h1 / (h0 * (h0 + h1))) * g_[j - 1] + ((h1 - h0) / (h0 * h1)) * g_[j] +
                     (h0 / (h1 * (h0 + h1))) * g_[j + 1];
            d2g_[j] = 2.0 * (g_[j - 1] / (h0 * (h0 + h1)) - g_[j] / (h0 * h1) + g_[j + 1] / (h1 * (h0 + h1)));
        }
        if (m >= 2) {
            dg_[0] = (g_[1] - g_[0]) / grid_.spacing(0);
            dg_[m - 1] = (g_[m - 1] - g_[m - 2]) / grid_.spacing(m - 2);
            d2g_[0] = d2g_[1];
            d2g_[m - 1] = d2g_[m - 2];
        }
    }

    AngularGrid grid_;
    std::vector<double> g_, rho_, dg_, d2g_;
    double level_ = 0.0;
    double residual_ = 0.0;
    mutable CubicSpline spline_;
};

namespace detail {

/// Finite-volume residual of (w g')' + σk²w g − c w g^p at every node, with
/// σ = −1 on the polar sphere and +1 on a circle arc. Blowup nodes carry the
/// Dirichlet row g − M.
inline void profile_residual(const AngularGrid& grid, std::span<const double> g, double level,
                             std::vector<double>& res, Tridiagonal* jac) {
    const Exponents e{grid.dimension()};
    const double sigma = grid.domain().geometry == SphereGeometry::polar_sphere ? -1.0 : 1.0;
    const double k2 = e.k() * e.k(), c = e.c(), p = e.p();
    const std::size_t m = grid.size();
    res.assign(m, 0.0);
    if (jac) *jac = Tridiagonal(m);
    for (std::size_t j = 0; j < m; ++j) {
        if (grid.is_blowup_node(j)) {
            res[j] = g[j] - level;
            if (jac) jac->diag[j] = 1.0;
            continue;
        }
        const double V = grid.volume(j);
        double r = (sigma * k2 - c * std::pow(g[j], p - 1)) * V * g[j];
        double dd = (sigma * k2 - c * p * std::pow(g[j], p - 1)) * V;
        if (j + 1 < m) {
            r += grid.face(j) * (g[j + 1] - g[j]);
            dd -= grid.face(j);
            if (jac) jac->upper[j] = grid.face(j);
        }
        if (j > 0) {
            r -= grid.face(j - 1) * (g[j] - g[j - 1]);
            dd -= grid.face(j - 1);
            if (jac) jac->lower[j] = grid.face(j - 1);
        }
        res[j] = r;
        if (jac) jac->diag[j] = dd;
    }
}

}  // namespace detail

/// Initial guess min(M, 2^k d^{-k}) with d the distance to the nearest
/// blowup endpoint.
inline std::vector<double> profile_supersolution_guess(const AngularGrid& grid, double level) {
    const double k = Exponents{grid.dimension()}.k();
    std::vector<double> g(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double d = grid.blowup_distance(j);
        g[j] = d > 0 ? std::min(level, std::pow(2.0, k) * std::pow(d, -k)) : level;
    }
    return g;
}

/// Damped Newton solve of the truncated profile problem at one level M.
inline std::vector<double> solve_profile_at_level(const AngularGrid& grid, double level, std::vector<double> g,
                                                  const NewtonOptions& opt = {}) {
    const std::size_t m = grid.size();
    std::vector<double> res, trial_res;
    Tridiagonal jac;
    std::vector<double> trace;
    auto merit = [&](std::span<const double> v, const std::vector<double>& r) {
        const Exponents e{grid.dimension()};
        double worst = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (grid.is_blowup_node(j)) {
                worst = std::max(worst, std::abs(r[j]) / level);
                continue;
            }
            double scale = grid.volume(j) * (e.c() * std::pow(v[j], e.p()) + e.k() * e.k() * v[j]);
            if (j + 1 < m) scale += grid.face(j) * (std::abs(v[j + 1]) + std::abs(v[j]));
            if (j > 0) scale += grid.face(j - 1) * (std::abs(v[j - 1]) + std::abs(v[j]));
            worst = std::max(worst, std::abs(r[j]) / scale);
        }
        return worst;
    };
    detail::profile_residual(grid, g, level, res, &jac);
    double current = merit(g, res);
    trace.push_back(current);
    for (int it = 0; it < opt.max_iterations; ++it) {
        auto step = solve_tridiagonal(jac, res);
        double update = 0;
        for (std::size_t j = 0; j < m; ++j) update = std::max(update, std::abs(step[j]) / std::abs(g[j]));
        double lambda = 1.0;
        std::vector<double> trial(m);
        bool accepted = false;
        for (int half = 0; half < 60; ++half, lambda *= 0.5) {
            bool positive = true;
            for (std::size_t j = 0; j < m; ++j) {
                trial[j] = g[j] - lambda * step[j];
                if (!(trial[j] > 0)) positive = false;
            }
            if (!positive) continue;
            detail::profile_residual(grid, trial, level, trial_res, nullptr);
            const double next = merit(trial, trial_res);
            if (next < current || half >= 30) {
                accepted = true;
                current = next;
                break;
            }
        }
        if (!accepted) throw ConvergenceError("profile Newton: no admissible damped step", trace);
        g.swap(trial);
        trace.push_back(current);
        if (lambda * update < opt.tolerance || current < 1e-15) return g;
        detail::profile_residual(grid, g, level, res, &jac);
    }
    throw ConvergenceError("profile Newton: iteration limit reached", trace);
}

/// Nodes whose distance to the blowup set is at least min(0.1, dmax/4).
inline std::vector<std::size_t> interior_nodes(const AngularGrid& grid) {
    double dmax = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) dmax = std::max(dmax, grid.blowup_distance(j));
    const double cut = std::min(0.1, 0.25 * dmax);
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (grid.blowup_distance(j) >= cut) out.push_back(j);
    return out;
}

/// max_j |R_j|/V_j · d_j^{(n+2)/2+2} over non-blowup nodes.
inline double scaled_residual(const AngularGrid& grid, std::span<const double> g, double level) {
    std::vector<double> res;
    detail::profile_residual(grid, g, level, res, nullptr);
    const double expo = 0.5 * (grid.dimension() + 2) + 2.0;
    double worst = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (grid.is_blowup_node(j)) continue;
        worst = std::max(worst, std::abs(res[j]) / grid.volume(j) * std::pow(grid.blowup_distance(j), expo));
    }
    return worst;
}

inline BlowupProfile solve_profile(const AngularGrid& grid, const TruncationSchedule& schedule,
                                   const NewtonOptions& newton = {}) {
    schedule.validate();
    const auto inner = interior_nodes(grid);
    std::vector<double> prev, g;
    std::vector<double> history, changes;
    double level = schedule.levels.empty() ? schedule.start : schedule.levels.front();
    for (std::size_t step = 0;; ++step) {
        g = solve_profile_at_level(grid, level, profile_supersolution_guess(grid, level), newton);
        history.push_back(level);
        if (!prev.empty()) {
            double change = 0;
            for (std::size_t j : inner) change = std::max(change, std::abs(g[j] - prev[j]) / std::abs(g[j]));
            changes.push_back(change);
            if (change < schedule.interior_tolerance) break;
        }
        prev = g;
        if (!schedule.levels.empty()) {
            if (step + 1 >= schedule.levels.size()) break;
            level = schedule.levels[step + 1];
        } else {
            level *= schedule.factor;
            if (level > schedule.max_level)
                throw ConvergenceError("truncation schedule exhausted before interior convergence", changes);
        }
    }
    BlowupProfile out(grid, g, level, scaled_residual(grid, g, level));
    out.level_history = std::move(history);
    out.interior_changes = std::move(changes);
    return out;
}

inline BlowupProfile solve_profile(const SphericalDomain1D& dom, int n, const TruncationSchedule& schedule,
                                   const GridSpec& spec, const NewtonOptions& newton = {}) {
    return solve_profile(AngularGrid(dom, spec, n), schedule, newton);
}

/// Profile on a fixed grid at one truncation level (used to build references
/// that match a 2-D discretisation node for node).
inline BlowupProfile solve_profile_fixed(const AngularGrid& grid, double level, const NewtonOptions& newton = {}) {
    auto g = solve_profile_at_level(grid, level, profile_supersolution_guess(grid, level), newton);
    const double res = scaled_residual(grid, g, level);
    BlowupProfile out(grid, std::move(g), level, res);
    out.level_history = {level};
    return out;
}

/// u_V(r, θ) = r^{-k} g(θ).
inline double cone_solution(const BlowupProfile& profile, double r, double theta) {
    if (!(r > 0)) throw DomainError("cone_solution: radius must be positive");
    const auto& grid = profile.grid();
    const auto& dom = grid.domain();
    if (theta < dom.lo || theta > dom.hi) throw DomainError("cone_solution: angle outside the domain");
    const std::size_t m = grid.size();
    if ((dom.lo_end == EndCondition::blowup && theta - dom.lo < grid.spacing(0)) ||
        (dom.hi_end == EndCondition::blowup && dom.hi - theta < grid.spacing(m - 2)))
        throw DomainError("cone_solution: angle within one cell of a blowup endpoint");
    return std::pow(r, -Exponents{profile.dimension()}.k()) * profile.interpolate(theta);
}

struct RhoBounds {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t nodes = 0;
};

/// min and max of ρ/d_Σ over nodes with d_Σ ≤ 0.2, excluding the layer of
/// width 10·M^{-1/k} next to the wall where the truncation dominates.
inline RhoBounds check_rho_bounds(const BlowupProfile& profile, double band = 0.2) {
    const auto& grid = profile.grid();
    const double layer = 10.0 * profile.truncation_layer();
    RhoBounds b{std::numeric_limits<double>::infinity(), 0.0, 0};
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double d = grid.blowup_distance(j);
        if (grid.is_blowup_node(j) || d > band || d < layer) continue;
        const double ratio = profile.rho()[j] / d;
        b.lower = std::min(b.lower, ratio);
        b.upper = std::max(b.upper, ratio);
        ++b.nodes;
    }
    if (b.nodes == 0) throw CheckFailure("rho bounds: no nodes in the boundary band");
    if (!(b.lower >= 1e-6) || !(b.upper <= 1e6) || !std::isfinite(b.upper))
        throw CheckFailure("rho bounds violated: ratio range [" + std::to_string(b.lower) + ", " +
                           std::to_string(b.upper) + "]");
    return b;
}

// ---------------------------------------------------------------------------
// CSV: one '#'-prefixed JSON metadata line, then theta,g,rho rows.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SphericalDomain1D& d) {
    return {{"geometry", to_string(d.geometry)}, {"lo", d.lo}, {"hi", d.hi}, {"lo_end", to_string(d.lo_end)},
            {"hi_end", to_string(d.hi_end)}, {"label", d.label}};
}

inline SphericalDomain1D domain_from_json(const nlohmann::json& j) {
    SphericalDomain1D d;
    d.geometry = j.at("geometry") == "circle-arc" ? SphereGeometry::circle_arc : SphereGeometry::polar_sphere;
    d.lo = j.at("lo");
    d.hi = j.at("hi");
    d.lo_end = j.at("lo_end") == "blowup" ? EndCondition::blowup : EndCondition::regular_pole;
    d.hi_end = j.at("hi_end") == "blowup" ? EndCondition::blowup : EndCondition::regular_pole;
    d.label = j.at("label");
    return d;
}

inline nlohmann::json to_json(const GridSpec& s) {
    return {{"intervals", s.intervals}, {"uniform_fraction", s.uniform_fraction}, {"grading", s.grading},
            {"floor", s.floor}};
}

inline GridSpec grid_spec_from_json(const nlohmann::json& j) {
    return {j.at("intervals"), j.at("uniform_fraction"), j.at("grading"), j.at("floor")};
}

inline void write_profile_csv(const BlowupProfile& p, std::ostream& os) {
    nlohmann::json meta{{"n", p.dimension()},
                        {"domain", to_json(p.domain())},
                        {"grid", to_json(p.grid().spec())},
                        {"M", p.level()},
                        {"residual", p.residual()}};
    os << "# " << meta.dump() << "\n";
    os << "theta,g,rho\n";
    os << std::setprecision(17);
    for (std::size_t j = 0; j < p.size(); ++j)
        os << p.grid().theta(j) << "," << p.g()[j] << "," << p.rho()[j] << "\n";
}

inline BlowupProfile read_profile_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ConfigError("profile CSV: missing metadata line");
    const auto meta = nlohmann::json::parse(line.substr(2));
    std::getline(is, line);
    std::vector<double> g;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        g.push_back(std::stod(b));
    }
    AngularGrid grid(domain_from_json(meta.at("domain")), grid_spec_from_json(meta.at("grid")), meta.at("n"));
    if (g.size() != grid.size()) throw ConfigError("profile CSV: node count does not match metadata");
    return BlowupProfile(std::move(grid), std::move(g), meta.at("M"), meta.at("residual"));
}

}  // namespace lnb
