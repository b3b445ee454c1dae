#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lnb/cap_profile.hpp"
#include "lnb/common.hpp"
#include "lnb/tridiag.hpp"

namespace lnb {

enum class Regime { alpha_two, log, alpha_mu };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::alpha_two: return "alpha-2";
        case Regime::log: return "log";
        default: return "alpha-mu";
    }
}

/// Predicted bound C|x|^exponent (−ln|x|)^log_power for |u/u_V − 1|.
struct RateForm {
    Regime regime = Regime::alpha_two;
    double exponent = 2.0;
    int log_power = 0;

    [[nodiscard]] std::string describe() const {
        if (log_power) return "C(-|x|^2 ln|x|)";
        if (regime == Regime::alpha_two) return "C|x|^2";
        return fmt::format("C|x|^{:.6g}", exponent);
    }
};

inline constexpr double regime_tolerance = 1e-6;

inline RateForm regime_exponent(double mu) {
    if (std::abs(mu - 2.0) <= regime_tolerance) return {Regime::log, 2.0, 1};
    if (mu > 2.0) return {Regime::alpha_two, 2.0, 0};
    return {Regime::alpha_mu, mu, 0};
}

struct EigenResult {
    double lambda = 0.0;
    double mu = 0.0;
    Regime regime = Regime::alpha_two;
    double nu_hat = 0.0;
    std::vector<double> theta;
    std::vector<double> phi;  // zero at blowup nodes, L²(Σ) norm one
    std::vector<double> rayleigh_trace;
    int n = 3;
};

inline RateForm regime_exponent(const EigenResult& r) { return regime_exponent(r.mu); }

/// Indicial exponent of the cone: √(k² + λ) for cones over polar caps, and
/// k + √λ for wedges whose cross-section is a circle arc.
inline double indicial_exponent(double lambda, int n, SphereGeometry geometry) {
    const double k = Exponents{n}.k();
    return geometry == SphereGeometry::polar_sphere ? std::sqrt(k * k + lambda) : k + std::sqrt(lambda);
}

namespace detail {

/// ρ at every node, with nodes inside the truncation layer (d < 10 M^{-1/k})
/// replaced by the linear extrapolation ρ ≈ (ρ_ref/d_ref)·d from the first
/// node outside it.
inline std::vector<double> effective_rho(const BlowupProfile& profile) {
    const auto& grid = profile.grid();
    const auto& dom = grid.domain();
    const std::size_t m = grid.size();
    std::vector<double> rho = profile.rho();
    const double layer = 10.0 * profile.truncation_layer();
    if (dom.lo_end == EndCondition::blowup) {
        std::size_t ref = 1;
        while (ref + 1 < m && grid.from_lo(ref) < layer) ++ref;
        const double slope = rho[ref] / grid.from_lo(ref);
        for (std::size_t j = 1; j < ref; ++j) rho[j] = slope * grid.from_lo(j);
    }
    if (dom.hi_end == EndCondition::blowup) {
        std::size_t ref = m - 2;
        while (ref > 0 && grid.from_hi(ref) < layer) --ref;
        const double slope = rho[ref] / grid.from_hi(ref);
        for (std::size_t j = ref + 1; j + 1 < m; ++j) rho[j] = slope * grid.from_hi(j);
    }
    return rho;
}

struct SpectralSystem {
    std::vector<std::size_t> index;  // grid node of each unknown
    std::vector<double> diag, off;   // symmetric D^{-1/2} K D^{-1/2}
    std::vector<double> sqrt_mass;
};

inline SpectralSystem assemble_spectral(const BlowupProfile& profile) {
    const auto& grid = profile.grid();
    const double P = Exponents{profile.dimension()}.potential();
    const auto rho = effective_rho(profile);
    SpectralSystem s;
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (!grid.is_blowup_node(j)) s.index.push_back(j);
    const std::size_t m = s.index.size();
    s.diag.resize(m);
    s.off.assign(m > 0 ? m - 1 : 0, 0.0);
    s.sqrt_mass.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = s.index[i];
        double d = grid.volume(j) * P / sqr(rho[j]);
        if (j > 0) d += grid.face(j - 1);
        if (j + 1 < grid.size()) d += grid.face(j);
        s.diag[i] = d;
        s.sqrt_mass[i] = std::sqrt(grid.volume(j));
        if (i + 1 < m) s.off[i] = -grid.face(j);
    }
    for (std::size_t i = 0; i < m; ++i) s.diag[i] /= sqr(s.sqrt_mass[i]);
    for (std::size_t i = 0; i + 1 < m; ++i) s.off[i] /= s.sqrt_mass[i] * s.sqrt_mass[i + 1];
    return s;
}

inline std::size_t count_below(const SpectralSystem& s, double sigma) {
    std::vector<double> d(s.diag);
    for (double& v : d) v -= sigma;
    return SymmetricTridiagonalLDL(d, s.off).negative_pivots;
}

}  // namespace detail

/// Discrete Rayleigh quotient (∫|∇φ|² + n(n+2)/(4ρ²)φ²)/∫φ² on the profile's
/// grid; φ is given at every node and must vanish at blowup nodes.
inline double rayleigh(const BlowupProfile& profile, std::span<const double> phi) {
    const auto& grid = profile.grid();
    if (phi.size() != grid.size()) throw DomainError("rayleigh: test function size mismatch");
    const double P = Exponents{profile.dimension()}.potential();
    const auto rho = detail::effective_rho(profile);
    double num = 0, den = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (grid.is_blowup_node(j)) {
            if (phi[j] != 0.0) throw DomainError("rayleigh: test function must vanish at blowup endpoints");
            continue;
        }
        num += grid.volume(j) * P / sqr(rho[j]) * sqr(phi[j]);
        den += grid.volume(j) * sqr(phi[j]);
    }
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) num += grid.face(j) * sqr(phi[j + 1] - phi[j]);
    if (!(den > 0)) throw DomainError("rayleigh: zero-norm test function");
    return num / den;
}

/// Slope of log φ against log ρ over nodes with ρ in [lo, hi].
inline double fit_decay_exponent(const BlowupProfile& profile, std::span<const double> phi, double lo = 1e-3,
                                 double hi = 1e-1) {
    const auto rho = detail::effective_rho(profile);
    std::vector<double> x, y;
    for (std::size_t j = 0; j < phi.size(); ++j)
        if (rho[j] >= lo && rho[j] <= hi && phi[j] > 0) {
            x.push_back(std::log(rho[j]));
            y.push_back(std::log(phi[j]));
        }
    if (x.size() < 2) throw DomainError("decay fit: fewer than two nodes in the rho window");
    return fit_line(x, y).slope;
}

struct EigenOptions {
    double tolerance = 1e-10;  // relative eigenvalue change
    int max_iterations = 100;
};

inline EigenResult first_eigenpair(const BlowupProfile& profile, const EigenOptions& opt = {}) {
    const auto sys = detail::assemble_spectral(profile);
    const std::size_t m = sys.index.size();
    if (m < 3) throw DomainError("eigenproblem: too few unknowns");

    double hi = 0;
    for (std::size_t i = 0; i < m; ++i) {
        double r = sys.diag[i];
        if (i > 0) r += std::abs(sys.off[i - 1]);
        if (i + 1 < m) r += std::abs(sys.off[i]);
        hi = std::max(hi, r);
    }
    if (detail::count_below(sys, 0.0) > 0)
        throw Error("eigenproblem assembly: negative eigenvalue (mis-signed potential)");
    double lo = 0;
    while (hi - lo > 1e-7 * hi) {
        const double mid = 0.5 * (lo + hi);
        (detail::count_below(sys, mid) >= 1 ? hi : lo) = mid;
    }

    // Inverse iteration with a shift just below λ₁; the pivot count above
    // guarantees no eigenvalue lies between the shift and λ₁.
    const double shift = lo - 1e-6 * std::max(lo, 1.0);
    std::vector<double> d(sys.diag);
    for (double& v : d) v -= shift;
    const SymmetricTridiagonalLDL ldl(d, sys.off);
    std::vector<double> psi(m, 1.0), trace;
    double lambda = 0;
    auto apply = [&](const std::vector<double>& v) {
        std::vector<double> out(m);
        for (std::size_t i = 0; i < m; ++i) {
            double s = sys.diag[i] * v[i];
            if (i > 0) s += sys.off[i - 1] * v[i - 1];
            if (i + 1 < m) s += sys.off[i] * v[i + 1];
            out[i] = s;
        }
        return out;
    };
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
        psi = ldl.solve(psi);
        double nrm = 0;
        for (double v : psi) nrm += v * v;
        nrm = std::sqrt(nrm);
        for (double& v : psi) v /= nrm;
        const auto Ap = apply(psi);
        double next = 0;
        for (std::size_t i = 0; i < m; ++i) next += psi[i] * Ap[i];
        trace.push_back(next);
        if (it > 0 && std::abs(next - lambda) < opt.tolerance * std::abs(next)) {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    if (!converged) throw ConvergenceError("inverse iteration stagnated", trace);
    if (!(lambda > 0)) throw Error("eigenproblem assembly: non-positive first eigenvalue");

    EigenResult out;
    out.n = profile.dimension();
    out.lambda = lambda;
    out.mu = indicial_exponent(lambda, out.n, profile.domain().geometry);
    out.regime = regime_exponent(out.mu).regime;
    out.theta = profile.grid().thetas();
    out.phi.assign(profile.size(), 0.0);
    double sum = 0;
    for (double v : psi) sum += v;
    const double sign = sum < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) out.phi[sys.index[i]] = sign * psi[i] / sys.sqrt_mass[i];
    out.rayleigh_trace = std::move(trace);
    out.nu_hat = fit_decay_exponent(profile, out.phi);
    return out;
}

/// Smallest C with ρ|φ'| + ρ²|φ''| ≤ Cρ^ν over nodes outside the truncation
/// layer.
inline double eigenfunction_decay_constant(const BlowupProfile& profile, const EigenResult& eig, double nu) {
    const auto& grid = profile.grid();
    const auto rho = detail::effective_rho(profile);
    const double layer = 10.0 * profile.truncation_layer();
    double C = 0;
    for (std::size_t j = 1; j + 1 < grid.size(); ++j) {
        if (grid.blowup_distance(j) < layer) continue;
        const double h0 = grid.spacing(j - 1), h1 = grid.spacing(j);
        const auto& f = eig.phi;
        const double d1 = (-h1 / (h0 * (h0 + h1))) * f[j - 1] + ((h1 - h0) / (h0 * h1)) * f[j] +
                          (h0 / (h1 * (h0 + h1))) * f[j + 1];
        const double d2 = 2.0 * (f[j - 1] / (h0 * (h0 + h1)) - f[j] / (h0 * h1) + f[j + 1] / (h1 * (h0 + h1)));
        C = std::max(C, (rho[j] * std::abs(d1) + sqr(rho[j]) * std::abs(d2)) / std::pow(rho[j], nu));
    }
    return C;
}

inline void write_eigen_csv(const EigenResult& r, std::ostream& os) {
    nlohmann::json meta{{"n", r.n},
                        {"lambda1", r.lambda},
                        {"mu1", r.mu},
                        {"regime", to_string(r.regime)},
                        {"nu_hat", r.nu_hat},
                        {"predicted", regime_exponent(r).describe()}};
    os << "# " << meta.dump() << "\n";
    os << "theta,phi\n";
    os << std::setprecision(17);
    for (std::size_t j = 0; j < r.theta.size(); ++j) os << r.theta[j] << "," << r.phi[j] << "\n";
}

inline EigenResult read_eigen_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ConfigError("eigen CSV: missing metadata line");
    EigenResult r;
    try {
        const auto meta = nlohmann::json::parse(line.substr(2));
        r.n = meta.at("n");
        r.lambda = meta.at("lambda1");
        r.mu = meta.at("mu1");
        r.nu_hat = meta.at("nu_hat");
    } catch (const std::exception& e) {
        throw ConfigError(std::string("eigen CSV: bad metadata: ") + e.what());
    }
    r.regime = regime_exponent(r.mu).regime;
    std::getline(is, line);
    while (std::getline(is, line) && !line.empty()) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("eigen CSV: malformed row '" + line + "'");
        r.theta.push_back(std::stod(line.substr(0, comma)));
        r.phi.push_back(std::stod(line.substr(comma + 1)));
    }
    return r;
}

}  // namespace lnb
