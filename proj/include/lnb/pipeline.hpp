#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lnb/analysis.hpp"
#include "lnb/blowup_solver.hpp"
#include "lnb/cap_profile.hpp"
#include "lnb/config.hpp"
#include "lnb/spectral.hpp"

namespace lnb {

enum class ExitCode : int {
    ok = 0,
    check_failed = 1,
    bad_config = 2,
    unknown_fixture = 3,
    missing_artifact = 4,
    numerical_failure = 5,
};

class MissingArtifact : public Error {
public:
    using Error::Error;
};

enum class Subcommand { profile, eigen, solve, certify, verify, report };

inline Subcommand parse_subcommand(const std::string& s) {
    if (s == "profile") return Subcommand::profile;
    if (s == "eigen") return Subcommand::eigen;
    if (s == "solve") return Subcommand::solve;
    if (s == "certify") return Subcommand::certify;
    if (s == "verify") return Subcommand::verify;
    if (s == "report") return Subcommand::report;
    throw ConfigError("unknown subcommand '" + s + "'");
}

/// Thread-safe line logger on standard error.
class Log {
public:
    static void line(const std::string& who, const std::string& what) {
        static std::mutex m;
        const std::lock_guard lock(m);
        std::cerr << "[" << who << "] " << what << "\n";
    }
};

namespace detail {

inline std::filesystem::path case_dir(const ExperimentConfig& cfg, const CaseConfig& c) { return cfg.output / c.label; }

inline std::ifstream open_artifact(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw MissingArtifact("missing upstream artifact " + p.string());
    return is;
}

inline std::ofstream create(const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

inline BlowupProfile load_profile(const std::filesystem::path& dir) {
    auto is = open_artifact(dir / "profile.csv");
    return read_profile_csv(is);
}

inline EigenResult load_eigen(const std::filesystem::path& dir) {
    auto is = open_artifact(dir / "eigen.csv");
    return read_eigen_csv(is);
}

inline nlohmann::json to_json(const BarrierCertificate& c) {
    return {{"label", c.label}, {"region", c.region}, {"margin", c.margin},
            {"nodes", c.nodes}, {"pass", c.pass},     {"constants", c.constants}};
}

inline BarrierCertificate certificate_from_json(const nlohmann::json& j) {
    BarrierCertificate c;
    c.label = j.at("label");
    c.region = j.at("region");
    c.margin = j.at("margin");
    c.nodes = j.at("nodes");
    c.pass = j.at("pass");
    c.constants = j.at("constants").get<std::map<std::string, double>>();
    return c;
}

inline ConeReference reference_for(const CaseConfig& c, const BlowupProfile& profile) {
    if (c.fixture == "ball") {
        const double R = c.ball_radius;
        return halfspace_distance_reference(
            c.n, [R](double r, double) { return R - r; },
            [R](double r, double th) { return std::sqrt(std::max(r * r + R * R - 2 * r * R * std::cos(th), 0.0)); });
    }
    if (c.fixture == "tangent-ball") {
        const auto dom = c.domain();
        return halfspace_distance_reference(
            c.n, [dom](double r, double th) { return dom.boundary_distance(r, th); }, [](double r, double) { return r; });
    }
    return cone_reference(profile);
}

/// Dyadic fit window: the configured one, or the largest dyadic window inside
/// [4 r_min, r_max/4] (distance to the vertex).
inline std::pair<double, double> fit_window(const CaseConfig& c, const SolutionField& f) {
    if (c.fit_lo > 0 && c.fit_hi > c.fit_lo) return {c.fit_lo, c.fit_hi};
    if (f.reduction == Reduction::ball) return {std::ldexp(c.ball_radius, -9), std::ldexp(c.ball_radius, -3)};
    const double hi = 0.25 * f.r_max;
    const int count = int(std::floor(std::log2(hi / (4 * f.r_min)) + 1e-9));
    return {hi * std::ldexp(1.0, -count), hi};
}

inline TheoremCase theorem_for(const CaseConfig& c, const EigenResult& eig) {
    if (c.fixture == "ball" || c.fixture == "tangent-ball") return curved_theorem_case(c.label);
    return cone_theorem_case(c.label, eig);
}

inline nlohmann::json to_json(const TheoremRow& r) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& a : r.fit.table) table.push_back({a.lo, a.hi, a.radius, a.max_ratio, a.count});
    return {{"label", r.spec.label},
            {"theorem", r.spec.theorem},
            {"predicted", r.spec.predicted},
            {"predicted_form", r.spec.predicted_form},
            {"sharp_upper", r.spec.sharp_upper ? nlohmann::json(*r.spec.sharp_upper) : nlohmann::json()},
            {"measured", r.measured},
            {"alpha", r.fit.alpha},
            {"C", r.fit.C},
            {"r2", r.fit.r2},
            {"rms", r.fit.rms},
            {"log_alpha", r.fit.log_alpha},
            {"log_rms", r.fit.log_rms},
            {"log_preferred", r.fit.log_preferred},
            {"window", {r.fit.r_lo, r.fit.r_hi}},
            {"table", table},
            {"pass", r.pass},
            {"note", r.note}};
}

inline TheoremRow theorem_row_from_json(const nlohmann::json& j) {
    TheoremRow r;
    r.spec.label = j.at("label");
    r.spec.theorem = j.at("theorem");
    r.spec.predicted = j.at("predicted");
    r.spec.predicted_form = j.at("predicted_form");
    if (!j.at("sharp_upper").is_null()) r.spec.sharp_upper = j.at("sharp_upper").get<double>();
    r.measured = j.at("measured");
    r.fit.alpha = j.at("alpha");
    r.fit.C = j.at("C");
    r.fit.r2 = j.at("r2");
    r.fit.rms = j.at("rms");
    r.fit.log_alpha = j.at("log_alpha");
    r.fit.log_rms = j.at("log_rms");
    r.fit.log_preferred = j.at("log_preferred");
    r.fit.r_lo = j.at("window")[0];
    r.fit.r_hi = j.at("window")[1];
    for (const auto& a : j.at("table")) r.fit.table.push_back({a[0], a[1], a[2], a[3], a[4]});
    r.pass = j.at("pass");
    r.note = j.at("note");
    return r;
}

}  // namespace detail

/// Runs one subcommand on one case; returns false when a check fails.
inline bool run_case(Subcommand cmd, const ExperimentConfig& cfg, const CaseConfig& c) {
    const auto dir = detail::case_dir(cfg, c);
    switch (cmd) {
        case Subcommand::profile: {
            const auto p = solve_profile(c.spherical_domain(), c.n, c.profile_schedule, c.angular);
            auto os = detail::create(dir / "profile.csv");
            write_profile_csv(p, os);
            Log::line(c.label, fmt::format("profile: M = {:.6g}, g at first node = {:.10g}", p.level(), p.g().front()));
            return true;
        }
        case Subcommand::eigen: {
            const auto p = detail::load_profile(dir);
            const auto e = first_eigenpair(p);
            auto os = detail::create(dir / "eigen.csv");
            write_eigen_csv(e, os);
            Log::line(c.label, fmt::format("eigen: lambda1 = {:.10g}, mu1 = {:.10g}, regime {}", e.lambda, e.mu,
                                           to_string(e.regime)));
            return true;
        }
        case Subcommand::solve: {
            auto sc = c.solve;
            sc.strict_localization = false;
            const auto f = solve(c.domain(), c.op(), sc);
            {
                auto os = detail::create(dir / "field.csv");
                write_field_csv(f, os);
            }
            Log::line(c.label, fmt::format("solve: M = {:.6g}, bracket width {:.3e}", f.level, f.bracket_width));
            if (f.level_fields.size() >= 2) monotone_check(f);
            if (c.solve.strict_localization) require_localized(f, c.solve.localization_tolerance);
            return true;
        }
        case Subcommand::certify: {
            const auto op = c.op();
            std::vector<std::future<BarrierCertificate>> jobs;
            for (const auto& b : c.barriers) {
                if (b == "twice-ball") jobs.push_back(std::async(std::launch::async, [op] { return search_twice_ball(op); }));
                else if (b == "corrector")
                    jobs.push_back(std::async(std::launch::async, [op] { return search_corrector_barrier(op); }));
                else {
                    const auto p = detail::load_profile(dir);
                    const auto e = detail::load_eigen(dir);
                    const int sign = b == "cone-upper" ? +1 : -1;
                    jobs.push_back(std::async(std::launch::async, [p, e, sign] { return search_cone_barrier(p, e, sign); }));
                }
            }
            nlohmann::json out = nlohmann::json::array();
            bool ok = true;
            for (auto& j : jobs) {
                const auto cert = j.get();
                ok = ok && cert.pass;
                out.push_back(detail::to_json(cert));
                Log::line(c.label, fmt::format("certify {}: margin {:.3e} {}", cert.label, cert.margin,
                                               cert.pass ? "PASS" : "FAIL"));
            }
            auto os = detail::create(dir / "certificates.json");
            os << out.dump(2) << "\n";
            return ok;
        }
        case Subcommand::verify: {
            auto p = detail::load_profile(dir);
            const auto e = detail::load_eigen(dir);
            SolutionField f;
            {
                auto is = detail::open_artifact(dir / "field.csv");
                f = read_field_csv(is);
            }
            // the cone reference must carry the same truncation level as the solution
            if (f.reduction != Reduction::ball && p.level() != f.level) p = solve_profile_fixed(p.grid(), f.level);
            const auto ratio = compare_to_cone(f, detail::reference_for(c, p));
            const auto [lo, hi] = detail::fit_window(c, f);
            const auto fit = fit_rate(ratio, lo, hi);
            const auto row = verify_theorem(detail::theorem_for(c, e), fit);
            {
                auto os = detail::create(dir / "rate.csv");
                write_rate_csv(fit, os);
            }
            {
                auto os = detail::create(dir / "rate.svg");
                write_svg_plot(fit, c.label, os);
            }
            auto os = detail::create(dir / "theorem.json");
            os << detail::to_json(row).dump(2) << "\n";
            Log::line(c.label, fmt::format("verify: predicted {}, measured {:.4f}, {}", row.spec.predicted_form,
                                           row.measured, row.pass ? "PASS" : "FAIL"));
            return row.pass;
        }
        case Subcommand::report: break;
    }
    return true;
}

inline int exit_code_of(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const UnknownFixture&) {
        return int(ExitCode::unknown_fixture);
    } catch (const ConfigError&) {
        return int(ExitCode::bad_config);
    } catch (const MissingArtifact&) {
        return int(ExitCode::missing_artifact);
    } catch (const CheckFailure&) {
        return int(ExitCode::check_failed);
    } catch (...) {
        return int(ExitCode::numerical_failure);
    }
}

/// Runs a subcommand over the selected cases on a pool of `jobs` workers and
/// returns the process exit status.
inline int run(Subcommand cmd, const ExperimentConfig& cfg, const std::vector<std::string>& filter, int jobs) {
    std::vector<const CaseConfig*> cases;
    if (filter.empty())
        for (const auto& c : cfg.cases) cases.push_back(&c);
    else
        for (const auto& l : filter) cases.push_back(&cfg.find(l));

    if (cmd == Subcommand::report) {
        std::vector<TheoremRow> rows;
        std::vector<BarrierCertificate> certs;
        bool ok = true;
        for (const auto* c : cases) {
            const auto dir = detail::case_dir(cfg, *c);
            if (std::filesystem::exists(dir / "theorem.json")) {
                std::ifstream is(dir / "theorem.json");
                rows.push_back(detail::theorem_row_from_json(nlohmann::json::parse(is)));
                ok = ok && rows.back().pass;
            }
            if (std::filesystem::exists(dir / "certificates.json")) {
                std::ifstream is(dir / "certificates.json");
                for (const auto& j : nlohmann::json::parse(is)) {
                    certs.push_back(detail::certificate_from_json(j));
                    ok = ok && certs.back().pass;
                }
            }
        }
        if (rows.empty() && certs.empty()) throw MissingArtifact("report: no verify or certify artifacts found");
        auto os = detail::create(cfg.output / "report.md");
        write_markdown_report(rows, certs, os);
        Log::line("report", (cfg.output / "report.md").string());
        return ok ? 0 : int(ExitCode::check_failed);
    }

    std::atomic<std::size_t> next{0};
    std::vector<int> codes(cases.size(), 0);
    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            try {
                codes[i] = run_case(cmd, cfg, *cases[i]) ? 0 : int(ExitCode::check_failed);
            } catch (const std::exception& e) {
                Log::line(cases[i]->label, std::string("error: ") + e.what());
                codes[i] = exit_code_of(std::current_exception());
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::max(1, std::min<int>(jobs, int(cases.size()))); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return codes.empty() ? 0 : *std::max_element(codes.begin(), codes.end());
}

}  // namespace lnb
