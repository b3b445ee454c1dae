#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "lnb/blowup_solver.hpp"
#include "lnb/cap_profile.hpp"
#include "lnb/common.hpp"
#include "lnb/operator.hpp"

namespace lnb {

/// A case names a fixture or metric that is not registered.
class UnknownFixture : public ConfigError {
public:
    using ConfigError::ConfigError;
};

inline const std::set<std::string>& registered_fixtures() {
    static const std::set<std::string> s{"cap-cone", "wedge", "tangent-ball", "ball"};
    return s;
}

inline const std::set<std::string>& registered_metrics() {
    static const std::set<std::string> s{"euclidean", "conformal-quadratic", "saturating", "drift"};
    return s;
}

inline const std::set<std::string>& registered_barriers() {
    static const std::set<std::string> s{"twice-ball", "corrector", "cone-upper", "cone-lower"};
    return s;
}

struct CaseConfig {
    std::string label;
    std::string fixture;
    int n = 3;
    double theta0 = pi / 2;       // radians
    double ball_radius = 1.0;
    std::string metric = "euclidean";
    double metric_parameter = 0.0;  // q for conformal-quadratic, C for saturating
    GridSpec angular;
    TruncationSchedule profile_schedule;
    SolveConfig solve;
    double solve_r_min = std::ldexp(1.0, -8);
    double solve_r_max = 1.0;
    double fit_lo = 0, fit_hi = 0;
    std::vector<std::string> barriers;

    [[nodiscard]] SphericalDomain1D spherical_domain() const {
        if (fixture == "wedge") return SphericalDomain1D::arc(theta0);
        if (fixture == "cap-cone") return SphericalDomain1D::cap(theta0);
        return SphericalDomain1D::cap(pi / 2);
    }

    [[nodiscard]] DomainSpec2D domain() const {
        if (fixture == "cap-cone") return DomainSpec2D::cap_cone(n, theta0, solve_r_min, solve_r_max);
        if (fixture == "wedge") return DomainSpec2D::wedge(n, theta0, solve_r_min, solve_r_max);
        if (fixture == "tangent-ball") return DomainSpec2D::tangent_ball(n, ball_radius, solve_r_min, solve_r_max);
        return DomainSpec2D::centered_ball(n, ball_radius);
    }

    [[nodiscard]] OperatorSpec op() const {
        if (metric == "conformal-quadratic")
            return conformal_operator(MetricFamily::conformal_quadratic(n, metric_parameter), 1.0);
        if (metric == "saturating") return saturating_operator(n, metric_parameter);
        if (metric == "drift") return drift_operator(n);
        return OperatorSpec::laplacian(n);
    }
};

struct ExperimentConfig {
    std::filesystem::path output = "lnb-out";
    int jobs = 1;
    std::vector<CaseConfig> cases;

    [[nodiscard]] const CaseConfig& find(const std::string& label) const {
        for (const auto& c : cases)
            if (c.label == label) return c;
        throw UnknownFixture("no case labelled '" + label + "'");
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Numbers, optionally written as multiples of pi: "pi", "pi/3", "2*pi/3", "0.5*pi".
inline double parse_real(const std::string& key, std::string text) {
    text = trim(text);
    try {
        auto number = [&](const std::string& s) {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        };
        const auto at = text.find("pi");
        if (at == std::string::npos) return number(text);
        double value = pi;
        const std::string head = trim(text.substr(0, at)), tail = trim(text.substr(at + 2));
        if (!head.empty()) {
            if (head.back() != '*') throw std::invalid_argument(head);
            value *= number(trim(head.substr(0, head.size() - 1)));
        }
        if (!tail.empty()) {
            if (tail.front() != '/') throw std::invalid_argument(tail);
            value /= number(trim(tail.substr(1)));
        }
        return value;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("key '{}': cannot parse '{}' as a number", key, text));
    }
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

class Section {
public:
    Section(std::string name, const boost::property_tree::ptree& tree) : name_(std::move(name)), tree_(tree) {}

    [[nodiscard]] bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

    [[nodiscard]] std::string text(const std::string& key) const {
        const auto it = tree_.find(key);
        if (it == tree_.not_found()) throw ConfigError(fmt::format("[{}]: missing required key '{}'", name_, key));
        used_.insert(key);
        return trim(it->second.data());
    }
    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    [[nodiscard]] double real(const std::string& key) const { return parse_real(name_ + "." + key, text(key)); }
    [[nodiscard]] double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }
    [[nodiscard]] int integer(const std::string& key, int fallback) const {
        if (!has(key)) return fallback;
        const double v = real(key);
        if (v != std::floor(v)) throw ConfigError(fmt::format("[{}]: key '{}' must be an integer", name_, key));
        return int(v);
    }
    [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto t = text(key);
        if (t == "true" || t == "1" || t == "yes") return true;
        if (t == "false" || t == "0" || t == "no") return false;
        throw ConfigError(fmt::format("[{}]: key '{}' must be true or false", name_, key));
    }
    [[nodiscard]] double positive(const std::string& key) const {
        const double v = real(key);
        if (!(v > 0)) throw ConfigError(fmt::format("[{}]: key '{}' must be positive", name_, key));
        return v;
    }

    void reject_unknown() const {
        for (const auto& [k, v] : tree_)
            if (!used_.count(k)) throw ConfigError(fmt::format("[{}]: unknown key '{}'", name_, k));
    }

private:
    std::string name_;
    const boost::property_tree::ptree& tree_;
    mutable std::set<std::string> used_;
};

inline CaseConfig parse_case(const std::string& label, const boost::property_tree::ptree& tree) {
    const Section s(label, tree);
    CaseConfig c;
    c.label = label;
    c.fixture = s.text("fixture");
    if (!registered_fixtures().count(c.fixture)) throw UnknownFixture(fmt::format("[{}]: unknown fixture '{}'", label, c.fixture));
    c.n = s.integer("n", 3);
    require_dimension(c.n);
    c.theta0 = s.real("theta0_rad", pi / 2);
    c.ball_radius = s.real("ball_radius", 1.0);
    c.metric = s.text("metric", "euclidean");
    if (!registered_metrics().count(c.metric)) throw UnknownFixture(fmt::format("[{}]: unknown metric '{}'", label, c.metric));
    c.metric_parameter = s.real("metric_parameter", 0.0);

    c.angular.intervals = s.integer("angular_intervals", 400);
    c.angular.uniform_fraction = s.real("angular_uniform_fraction", 0.3);
    c.angular.floor = s.real("angular_floor_rad", 1e-10);

    c.profile_schedule.start = s.real("truncation_start", 100.0);
    c.profile_schedule.factor = s.real("truncation_factor", 2.0);
    c.profile_schedule.interior_tolerance = s.positive("profile_interior_tolerance");
    c.profile_schedule.validate();

    auto& sv = c.solve;
    sv.angular = c.angular;
    sv.profile_schedule = c.profile_schedule;
    sv.newton_tolerance = s.positive("newton_tolerance");
    sv.localization_tolerance = s.positive("localization_tolerance");
    sv.bracket_low = s.positive("bracket_low");
    sv.bracket_high = s.positive("bracket_high");
    sv.strict_localization = s.flag("strict_localization", true);
    sv.radial_intervals = s.integer("radial_intervals", 96);
    sv.radial.intervals = s.integer("ball_radial_intervals", 2000);
    sv.ball_angular_intervals = s.integer("ball_angular_intervals", 4);
    if (s.has("truncation_levels"))
        for (const auto& t : split_list(s.text("truncation_levels"))) sv.levels.push_back(parse_real(label + ".truncation_levels", t));
    c.solve_r_min = s.real("r_min", std::ldexp(1.0, -8));
    c.solve_r_max = s.real("r_max", 1.0);
    sv.validate();

    c.fit_lo = s.real("fit_r_lo", 0.0);
    c.fit_hi = s.real("fit_r_hi", 0.0);
    if (s.has("barriers"))
        for (const auto& b : split_list(s.text("barriers"))) {
            if (!registered_barriers().count(b)) throw UnknownFixture(fmt::format("[{}]: unknown barrier '{}'", label, b));
            c.barriers.push_back(b);
        }
    s.reject_unknown();
    c.domain().validate();
    return c;
}

}  // namespace detail

/// INI text: a [run] section (output, jobs) and one section per case.
inline ExperimentConfig parse_config(std::istream& is) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ExperimentConfig cfg;
    std::set<std::string> seen;
    for (const auto& [name, section] : tree) {
        if (name == "run") {
            const detail::Section s("run", section);
            cfg.output = s.text("output", "lnb-out");
            cfg.jobs = s.integer("jobs", 1);
            if (cfg.jobs < 1) throw ConfigError("[run]: jobs must be at least 1");
            s.reject_unknown();
            continue;
        }
        if (section.empty()) throw ConfigError("malformed config: key '" + name + "' outside any section");
        if (!seen.insert(name).second) throw ConfigError("duplicate case '" + name + "'");
        cfg.cases.push_back(detail::parse_case(name, section));
    }
    if (cfg.cases.empty()) throw ConfigError("config defines no cases");
    return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    return parse_config(is);
}

}  // namespace lnb
