#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "lnb/config.hpp"

using namespace lnb;

namespace {

const std::string tolerances = R"(
profile_interior_tolerance = 1e-8
newton_tolerance = 1e-10
localization_tolerance = 1e-3
bracket_low = 0.5
bracket_high = 2
)";

std::string one_case(const std::string& body, const std::string& label = "c") {
    return "[" + label + "]\n" + body + tolerances;
}

}  // namespace

TEST(Config, ParsesCaseAndRunSections) {
    const auto cfg = parse_config_string("[run]\noutput = out/dir\njobs = 3\n" +
                                         one_case("fixture = cap-cone\nn = 4\ntheta0_rad = 2*pi/3\n"
                                                  "metric = conformal-quadratic\nmetric_parameter = 0.3\n"
                                                  "angular_intervals = 800\nradial_intervals = 64\n"
                                                  "truncation_levels = 1e2, 1e3, 1e4\nr_min = 0.001953125\n"
                                                  "barriers = cone-upper, cone-lower\n",
                                                  "cone"));
    EXPECT_EQ(cfg.output, std::filesystem::path("out/dir"));
    EXPECT_EQ(cfg.jobs, 3);
    ASSERT_EQ(cfg.cases.size(), 1u);
    const auto& c = cfg.find("cone");
    EXPECT_EQ(c.fixture, "cap-cone");
    EXPECT_EQ(c.n, 4);
    EXPECT_DOUBLE_EQ(c.theta0, 2 * pi / 3);
    EXPECT_EQ(c.metric, "conformal-quadratic");
    EXPECT_EQ(c.angular.intervals, 800);
    EXPECT_EQ(c.solve.angular.intervals, 800);
    EXPECT_EQ(c.solve.radial_intervals, 64);
    EXPECT_EQ(c.solve.levels, (std::vector<double>{1e2, 1e3, 1e4}));
    EXPECT_DOUBLE_EQ(c.solve_r_min, std::ldexp(1.0, -9));
    EXPECT_DOUBLE_EQ(c.profile_schedule.interior_tolerance, 1e-8);
    EXPECT_DOUBLE_EQ(c.solve.bracket_high, 2.0);
    EXPECT_EQ(c.barriers.size(), 2u);
    EXPECT_EQ(c.op().n, 4);
    EXPECT_EQ(c.spherical_domain().hi, c.theta0);
    EXPECT_THROW((void)cfg.find("missing"), UnknownFixture);
}

TEST(Config, AcceptsMultiplesOfPi) {
    EXPECT_DOUBLE_EQ(detail::parse_real("k", "pi"), pi);
    EXPECT_DOUBLE_EQ(detail::parse_real("k", "pi/3"), pi / 3);
    EXPECT_DOUBLE_EQ(detail::parse_real("k", " 0.5 * pi "), pi / 2);
    EXPECT_DOUBLE_EQ(detail::parse_real("k", "2*pi/3"), 2 * pi / 3);
    EXPECT_DOUBLE_EQ(detail::parse_real("k", "1.25"), 1.25);
    EXPECT_THROW(detail::parse_real("k", "pi3"), ConfigError);
    EXPECT_THROW(detail::parse_real("k", "1.0x"), ConfigError);
    EXPECT_THROW(detail::parse_real("k", ""), ConfigError);
}

TEST(Config, UnknownNamesAreFixtureErrors) {
    EXPECT_THROW(parse_config_string(one_case("fixture = torus\n")), UnknownFixture);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\nmetric = lorentzian\n")), UnknownFixture);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\nbarriers = thrice-ball\n")), UnknownFixture);
}

TEST(Config, MissingToleranceIsAConfigError) {
    for (const std::string key :
         {"profile_interior_tolerance", "newton_tolerance", "localization_tolerance", "bracket_low", "bracket_high"}) {
        std::string text = one_case("fixture = ball\n");
        const auto at = text.find(key);
        text.erase(at, text.find('\n', at) - at + 1);
        try {
            parse_config_string(text);
            FAIL() << key;
        } catch (const UnknownFixture&) {
            FAIL() << key;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(key), std::string::npos);
        }
    }
}

TEST(Config, RejectsMalformedInput) {
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\ncolour = blue\n")), ConfigError);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\nn = 2\n")), Error);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\nn = 3.5\n")), ConfigError);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\nstrict_localization = maybe\n")), ConfigError);
    std::string negative = one_case("fixture = ball\n");
    negative.replace(negative.find("bracket_low = 0.5"), 17, "bracket_low = -1");
    EXPECT_THROW(parse_config_string(negative), ConfigError);
    // a key given twice in one section
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\nbracket_low = 1\n")), ConfigError);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\n") + one_case("fixture = ball\n")), ConfigError);
    EXPECT_THROW(parse_config_string("[run]\njobs = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_string("[run]\njobs = 0\n" + one_case("fixture = ball\n")), ConfigError);
    EXPECT_THROW(parse_config_string("[unterminated\n"), ConfigError);
    EXPECT_THROW(parse_config_string(one_case("fixture = ball\ntruncation_levels = 1e3, 1e2\n")), ConfigError);
    EXPECT_THROW((void)load_config("/nonexistent/lnb.ini"), ConfigError);
}

TEST(Config, DefaultsFollowTheFixture) {
    const auto cfg = parse_config_string(one_case("fixture = ball\nn = 5\nball_radius = 2\n", "b") +
                                         one_case("fixture = wedge\ntheta0_rad = 3*pi/2\n", "w"));
    const auto& b = cfg.find("b");
    EXPECT_EQ(b.domain().reduction, Reduction::ball);
    EXPECT_EQ(b.solve.radial.intervals, 2000);
    EXPECT_TRUE(b.solve.strict_localization);
    const auto& w = cfg.find("w");
    EXPECT_EQ(w.domain().reduction, Reduction::cross_section);
    EXPECT_EQ(w.spherical_domain().geometry, SphereGeometry::circle_arc);
    EXPECT_EQ(cfg.output, std::filesystem::path("lnb-out"));
}
