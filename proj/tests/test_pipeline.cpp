#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "lnb/pipeline.hpp"

using namespace lnb;
namespace fs = std::filesystem;

namespace {

const std::string tolerances = R"(
profile_interior_tolerance = 1e-8
newton_tolerance = 1e-10
localization_tolerance = 1e-3
bracket_low = 0.5
bracket_high = 2
)";

class Pipeline : public ::testing::Test {
protected:
    void SetUp() override {
        out_ = fs::temp_directory_path() /
               ("lnb-pipeline-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(out_);
    }
    void TearDown() override { fs::remove_all(out_); }

    [[nodiscard]] ExperimentConfig config() const {
        return parse_config_string("[run]\noutput = " + out_.string() + "\n" +
                                   "[half-sphere]\nfixture = cap-cone\ntheta0_rad = pi/2\nangular_intervals = 3200\n" +
                                   tolerances +
                                   "[ball]\nfixture = ball\nball_radial_intervals = 1000\nbarriers = twice-ball\n" +
                                   tolerances);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    fs::path out_;
};

}  // namespace

TEST(ExitCodes, MapErrorKinds) {
    auto code = [](auto&& thrower) {
        try {
            thrower();
        } catch (...) {
            return exit_code_of(std::current_exception());
        }
        return -1;
    };
    EXPECT_EQ(code([] { throw ConfigError("x"); }), 2);
    EXPECT_EQ(code([] { throw UnknownFixture("x"); }), 3);
    EXPECT_EQ(code([] { throw MissingArtifact("x"); }), 4);
    EXPECT_EQ(code([] { throw CheckFailure("x"); }), 1);
    EXPECT_EQ(code([] { throw ConvergenceError("x", {}); }), 5);
    EXPECT_EQ(code([] { (void)parse_subcommand("frobnicate"); }), 2);
    EXPECT_EQ(code([] { (void)parse_config_string("[c]\nfixture = klein-bottle\n" + tolerances); }), 3);
    EXPECT_EQ(code([] { (void)parse_config_string("not an ini file ]]\n"); }), 2);
    EXPECT_EQ(parse_subcommand("verify"), Subcommand::verify);
}

TEST_F(Pipeline, ProfileAndEigenOnTheHalfSphere) {
    const auto cfg = config();
    ASSERT_EQ(run(Subcommand::profile, cfg, {"half-sphere"}, 1), 0);
    ASSERT_EQ(run(Subcommand::eigen, cfg, {"half-sphere"}, 1), 0);
    std::ifstream ps(out_ / "half-sphere" / "profile.csv");
    const auto p = read_profile_csv(ps);
    EXPECT_NEAR(p.g()[0], 1.0, 1e-6);
    std::ifstream es(out_ / "half-sphere" / "eigen.csv");
    const auto e = read_eigen_csv(es);
    EXPECT_NEAR(e.lambda, 8.75, 1e-2);
    EXPECT_EQ(e.regime, Regime::alpha_two);
}

TEST_F(Pipeline, MissingUpstreamArtifact) {
    const auto cfg = config();
    EXPECT_EQ(run(Subcommand::eigen, cfg, {"half-sphere"}, 1), 4);
    EXPECT_EQ(run(Subcommand::verify, cfg, {"ball"}, 1), 4);
    EXPECT_THROW(run(Subcommand::report, cfg, {}, 1), MissingArtifact);
}

TEST_F(Pipeline, UnknownCaseFilter) {
    EXPECT_THROW(run(Subcommand::profile, config(), {"no-such-case"}, 1), UnknownFixture);
}

TEST_F(Pipeline, BallChainEndToEnd) {
    const auto cfg = config();
    for (auto cmd : {Subcommand::profile, Subcommand::eigen, Subcommand::solve, Subcommand::certify, Subcommand::verify})
        ASSERT_EQ(run(cmd, cfg, {"ball"}, 2), 0);
    EXPECT_EQ(run(Subcommand::report, cfg, {"ball"}, 1), 0);
    for (const auto* name : {"profile.csv", "eigen.csv", "field.csv", "certificates.json", "rate.csv", "rate.svg",
                             "theorem.json"})
        EXPECT_TRUE(fs::exists(out_ / "ball" / name)) << name;
    const auto report = slurp(out_ / "report.md");
    EXPECT_NE(report.find("| ball | curved boundary |"), std::string::npos);
    EXPECT_NE(report.find("2u_R"), std::string::npos);
    EXPECT_EQ(report.find("FAIL"), std::string::npos);
    const auto row = detail::theorem_row_from_json(nlohmann::json::parse(slurp(out_ / "ball" / "theorem.json")));
    EXPECT_NEAR(row.measured, 1.0, 0.1);
}

TEST_F(Pipeline, RerunsAreByteIdentical) {
    const auto cfg = config();
    ASSERT_EQ(run(Subcommand::profile, cfg, {}, 2), 0);
    ASSERT_EQ(run(Subcommand::solve, cfg, {"ball"}, 1), 0);
    const auto profile = slurp(out_ / "half-sphere" / "profile.csv");
    const auto field = slurp(out_ / "ball" / "field.csv");
    ASSERT_EQ(run(Subcommand::profile, cfg, {"half-sphere"}, 1), 0);
    ASSERT_EQ(run(Subcommand::solve, cfg, {"ball"}, 2), 0);
    EXPECT_EQ(slurp(out_ / "half-sphere" / "profile.csv"), profile);
    EXPECT_EQ(slurp(out_ / "ball" / "field.csv"), field);
}

TEST_F(Pipeline, VerifyUsesTheSolutionTruncationLevel) {
    const auto cfg = parse_config_string("[run]\noutput = " + out_.string() + "\n" +
                                         "[cone]\nfixture = cap-cone\nn = 6\ntheta0_rad = pi/3\n"
                                         "metric = conformal-quadratic\nmetric_parameter = 0.3\n"
                                         "angular_intervals = 200\nradial_intervals = 64\nr_min = 0.00390625\n"
                                         "truncation_levels = 1e2, 1e3\n" +
                                         tolerances);
    for (auto cmd : {Subcommand::profile, Subcommand::eigen, Subcommand::solve}) ASSERT_EQ(run(cmd, cfg, {}, 1), 0);
    std::ifstream ps(out_ / "cone" / "profile.csv");
    ASSERT_NE(read_profile_csv(ps).level(), 1e3);
    EXPECT_EQ(run(Subcommand::verify, cfg, {}, 1), 0);
    const auto row = detail::theorem_row_from_json(nlohmann::json::parse(slurp(out_ / "cone" / "theorem.json")));
    EXPECT_GE(row.measured, 1.8);
}
