#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "lnb/blowup_solver.hpp"

using namespace lnb;

namespace {

double ball_error(const SolutionField& f, double radius = 0.7) {
    double e = 0;
    for (std::size_t i = 0; i < f.rows; ++i) {
        if (f.r[i] > radius) continue;
        for (std::size_t j = 0; j < f.cols; ++j)
            e = std::max(e, std::abs(f.u[f.index(i, j)] / exact_ball(f.n, 1.0, f.r[i]) - 1.0));
    }
    return e;
}

SolutionField ball(int n, int radial, std::vector<double> levels = {}) {
    SolveConfig c;
    c.radial.intervals = radial;
    c.levels = std::move(levels);
    return solve(DomainSpec2D::centered_ball(n, 1.0), OperatorSpec::laplacian(n), c);
}

}  // namespace

TEST(ExactSolutions, ClosedForms) {
    EXPECT_DOUBLE_EQ(exact_halfspace(3, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(exact_halfspace(4, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(exact_halfspace(6, 0.5), 4.0);
    EXPECT_THROW(exact_halfspace(3, 0.0), DomainError);
    EXPECT_DOUBLE_EQ(exact_ball(3, 1.0, 0.0), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(exact_ball(6, 1.0, 0.0), 4.0);
    EXPECT_THROW(exact_ball(3, 1.0, 1.0), DomainError);
}

TEST(Solve, BallMatchesExactSolution) {
    for (int n : {3, 5}) {
        const auto f = ball(n, 2000);
        EXPECT_LE(ball_error(f), 1e-3) << "n = " << n;
        const auto g = growth_check(f);
        EXPECT_LE(g.upper, std::pow(2.0, Exponents{n}.k()) * 1.05);
        EXPECT_GT(g.lower, 0.0);
    }
}

TEST(Solve, BallConvergesUnderRefinement) {
    std::vector<double> lx, ly;
    for (int N : {250, 500, 1000}) {
        lx.push_back(std::log(1.0 / N));
        ly.push_back(std::log(ball_error(ball(3, N))));
    }
    EXPECT_GE(fit_line(lx, ly).slope, 1.5);
}

TEST(Solve, TruncationScheduleIsMonotone) {
    const auto f = ball(3, 1000, {1e2, 1e3, 1e4});
    const auto m = monotone_check(f);
    EXPECT_TRUE(m.monotone);
    ASSERT_EQ(m.increments.size(), 2u);
    EXPECT_GT(m.increments[0], 0.0);
    EXPECT_LT(m.increments[1], 0.5 * m.increments[0]);
    // the same level twice gives a zero increment
    const auto same = monotone_check({f.level_fields.back(), f.level_fields.back()}, std::vector<char>(f.u.size(), 1));
    EXPECT_EQ(same.increments.front(), 0.0);
    auto broken = f.level_fields;
    broken[1][f.index(3, 1)] *= 0.9;
    EXPECT_THROW(monotone_check(broken, std::vector<char>(f.u.size(), 1)), CheckFailure);
}

TEST(Solve, BallStaysBelowTwiceTheBallSolution) {
    const auto f = ball(3, 1000);
    for (std::size_t i = 0; i + 1 < f.rows; ++i)
        for (std::size_t j = 0; j < f.cols; ++j) EXPECT_LE(f.u[f.index(i, j)], 2 * exact_ball(3, 1.0, f.r[i]));
}

TEST(Solve, SumOfSolutionsIsASupersolution) {
    SolveConfig c;
    c.radial.intervals = 1000;
    c.levels = {1e3, 1e4};
    const auto dom = DomainSpec2D::centered_ball(3, 1.0);
    const auto f = solve(dom, OperatorSpec::laplacian(3), c);
    const auto& u = f.level_fields[0];
    const auto& v = f.level_fields[1];
    std::vector<double> sum(u.size());
    for (std::size_t q = 0; q < u.size(); ++q) sum[q] = u[q] + v[q];
    const auto defect = ball_defect(dom, c, sum);
    const auto own = ball_defect(dom, c, v);
    std::size_t k = 0;
    for (std::size_t q = 0; q < sum.size(); ++q) {
        if (f.fixed[q]) continue;
        const double scale = Exponents{3}.c() * std::pow(sum[q], Exponents{3}.p());
        EXPECT_LE(defect[k] / scale, 1e-8);
        EXPECT_LE(std::abs(own[k]) / scale, 1e-8);
        ++k;
    }
    EXPECT_EQ(k, defect.size());
}

TEST(Solve, HalfSpaceConeMatchesExactSolution) {
    SolveConfig c;
    c.bracket_low = 1.0;
    c.strict_localization = false;
    const auto f = solve(DomainSpec2D::cap_cone(3, pi / 2), OperatorSpec::laplacian(3), c);
    double e = 0;
    for (std::size_t i = 0; i < f.rows; ++i) {
        if (f.r[i] < std::ldexp(1.0, -6) || f.r[i] > 0.25) continue;
        for (std::size_t j = 0; j < f.cols; ++j) {
            const auto q = f.index(i, j);
            if (f.theta[q] > pi / 2 - 0.2) continue;
            e = std::max(e, std::abs(f.u[q] / exact_halfspace(3, f.r[i] * std::cos(f.theta[q])) - 1.0));
        }
    }
    EXPECT_LE(e, 1e-3);
    const auto g = growth_check(f);
    EXPECT_NEAR(g.lower, 1.0, 0.05);
    EXPECT_NEAR(g.upper, 1.0, 0.05);
    // the outer-data bracket shrinks toward the vertex
    EXPECT_LT(bracket_width(f, 0.125), bracket_width(f, 0.25));
}

TEST(Solve, StrictLocalizationRaises) {
    SolveConfig c;
    c.radial_intervals = 48;
    c.angular.intervals = 100;
    c.localization_tolerance = 1e-6;
    try {
        solve(DomainSpec2D::cap_cone(3, pi / 2), OperatorSpec::laplacian(3), c);
        FAIL() << "expected a localization failure";
    } catch (const LocalizationError& e) {
        EXPECT_GT(e.width(), 1e-6);
    }
}

TEST(Solve, PerturbedMetricConeRespectsCurvatureLowerBound) {
    SolveConfig c;
    c.strict_localization = false;
    c.radial_intervals = 64;
    c.angular.intervals = 200;
    const auto g = MetricFamily::conformal_quadratic(3, 0.3);
    const auto f = solve(DomainSpec2D::cap_cone(3, pi / 3), conformal_operator(g), c);
    const auto b = curvature_lower_bound(f, g);
    EXPECT_TRUE(b.holds);
    EXPECT_GT(b.nodes, 100u);
    EXPECT_TRUE(monotone_check(f).monotone);
    const auto gb = growth_check(f);
    EXPECT_TRUE(std::isfinite(gb.upper));
    EXPECT_GT(gb.lower, 0.0);
}

TEST(Solve, RejectsInvalidInput) {
    SolveConfig c;
    c.bracket_low = 2.0;
    c.bracket_high = 0.5;
    EXPECT_THROW(c.validate(), ConfigError);
    SolveConfig d;
    d.levels = {1e3, 1e2};
    EXPECT_THROW(d.validate(), ConfigError);
    EXPECT_THROW(DomainSpec2D::cap_cone(3, pi / 2, 0.5, 0.25).validate(), DomainError);
    EXPECT_THROW(solve(DomainSpec2D::centered_ball(3), drift_operator(3), SolveConfig{}), DomainError);
    EXPECT_THROW(solve(DomainSpec2D::cap_cone(3, pi / 3), drift_operator(3), SolveConfig{}), DomainError);
    EXPECT_THROW(solve(DomainSpec2D::cap_cone(4, pi / 3), OperatorSpec::laplacian(3), SolveConfig{}), DomainError);
}

TEST(FieldCsv, RoundTrip) {
    const auto f = ball(3, 250);
    std::stringstream ss;
    write_field_csv(f, ss);
    const auto g = read_field_csv(ss);
    EXPECT_EQ(g.reduction, Reduction::ball);
    EXPECT_EQ(g.rows, f.rows);
    EXPECT_EQ(g.cols, f.cols);
    EXPECT_EQ(g.level, f.level);
    ASSERT_EQ(g.u.size(), f.u.size());
    for (std::size_t q = 0; q < f.u.size(); q += 37) {
        EXPECT_EQ(g.u[q], f.u[q]);
        EXPECT_EQ(g.d[q], f.d[q]);
        EXPECT_EQ(g.fixed[q], f.fixed[q]);
    }
}
