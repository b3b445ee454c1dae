#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lnb/pipeline.hpp"

using namespace lnb;

namespace {

RatioField synthetic(const std::function<double(double)>& f, double lo, double hi) {
    RatioField out;
    for (double r = lo; r <= hi; r *= 1.05) {
        out.radius.push_back(r);
        out.value.push_back(f(r));
    }
    return out;
}

BlowupProfile half_sphere(int n, int intervals) {
    TruncationSchedule s;
    s.interior_tolerance = 1e-8;
    GridSpec g;
    g.intervals = intervals;
    return solve_profile(SphericalDomain1D::cap(pi / 2), n, s, g);
}

EigenResult with_mu(double mu) {
    EigenResult e;
    e.mu = mu;
    return e;
}

CaseConfig ball_case() {
    CaseConfig c;
    c.label = "ball";
    c.fixture = "ball";
    c.n = 3;
    c.solve.radial.intervals = 2000;
    return c;
}

}  // namespace

TEST(FitRate, RecoversPowerLaw) {
    const auto fit = fit_rate(synthetic([](double r) { return 3 * r * r; }, 1e-4, 1.0), std::ldexp(1.0, -10), 0.5);
    EXPECT_NEAR(fit.alpha, 2.0, 1e-3);
    EXPECT_NEAR(fit.C, 3.0, 0.05);
    EXPECT_GT(fit.r2, 0.9999);
    EXPECT_EQ(fit.table.size(), 9u);
    EXPECT_FALSE(fit.log_preferred);
}

TEST(FitRate, PrefersLogModelForLogarithmicDecay) {
    const auto fit = fit_rate(synthetic([](double r) { return r * r * std::abs(std::log(r)); }, 1e-5, 0.5),
                              std::ldexp(1.0, -14), std::ldexp(1.0, -2));
    EXPECT_TRUE(fit.log_preferred);
    EXPECT_NEAR(fit.log_alpha, 2.0, 1e-2);
    const auto row = verify_theorem(cone_theorem_case("log", with_mu(2.0)), fit);
    EXPECT_EQ(row.spec.predicted_form, regime_exponent(2.0).describe());
    EXPECT_NEAR(row.measured, fit.log_alpha, 1e-15);
    EXPECT_TRUE(row.pass);
}

TEST(FitRate, RejectsDegenerateWindows) {
    const auto f = synthetic([](double r) { return r; }, 0.1, 1.0);
    EXPECT_THROW(fit_rate(f, 1e-3, 1.0), DomainError);
    EXPECT_THROW(fit_rate(f, 0.1, 0.8), DomainError);
    EXPECT_THROW(fit_rate(f, 0.5, 0.1), DomainError);
}

TEST(RatioField, BallDecaysLinearlyTowardTheBoundary) {
    const auto c = ball_case();
    const auto f = solve(c.domain(), c.op(), c.solve);
    const auto ratio = compare_to_cone(f, detail::reference_for(c, half_sphere(3, 400)));
    ASSERT_FALSE(ratio.value.empty());
    const auto [lo, hi] = detail::fit_window(c, f);
    const auto fit = fit_rate(ratio, lo, hi);
    EXPECT_NEAR(fit.alpha, 1.0, 0.1);
    const auto row = verify_theorem(curved_theorem_case("ball"), fit);
    EXPECT_TRUE(row.pass);
    EXPECT_LE(row.measured, 1.3);
    // the fitted rate is insensitive to the choice of dyadic window
    EXPECT_NEAR(fit_rate(ratio, 2 * lo, 2 * hi).alpha, fit.alpha, 0.05);
    EXPECT_NEAR(fit_rate(ratio, lo, hi / 2).alpha, fit.alpha, 0.05);
}

TEST(VerifyTheorem, SharpUpperBoundAndSlack) {
    RateFit fit;
    fit.alpha = 1.5;
    EXPECT_FALSE(verify_theorem(curved_theorem_case("fast"), fit).pass);
    fit.alpha = 0.85;
    EXPECT_TRUE(verify_theorem(curved_theorem_case("slack"), fit).pass);
    fit.alpha = 0.75;
    EXPECT_FALSE(verify_theorem(curved_theorem_case("slow"), fit).pass);
    auto spec = cone_theorem_case("outside", with_mu(3.0));
    spec.outside_theorem = true;
    fit.alpha = 2.0;
    const auto row = verify_theorem(spec, fit);
    EXPECT_TRUE(row.pass);
    EXPECT_NE(row.note.find("outside"), std::string::npos);
}

TEST(Certificates, TwiceBallSupersolution) {
    for (double C : {0.0, 0.5, 2.0}) {
        const auto op = C == 0 ? OperatorSpec::laplacian(3) : saturating_operator(3, C);
        const auto cert = search_twice_ball(op);
        EXPECT_TRUE(cert.pass) << "C = " << C;
        EXPECT_GT(cert.margin, 0.0);
        EXPECT_GT(cert.nodes, 1000u);
        // re-validation on a denser sample keeps the sign and most of the margin
        const auto dense = certify_twice_ball(op, cert.constants.at("R"), 4000);
        EXPECT_TRUE(dense.pass);
        EXPECT_GE(dense.margin, 0.5 * cert.margin);
    }
}

TEST(Certificates, CorrectorBarrier) {
    EXPECT_EQ(corrector_exponent(5), 0.0);
    EXPECT_DOUBLE_EQ(corrector_exponent(8), 1.0 / 3.0);
    for (int n : {3, 6, 8}) {
        const auto op = OperatorSpec::laplacian(n);
        const auto cert = search_corrector_barrier(op);
        ASSERT_TRUE(cert.pass) << "n = " << n;
        const auto dense = certify_corrector_barrier(op, cert.constants.at("A"), cert.constants.at("B"),
                                                     cert.constants.at("R"), 3000);
        EXPECT_TRUE(dense.pass);
        EXPECT_GE(dense.margin, 0.5 * cert.margin);
    }
}

TEST(Certificates, ConeBarriersOnTheHalfSphere) {
    const auto p = half_sphere(3, 800);
    const auto e = first_eigenpair(p);
    const auto fine = half_sphere(3, 1600);
    const auto ef = first_eigenpair(fine);
    for (int sign : {+1, -1}) {
        const auto cert = search_cone_barrier(p, e, sign);
        ASSERT_TRUE(cert.pass) << "sign " << sign;
        const ConeBarrier b{e.regime,          cert.constants.at("A0"), cert.constants.at("A1"),
                            cert.constants.at("A2"), cert.constants.at("r0"), sign};
        const auto dense = certify_cone_barrier(fine, ef, b, 96);
        EXPECT_TRUE(dense.pass);
        EXPECT_GE(dense.margin, 0.5 * cert.margin);
    }
}

TEST(Certificates, CandidateFailsForSubsolution) {
    // u_R/2 satisfies Δw < c w^p nowhere: the defect has the wrong sign everywhere
    const auto op = OperatorSpec::laplacian(3);
    const auto reg = ball_region(3, Vec::Zero(3), 1.0, 2.0, 500);
    const auto cert = certify_candidate(op, [](const Vec& x) { return 0.5 * exact_ball(3, 1.0, x); }, reg, "half");
    EXPECT_FALSE(cert.pass);
    EXPECT_LT(cert.margin, 0.0);
}

TEST(ConeBarrierField, RotationInvariance) {
    const auto p = half_sphere(3, 1600);
    const auto e = first_eigenpair(p);
    const ConeBarrier b{e.regime, 1e-2, 1e-2, 1e-2, 0.5, +1};
    const ConeBarrierField field(p, e, b);
    Vec y(3);
    y << 0.1, 0.0, 0.2;
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    EXPECT_NEAR(field(y), field(R * y), 1e-12 * field(y));
    EXPECT_THROW((void)field(Vec(Eigen::Vector3d(0.1, 0.0, -0.2))), DomainError);
}

TEST(Reports, MarkdownAndSvg) {
    const auto fit = fit_rate(synthetic([](double r) { return r; }, 1e-3, 1.0), std::ldexp(1.0, -8), 0.5);
    const auto row = verify_theorem(curved_theorem_case("demo"), fit);
    BarrierCertificate cert;
    cert.label = "2u_R";
    cert.region = "B";
    cert.margin = 0.5;
    cert.pass = true;
    cert.constants["R"] = 1;
    std::ostringstream md, svg, csv;
    write_markdown_report({row}, {cert}, md);
    EXPECT_NE(md.str().find("| demo | curved boundary | C|x|"), std::string::npos);
    EXPECT_NE(md.str().find("R=1 "), std::string::npos);
    write_svg_plot(fit, "demo", svg);
    EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
    EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
    write_rate_csv(fit, csv);
    const auto text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), long(fit.table.size()) + 1);
}
