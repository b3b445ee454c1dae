#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "lnb/geometry.hpp"
#include "lnb/operator.hpp"

using namespace lnb;

namespace {

Vec point(std::initializer_list<double> v) {
    Vec x(int(v.size()));
    int i = 0;
    for (double c : v) x[i++] = c;
    return x;
}

/// Frame whose last row is e_1: the graph variable y_n is x_1.
Mat frame_last_is_first(int n) {
    Mat Q = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) Q(i, i + 1) = 1.0;
    Q(n - 1, 0) = 1.0;
    return Q;
}

/// Minimum of |x − (y', f(y'))| over a uniform grid of y' with step h.
double brute_force_distance(const GraphSurface& s, const Vec& x, double lo0, double hi0, double lo1, double hi1, double h) {
    double best = std::numeric_limits<double>::infinity();
    Vec y(2);
    for (double a = lo0; a <= hi0; a += h)
        for (double b = lo1; b <= hi1; b += h) {
            y << a, b;
            const double f = s.f(y);
            best = std::min(best, std::sqrt(sqr(x[0] - a) + sqr(x[1] - b) + sqr(x[2] - f)));
        }
    return best;
}

}  // namespace

TEST(SignedDistance, CoordinatePlane) {
    const auto P = GraphSurface::plane(3);
    EXPECT_NEAR(signed_distance(P, point({0, 0, 0.3})), 0.3, 1e-14);
    EXPECT_EQ(signed_distance(P, point({0.7, 0, 0})), 0.0);
    EXPECT_NEAR(signed_distance(P, point({0.1, -0.2, -0.05})), -0.05, 1e-14);
}

TEST(SignedDistance, ParaboloidMatchesBruteForceFootPoint) {
    const auto S = GraphSurface::paraboloid(3);
    const Vec x = point({0.1, 0, 0.05});
    const double oracle = brute_force_distance(S, x, 0.0, 0.15, -0.02, 0.02, 1e-4);
    const double d = signed_distance(S, x);
    EXPECT_GT(d, 0.0);
    EXPECT_NEAR(d, oracle, 1e-7);
    // below the graph the sign flips
    EXPECT_LT(signed_distance(S, point({0.1, 0, 0.0})), 0.0);
}

TEST(SignedDistance, SphereAlongAxis) {
    const auto S = GraphSurface::sphere(3, 1.0);
    EXPECT_NEAR(signed_distance(S, point({0, 0, 0.2})), 0.2, 1e-12);
    const Vec x = point({0.05, 0.02, 0.1});
    const Vec c = point({0, 0, 1});
    EXPECT_NEAR(signed_distance(S, x), 1.0 - (x - c).norm(), 1e-10);
}

TEST(TangentCone, Classification) {
    const auto one = tangent_cone({GraphSurface::plane(3)});
    EXPECT_EQ(one.tag, ConeTag::halfspace);
    EXPECT_NEAR((one.axis - point({0, 0, 1})).norm(), 0.0, 1e-14);

    const auto two = tangent_cone({GraphSurface::plane(3), GraphSurface::plane(3, frame_last_is_first(3))});
    EXPECT_EQ(two.tag, ConeTag::wedge);
    EXPECT_NEAR(two.aperture, pi / 2, 1e-12);

    const auto par = tangent_cone({GraphSurface::paraboloid(3)});
    EXPECT_EQ(par.tag, ConeTag::halfspace);
    EXPECT_NEAR((par.axis - point({0, 0, 1})).norm(), 0.0, 1e-12);

    EXPECT_THROW(tangent_cone({GraphSurface::plane(3), GraphSurface::plane(3)}), DomainError);
}

TEST(DiffeoT, PlanesGiveIdentity) {
    const auto T = DiffeoT::build({GraphSurface::plane(3), GraphSurface::plane(3, frame_last_is_first(3))});
    for (const Vec& x : {point({0.05, 0.02, 0.1}), point({-0.1, 0.1, 0.03}), point({0, 0, 0})}) {
        EXPECT_NEAR((T.apply(x) - x).norm(), 0.0, 1e-14);
        EXPECT_NEAR((T.jacobian(x) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    }
}

TEST(DiffeoT, SphereAxialPointMapsToAxis) {
    const auto T = DiffeoT::build({GraphSurface::sphere(3, 1.0)});
    const Vec xb = T.apply(point({0, 0, 0.05}));
    EXPECT_NEAR((xb - point({0, 0, 0.05})).norm(), 0.0, 1e-12);
}

TEST(DiffeoT, PreservesSignedDistances) {
    const auto T = DiffeoT::build({GraphSurface::sphere(3, 1.0)});
    EXPECT_THROW(T.apply(point({0.1, 0, 0.1})), DomainError);  // outside r_T for a unit sphere
    const auto& fan = T.fan();
    for (const Vec& x : {point({0.05, 0, 0.05}), point({0.03, -0.04, 0.02}), point({-0.06, 0.01, 0.01})}) {
        const Vec xb = T.apply(x);
        EXPECT_LE(std::abs(signed_distance(T.surfaces()[0], x) - fan.normals()[0].dot(xb)), 1e-8 * (1 + x.norm()));
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(fan.completion()[j].dot(x), fan.completion()[j].dot(xb), 1e-12);
    }
}

TEST(DiffeoT, JacobianAtOriginIsIdentity) {
    const std::vector<std::vector<GraphSurface>> fixtures{
        {GraphSurface::sphere(3, 1.0)},
        {GraphSurface::paraboloid(3)},
        {GraphSurface::paraboloid(4, 0.5)},
        {GraphSurface::sphere(3, 2.0), GraphSurface::paraboloid(3, 1.0, frame_last_is_first(3))},
    };
    for (const auto& s : fixtures) {
        const auto T = DiffeoT::build(s);
        const int n = s.front().dimension();
        EXPECT_LE((T.jacobian(Vec::Zero(n)) - Mat::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(DiffeoT, JacobianDeviationBoundedByCurvatureTimesRadius) {
    const auto T = DiffeoT::build({GraphSurface::sphere(3, 1.0)});
    const Vec x = point({0.05, 0, 0.05});
    const Mat J = T.jacobian(x);
    EXPECT_LE(jacobian_richardson_gap(T, x), 1e-6);
    const double dev = (J - Mat::Identity(3, 3)).cwiseAbs().maxCoeff();
    EXPECT_GT(dev, 0.0);
    EXPECT_LE(dev, 3.0 * T.surfaces()[0].c2_seminorm() * x.norm());
}

TEST(DiffeoT, DisplacementIsQuadratic) {
    const std::vector<std::vector<GraphSurface>> fixtures{
        {GraphSurface::sphere(3, 1.0)},
        {GraphSurface::paraboloid(3)},
        {GraphSurface::sphere(3, 2.0), GraphSurface::paraboloid(3, 1.0, frame_last_is_first(3))},
    };
    for (const auto& s : fixtures) {
        const auto T = DiffeoT::build(s);
        for (const Vec& dir : {point({1, 0.3, 1}), point({0.2, -1, 0.7})}) {
            const auto fit = displacement_slope(T, dir, 1e-3, 0.5 * T.radius());
            EXPECT_GE(fit.slope, 1.9);
        }
    }
}

TEST(DiffeoT, CompositionErrorStableUnderRefinement) {
    const auto T = DiffeoT::build({GraphSurface::sphere(3, 1.0)});
    auto f = [](const Vec& y) { return std::pow(y.norm(), -0.5); };
    for (const Vec& x : {point({0.02, 0.01, 0.04}), point({-0.03, 0.0, 0.05})}) {
        const auto coarse = composition_error(T, f, x, 1e-3 * x.norm());
        const auto fine = composition_error(T, f, x, 5e-4 * x.norm());
        const double c1 = coarse.error / coarse.scale, c2 = fine.error / fine.scale;
        EXPECT_LT(c2, 10.0);
        EXPECT_NEAR(c1, c2, 0.1 * std::max(c1, c2) + 1e-3);
    }
}

TEST(DiffeoT, PositiveDistancesLieInsideTheDomain) {
    // Ω = ball of radius 1 centred at e_3 intersected with {x_1 > paraboloid}
    const auto T = DiffeoT::build({GraphSurface::sphere(3, 1.0), GraphSurface::paraboloid(3, 1.0, frame_last_is_first(3))});
    int inside = 0;
    for (int s = 1; s <= 400; ++s) {
        const Vec x = 0.9 * T.radius() * MetricFamily::halton_point(s, 3) / std::sqrt(3.0);
        const Vec d = T.distances(x);
        if (d[0] > 0 && d[1] > 0) {
            ++inside;
            EXPECT_LT((x - point({0, 0, 1})).norm(), 1.0);
            EXPECT_GT(x[0], sqr(x[1]) + sqr(x[2]));
        }
    }
    EXPECT_GT(inside, 10);
}

TEST(Samples, CsvColumns) {
    const auto T = DiffeoT::build({GraphSurface::plane(3)});
    std::ostringstream os;
    write_samples_csv(T, {point({0.1, 0.2, 0.3})}, os);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "x1,x2,x3,d1");
}
