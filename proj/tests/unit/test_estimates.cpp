#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlfp/estimates.hpp"

using namespace nlfp;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("radial densities")
{
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    CHECK(ball(0.5) == doctest::Approx(3.0 / (4.0 * kPi)));
    CHECK(ball(1.5) == 0.0);
    CHECK(ball.lp_norm(1.0) == doctest::Approx(1.0));
    CHECK(ball.lp_norm(3.0) == doctest::Approx(std::pow(3.0 / (4.0 * kPi), 2.0 / 3.0)));
    CHECK(ball.lp_norm(std::numeric_limits<double>::infinity()) == doctest::Approx(3.0 / (4.0 * kPi)));

    const RadialDensity g = RadialDensity::gaussian(0.7);
    // mass by independent 1-D quadrature of 4 pi r^2 h(r)
    const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double r) { return 4 * kPi * r * r * g(r); }, 0.0, 12.0, 10, 1e-13);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    // ||N(0, s^2 I_3)||_2^2 = (4 pi s^2)^{-3/2}
    CHECK(g.lp_norm(2.0) == doctest::Approx(std::pow(4 * kPi * 0.49, -0.75)).epsilon(1e-12));
}

TEST_CASE("sphere means")
{
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    // sphere fully inside the ball
    CHECK(ball.sphere_mean(0.2, 0.3) == doctest::Approx(3.0 / (4.0 * kPi)));
    // sphere fully outside
    CHECK(ball.sphere_mean(3.0, 0.5) == 0.0);
    // sphere centred at the origin sees h(rho)
    const RadialDensity g = RadialDensity::gaussian(1.0);
    CHECK(g.sphere_mean(0.0, 0.8) == doctest::Approx(g(0.8)).epsilon(1e-10));
}

TEST_CASE("singular integrals of the unit ball")
{
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    for (double s : {0.0, 0.3, 0.9, 2.0}) CHECK(singular_integral_radial(ball, 0.0, s) == doctest::Approx(1.0).epsilon(1e-10));
    // int_0^1 3 r^2 r^{-1} dr and int_0^1 3 r^2 r^{-2} dr
    CHECK(singular_integral_radial(ball, 1.0, 0.0) == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(singular_integral_radial(ball, 2.0, 0.0) == doctest::Approx(3.0).epsilon(1e-9));
    // outside the ball the beta = 1 potential is the point mass potential 1/s
    CHECK(singular_integral_radial(ball, 1.0, 2.5) == doctest::Approx(1.0 / 2.5).epsilon(1e-9));
    // inside: (3 - s^2) / 2
    CHECK(singular_integral_radial(ball, 1.0, 0.5) == doctest::Approx((3.0 - 0.25) / 2.0).epsilon(1e-9));
    for (double eps : {0.05, 0.3}) {
        const double near = singular_integral_near(ball, 1.0, 0.4, eps);
        const double far = singular_integral_far(ball, 1.0, 0.4, eps);
        CHECK(near + far == doctest::Approx(singular_integral_radial(ball, 1.0, 0.4)).epsilon(1e-9));
        // ball of radius eps inside the support: 3/(4 pi) * 4 pi eps^2 / 2
        CHECK(near == doctest::Approx(1.5 * eps * eps).epsilon(1e-9));
    }
}

TEST_CASE("singular integral of a particle cloud")
{
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    const ParticleCloud cloud = ball.sample(20000, 3);
    ParticleCloud eval(3, 3);
    eval.data = {0, 0, 0, 0.5, 0, 0, 0, 0, 2.0};
    const auto b0 = singular_integral(cloud, 0.0, eval);
    for (double v : b0.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    const auto b1 = singular_integral(cloud, 1.0, eval);
    CHECK(b1.values[0] == doctest::Approx(1.5).epsilon(0.03));
    CHECK(b1.values[1] == doctest::Approx(1.375).epsilon(0.03));
    CHECK(b1.values[2] == doctest::Approx(0.5).epsilon(0.02));

    // monotone in beta at a point inside the support
    double prev = 0;
    for (double beta : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
        const double v = singular_integral(cloud, beta, eval).values[1];
        CHECK(v >= prev);
        prev = v;
    }

    ParticleCloud self(1, 3);
    self.data = {cloud.data[0], cloud.data[1], cloud.data[2]};
    CHECK(singular_integral(cloud, 1.0, self).skipped == 1);
}

TEST_CASE("sing_int lemma on the unit ball")
{
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    const std::vector<double> eps = {0.01, 0.02, 0.05, 0.1, 0.2};
    const auto r31 = verify_sing_int_lemma(ball, 3.0, 1.0, eps);
    REQUIRE(r31.size() == 3);
    CHECK(r31[0].lemma_id == "sing_int");
    CHECK(r31[0].pass);
    CHECK(r31[1].pass);
    CHECK(r31[1].data.at("slope").get<double>() == doctest::Approx(2.0).epsilon(0.025));
    CHECK(r31[2].pass);
    // bounded density: near part scales like eps^{3 - beta}, so alpha = 2 misses alpha - beta
    const auto r21 = verify_sing_int_lemma(ball, 2.0, 1.0, eps);
    CHECK_FALSE(r21[1].pass);
    CHECK(r21[1].data.at("slope").get<double>() == doctest::Approx(2.0).epsilon(0.025));
    CHECK_THROWS_AS(verify_sing_int_lemma(ball, 2.0, 2.5, eps), InvalidArgument);
}

TEST_CASE("coefficient estimates")
{
    const ParticleCloud f = RadialDensity::gaussian(1.0).sample(300, 4);
    const ModelSpec hard = builtin_model("landau-homogeneous", {{"gamma", -2.0}});
    const EstimateReport s = verify_coefficient_estimate(hard, f, "sigma_sq", {4, {}, 2});
    CHECK(s.pass);
    CHECK(std::isfinite(s.sup_ratio));

    const ModelSpec lip = builtin_model("landau-homogeneous", {{"gamma", 0.0}});
    const EstimateReport l = verify_coefficient_estimate(lip, f, "sigma_sq", {4, {}, 2});
    CHECK(l.pass);
    CHECK(l.params.at("shape") == "lipschitz");

    const ModelSpec soft = builtin_model("landau-homogeneous", {{"gamma", -1.0}});
    CHECK_THROWS_AS(verify_coefficient_estimate(soft, f, "sigma_sq"), InvalidArgument);
    CHECK_THROWS_AS(verify_coefficient_estimate(hard, f, "nope"), InvalidArgument);
}

TEST_CASE("soft-case estimate")
{
    const ParticleCloud f = RadialDensity::gaussian(1.0).sample(400, 5);
    const std::vector<double> eps = {0.05, 0.1, 0.2, 0.4, 0.8};
    const ModelSpec soft = builtin_model("landau-homogeneous", {{"gamma", -1.0}});
    const EstimateReport r = verify_soft_case_estimate(soft, f, eps, "sigma", {4, {}, 3});
    CHECK(r.pass);
    CHECK(r.params.at("exponent").get<double>() == 0.5);
    // near region must decay at least as fast as the eps^{alpha^2/2} term
    CHECK(r.data.at("region_slope").get<double>() >= 0.45);
    CHECK_THROWS_AS(verify_soft_case_estimate(soft, f, eps, "b"), InvalidArgument);
    CHECK_THROWS_AS(verify_soft_case_estimate(builtin_model("landau-homogeneous", {{"gamma", -2.0}}), f, eps, "sigma"),
                    InvalidArgument);
}
