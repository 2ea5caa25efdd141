#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "nlfp/model_core.hpp"

using namespace nlfp;

TEST_CASE("builtin fuzzy-landau layout")
{
    const ModelSpec s = builtin_model("fuzzy-landau", {{"gamma", -2.0}});
    CHECK(s.n == 6);
    CHECK(s.d == 3);
    CHECK(s.k == 1);
    CHECK(s.alpha == 2.0);
    CHECK(s.p() == doctest::Approx(3.0));
    CHECK(s.block_offsets == std::vector<int>{0});
}

TEST_CASE("builtin euler2d")
{
    const ModelSpec s = builtin_model("euler2d");
    CHECK(s.n == 2);
    CHECK(s.d == 2);
    CHECK(s.k == 1);
    // kernel ~ |x|^{-1} in 2D, so p = d/(d - alpha) with alpha = 2 is infinite
    CHECK(s.alpha == 2.0);
    CHECK(std::isinf(s.p()));
    CHECK(s.m_eval(Eigen::VectorXd::Ones(2)).norm() == 0.0);
    CHECK(s.c_eval(Eigen::VectorXd::Ones(2)).norm() == 0.0);
}

TEST_CASE("builtin multispecies gamma 0 is Lipschitz")
{
    const ModelSpec s = builtin_model("multispecies-landau", {{"gamma", 0.0}, {"masses", {1.0, 1.0}}});
    CHECK(s.alpha == 0.0);
    CHECK(s.n == 6);
    CHECK(s.noise_dim == 12);
    const AssumptionReport r = verify_assumptions(s, 2000, 4);
    CHECK(r.pass);
}

TEST_CASE("unknown model and bad params")
{
    CHECK_THROWS_AS(builtin_model("nope"), InvalidArgument);
    CHECK_THROWS_AS(builtin_model("fuzzy-landau", {{"gamma", -4.0}}), InvalidArgument);
    CHECK_THROWS_AS(builtin_model("heat", {{"dim", 0}}), InvalidArgument);
}

TEST_CASE("verify_assumptions for every builtin")
{
    for (const auto& name : builtin_model_names()) {
        CAPTURE(name);
        const AssumptionReport r = verify_assumptions(builtin_model(name), 1000, 2);
        CHECK(r.pass);
        CHECK(std::isfinite(r.ratio_b));
        CHECK(std::isfinite(r.ratio_lip));
    }
}

TEST_CASE("gamma -3 drift near the singularity stays below K")
{
    const ModelSpec s = builtin_model("landau-homogeneous", {{"gamma", -3.0}});
    Eigen::VectorXd z(3);
    z << 1e-3, 0, 0;
    // b = 2 landau_b, so |b| = 4 |z|^{-2}; bound weight 1 + |z|^{1-alpha} = 1 + |z|^{-2}
    const double ratio = s.b_eval(z).norm() / (1.0 + std::pow(1e-3, -2.0));
    CHECK(ratio <= s.K);
    CHECK(ratio == doctest::Approx(4.0).epsilon(1e-5));
}

TEST_CASE("marginal picks the velocity block of the fuzzy layout")
{
    const ModelSpec s = builtin_model("fuzzy-landau");
    ParticleCloud c(1, 6);
    for (int q = 0; q < 6; ++q) c.data[q] = q + 1;
    const ParticleCloud m = marginal(c, s, 0);
    CHECK(m.n == 3);
    CHECK(m.data == std::vector<double>{1, 2, 3});

    const ModelSpec h = builtin_model("heat", {{"dim", 2}});
    ParticleCloud c2(3, 2);
    for (std::size_t q = 0; q < c2.data.size(); ++q) c2.data[q] = 0.5 * q;
    CHECK(marginal(c2, h, 0).data == c2.data);
    CHECK(select_coordinates(c, {5, 0}).data == std::vector<double>{6, 1});
}

TEST_CASE("second moment")
{
    ParticleCloud z(4, 2);
    CHECK(second_moment(z) == 0.0);
    ParticleCloud two(2, 2);
    two.data = {1, 0, 0, 1};
    CHECK(second_moment(two) == 1.0);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    ParticleCloud big(100000, 3);
    for (double& v : big.data) v = g(rng);
    CHECK(second_moment(big) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("KDE norms")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    ParticleCloud c(10000, 1);
    for (double& v : c.data) v = g(rng);
    // ||N(0,1)||_2 = (2 sqrt(pi))^{-1/2}
    const double l2 = 1.0 / std::sqrt(2.0 * std::sqrt(std::numbers::pi));
    CHECK(lp_norm_estimate(c, 2.0, 0.2) == doctest::Approx(l2).epsilon(0.05));

    ParticleCloud one(1, 2);
    one.data = {0.3, -1.0};
    CHECK(lp_norm_estimate(one, 1.0, 0.5) == doctest::Approx(1.0).epsilon(1e-6));

    std::uniform_real_distribution<double> u(0.0, 1.0);
    ParticleCloud un(20000, 1);
    for (double& v : un.data) v = u(rng);
    CHECK(lp_norm_estimate(un, std::numeric_limits<double>::infinity()) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("cloud CSV round trip is exact")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    ParticleCloud c(17, 5);
    for (double& v : c.data) v = g(rng) * 1e-7 + g(rng);
    std::stringstream ss;
    write_cloud_csv(ss, c);
    const ParticleCloud back = read_cloud_csv(ss);
    CHECK(back.n == 5);
    CHECK(back.data == c.data);
}

TEST_CASE("malformed CSV is rejected")
{
    std::stringstream ragged("t,x0,x1\n0,1,2\n0,3\n");
    CHECK_THROWS_AS(read_cloud_csv(ragged), InvalidArgument);
    std::stringstream header("a,b\n1,2\n");
    CHECK_THROWS_AS(read_cloud_csv(header), InvalidArgument);
}

TEST_CASE("format_double round trips")
{
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(parse_double(format_double(x)) == x);
}

TEST_CASE("noise field is a pure function of its indices")
{
    NoiseField a(42), b(42), c(43);
    double x[6], y[6], z[6];
    a.normals(a.key(1, 2, 3), 0, x, 6);
    b.normals(b.key(1, 2, 3), 0, y, 6);
    c.normals(c.key(1, 2, 3), 0, z, 6);
    for (int q = 0; q < 6; ++q) {
        CHECK(x[q] == y[q]);
        CHECK(x[q] != z[q]);
    }
    double w[3];
    a.normals(a.key(1, 2, 4), 0, w, 3);
    CHECK(w[0] != x[0]);
}
