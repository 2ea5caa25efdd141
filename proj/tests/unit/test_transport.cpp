#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "nlfp/transport.hpp"

using namespace nlfp;

namespace {

ParticleCloud gaussian_cloud(std::size_t N, int d, std::mt19937_64& rng, double shift = 0.0)
{
    std::normal_distribution<double> g;
    ParticleCloud c(N, d);
    for (double& v : c.data) v = g(rng) + shift;
    return c;
}

double brute(const ParticleCloud& f, const ParticleCloud& g)
{
    std::vector<int> p(f.size());
    std::iota(p.begin(), p.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            for (int q = 0; q < f.n; ++q) {
                const double d = f.data[i * f.n + q] - g.data[p[i] * g.n + q];
                c += d * d;
            }
        best = std::min(best, c / static_cast<double>(p.size()));
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

}  // namespace

TEST_CASE("identical clouds give identity pairing and zero cost")
{
    std::mt19937_64 rng(1);
    const ParticleCloud f = gaussian_cloud(40, 3, rng);
    const TransportPlan p = w2_exact(f, f);
    CHECK(p.cost == 0.0);
    for (int i = 0; i < 40; ++i) CHECK(p.pairing[i] == i);
}

TEST_CASE("single point")
{
    ParticleCloud f(1, 2), g(1, 2);
    f.data = {1.0, 2.0};
    g.data = {-0.5, 4.0};
    CHECK(w2_exact(f, g).cost == doctest::Approx(1.5 * 1.5 + 4.0));
}

TEST_CASE("matches brute force on small clouds")
{
    std::mt19937_64 rng(2);
    for (int s = 0; s < 60; ++s) {
        const std::size_t N = 2 + s % 6;
        const int d = 1 + s % 5;
        const ParticleCloud f = gaussian_cloud(N, d, rng), g = gaussian_cloud(N, d, rng, 0.3);
        const TransportPlan p = w2_exact(f, g);
        CHECK(std::abs(p.cost - brute(f, g)) < 1e-12);
        CHECK_NOTHROW(validate_plan(p, N));
        CHECK(p.cost == doctest::Approx(plan_cost(f, g, p.pairing)).epsilon(1e-14));
    }
}

TEST_CASE("one-dimensional sort path agrees with the generic solver")
{
    std::mt19937_64 rng(3);
    const ParticleCloud f = gaussian_cloud(300, 1, rng), g = gaussian_cloud(300, 1, rng, 1.0);
    AssignmentSolver solver;
    const double generic = w2_exact(f, g, solver).cost;
    CHECK(w2_exact(f, g).cost == doctest::Approx(generic).epsilon(1e-12));
}

TEST_CASE("warm start after column permutation")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nz;
    ParticleCloud f = gaussian_cloud(80, 3, rng), g = gaussian_cloud(80, 3, rng);
    AssignmentSolver solver;
    for (int it = 0; it < 6; ++it) {
        const TransportPlan p = w2_exact(f, g, solver);
        CHECK(p.cost == doctest::Approx(w2_exact(f, g).cost).epsilon(1e-12));
        ParticleCloud y(g.size(), g.n);
        for (std::size_t i = 0; i < g.size(); ++i)
            std::copy_n(g.data.begin() + p.pairing[i] * g.n, g.n, y.data.begin() + i * g.n);
        g = y;
        solver.permute_columns(p.pairing);
        for (double& v : g.data) v += 0.02 * nz(rng);
        for (double& v : f.data) v += 0.02 * nz(rng);
    }
}

TEST_CASE("entropic cost")
{
    std::mt19937_64 rng(5);
    const ParticleCloud f = gaussian_cloud(16, 2, rng), g = gaussian_cloud(16, 2, rng, 0.8);
    const double exact = w2_exact(f, g).cost;
    const EntropicResult e = w2_entropic(f, g, 1e-3 * (1.0 + exact), 200000, 1e-6);
    CHECK(e.converged);
    CHECK(e.marginal_error < 1e-6);
    CHECK(e.cost == doctest::Approx(exact).epsilon(0.02));

    const double e_same = w2_entropic(f, f, 0.05, 200000, 1e-6).cost;
    CHECK(e_same < w2_entropic(f, f, 0.2, 200000, 1e-6).cost);
    CHECK(e_same >= 0.0);
}

TEST_CASE("validate_plan")
{
    CHECK_THROWS_AS(validate_plan(TransportPlan{{0, 0, 1}, 0, 0}, 3), InvalidArgument);
    CHECK_THROWS_AS(validate_plan(TransportPlan{{0, 1}, 0, 0}, 3), InvalidArgument);
    CHECK_THROWS_AS(validate_plan(TransportPlan{{0, 1, 3}, 0, 0}, 3), InvalidArgument);
    CHECK_THROWS_AS(validate_plan(TransportPlan{{0, 1, 2}, -1.0, 0}, 3), InvalidArgument);
    CHECK_NOTHROW(validate_plan(TransportPlan{{2, 0, 1}, 0.5, 0}, 3));

    std::mt19937_64 rng(9);
    const ParticleCloud f = gaussian_cloud(12, 3, rng), g = gaussian_cloud(12, 3, rng);
    TransportPlan p = w2_exact(f, g);
    CHECK(validate_plan(p, f, g));
    TransportPlan dup = p;
    dup.pairing[0] = dup.pairing[1];
    CHECK_FALSE(validate_plan(dup, f, g));
    p.cost *= 1.001;
    CHECK_FALSE(validate_plan(p, f, g));
}

TEST_CASE("plan CSV round trip")
{
    std::mt19937_64 rng(6);
    const ParticleCloud f = gaussian_cloud(25, 2, rng), g = gaussian_cloud(25, 2, rng);
    TransportPlan p = w2_exact(f, g);
    std::stringstream ss;
    write_plan_csv(ss, p);
    const TransportPlan back = read_plan_csv(ss);
    CHECK(back.pairing == p.pairing);
    CHECK(back.cost == p.cost);
}

TEST_CASE("mismatched clouds are rejected")
{
    ParticleCloud a(3, 2), b(4, 2), c(3, 3);
    CHECK_THROWS_AS(w2_exact(a, b), InvalidArgument);
    CHECK_THROWS_AS(w2_exact(a, c), InvalidArgument);
}
