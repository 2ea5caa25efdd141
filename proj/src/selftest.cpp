#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/special_functions/bessel.hpp>

#include "nlfp/coupling.hpp"
#include "nlfp/estimates.hpp"
#include "nlfp/harness.hpp"
#include "nlfp/kernels.hpp"
#include "nlfp/osgood.hpp"
#include "nlfp/transport.hpp"

namespace nlfp {

bool SelftestResult::pass() const
{
    return std::all_of(checks.begin(), checks.end(), [](const SelftestCheck& c) { return c.pass || c.known_issue; });
}

std::vector<std::string> selftest_suites() { return {"kernels", "transport", "osgood", "estimates", "coupling"}; }

namespace {

std::string fmt(double v) { return format_double(v); }

Vec3 random_vec(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double scale = std::pow(10.0, u(rng));
    return scale * Vec3(g(rng), g(rng), g(rng));
}

SelftestResult kernels_suite()
{
    SelftestResult r{"kernels", {}};
    std::mt19937_64 rng(11);
    const double gammas[] = {-3.0, -2.5, -2.0, -1.0, 0.0};
    double worst = 0, proj = 0, orth = 0;
    for (int s = 0; s < 10000; ++s) {
        const Vec3 z = random_vec(rng);
        const double g = gammas[s % 5];
        const Mat3 S = landau_sigma(z, g);
        worst = std::max(worst, (S * S.transpose() - landau_phi(z, g)).norm() / std::pow(z.norm(), 2 + g));
        const Mat3 P = projection(z);
        proj = std::max({proj, (P * z).norm() / z.norm(), (P * P - P).norm(), (P - P.transpose()).norm(),
                         std::abs(P.trace() - 2.0)});
        for (int j = 0; j < 3; ++j) orth = std::max(orth, std::abs(b_field(j, z).dot(z)) / z.squaredNorm());
    }
    r.checks.push_back({"sigma_sigma_T_equals_phi", worst <= 1e-12, false, "max scaled error " + fmt(worst)});
    r.checks.push_back({"projection_properties", proj <= 1e-13, false, "max error " + fmt(proj)});
    r.checks.push_back({"b_j_orthogonal", orth <= 1e-14, false, "max |b_j.z|/|z|^2 " + fmt(orth)});

    double div = 0;
    for (int s = 0; s < 100; ++s) {
        const Vec3 z = random_vec(rng);
        for (int j = 0; j < 3; ++j) {
            double acc = 0;
            for (int q = 0; q < 3; ++q) {
                Vec3 e = Vec3::Zero();
                e[q] = 1e-3;
                acc += (b_field(j, z + e)[q] - b_field(j, z - e)[q]) / 2e-3;
            }
            div = std::max(div, std::abs(acc));
        }
    }
    r.checks.push_back({"div_b_j_zero", div <= 1e-8, false, "max |div| " + fmt(div)});

    double hom = 0;
    for (int s = 0; s < 200; ++s) {
        const Vec3 z = random_vec(rng) / 10.0 + Vec3(0.5, 0, 0);
        const double g = gammas[s % 5];
        const double lam = 2.7;
        hom = std::max(hom, (landau_b(lam * z, g) - std::pow(lam, 1 + g) * landau_b(z, g)).norm() / landau_b(lam * z, g).norm());
        hom = std::max(hom, (landau_sigma(lam * z, g) - std::pow(lam, 1 + g / 2) * landau_sigma(z, g)).norm() /
                                landau_sigma(lam * z, g).norm());
    }
    r.checks.push_back({"homogeneity", hom <= 1e-12, false, "max relative error " + fmt(hom)});

    // fuzzy table: [e^_i, b~_j] = coef * e^_idx
    const int f_idx[3][3] = {{-1, 2, 1}, {2, -1, 0}, {1, 0, -1}};
    const double f_coef[3][3] = {{0, -2, 2}, {2, 0, -2}, {-2, 2, 0}};
    double ferr = 0;
    std::normal_distribution<double> gn;
    for (int s = 0; s < 100; ++s) {
        Eigen::VectorXd p(12);
        for (int q = 0; q < 12; ++q) p[q] = gn(rng);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const auto bj = fuzzy_b_tilde(j);
                Eigen::VectorXd expect = Eigen::VectorXd::Zero(12);
                if (f_idx[i][j] >= 0) expect = f_coef[i][j] * fuzzy_frame('^', f_idx[i][j]);
                ferr = std::max(ferr, (lie_bracket(constant_field(fuzzy_frame('^', i)), bj, p) - expect).norm());
                for (char k : {'~', 'x', 'e'})
                    ferr = std::max(ferr, lie_bracket(constant_field(fuzzy_frame(k, i)), bj, p).norm());
            }
    }
    r.checks.push_back({"fuzzy_commutator_table", ferr <= 1e-8, false, "max error " + fmt(ferr)});

    // multispecies table: [e_{i,q}, b_k^{i,j}] = sign (e_{i,idx}/m_i - xi_{j,idx}/m_j)
    const int m_idx[3][3] = {{-1, 2, 1}, {2, -1, 0}, {1, 0, -1}};
    const double m_sign[3][3] = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
    const std::vector<double> masses = {1.0, 2.5, 0.7};
    const int ns = 3;
    double merr = 0;
    for (int s = 0; s < 100; ++s) {
        Eigen::VectorXd p(6 * ns);
        for (int q = 0; q < 6 * ns; ++q) p[q] = gn(rng);
        const int i = s % ns, j = (s / ns) % ns;
        for (int k = 0; k < 3; ++k) {
            const auto b = multispecies_b(i, j, k, masses);
            for (int q = 0; q < 3; ++q) {
                Eigen::VectorXd expect = Eigen::VectorXd::Zero(6 * ns);
                if (m_idx[q][k] >= 0)
                    expect = m_sign[q][k] * (multispecies_e(i, m_idx[q][k], ns) / masses[i] -
                                             multispecies_xi(j, m_idx[q][k], ns) / masses[j]);
                const Eigen::VectorXd got = lie_bracket(constant_field(multispecies_e(i, q, ns)), b, p);
                merr = std::max(merr, (got - expect).norm());
                merr = std::max(merr, (lie_bracket(constant_field(multispecies_xi(j, q, ns)), b, p) + got).norm());
                for (int l = 0; l < ns; ++l) {
                    if (l != i) merr = std::max(merr, lie_bracket(constant_field(multispecies_e(l, q, ns)), b, p).norm());
                    if (l != j) merr = std::max(merr, lie_bracket(constant_field(multispecies_xi(l, q, ns)), b, p).norm());
                }
            }
        }
    }
    r.checks.push_back({"multispecies_commutator_table", merr <= 1e-8, false, "max error " + fmt(merr)});

    double kerr = 0;
    for (double x : {1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0}) {
        const double ref = boost::math::cyl_bessel_k(1, x);
        kerr = std::max(kerr, std::abs(bessel_k1(x) - ref) / ref);
    }
    r.checks.push_back({"bessel_k1", kerr <= 1e-8, false, "max relative error " + fmt(kerr)});

    const double th = cutoff_theta(1.5, 1.0);
    r.checks.push_back({"cutoff_midpoint", std::abs(th - 0.5) <= 1e-15, false, "theta(1.5 eps) = " + fmt(th)});
    return r;
}

double brute_force(const ParticleCloud& f, const ParticleCloud& g)
{
    std::vector<int> perm(f.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        best = std::min(best, plan_cost(f, g, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

SelftestResult transport_suite()
{
    SelftestResult r{"transport", {}};
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g;
    double worst = 0;
    for (int s = 0; s < 200; ++s) {
        const std::size_t N = 1 + s % 7;
        const int d = 1 + (s / 7) % 6;
        ParticleCloud f(N, d), h(N, d);
        for (double& v : f.data) v = g(rng);
        for (double& v : h.data) v = g(rng);
        worst = std::max(worst, std::abs(w2_exact(f, h).cost - brute_force(f, h)));
    }
    r.checks.push_back({"brute_force_oracle", worst < 1e-12, false, "max error " + fmt(worst)});

    double warm = 0;
    for (int s = 0; s < 20; ++s) {
        const std::size_t N = 60;
        ParticleCloud f(N, 3), h(N, 3);
        for (double& v : f.data) v = g(rng);
        for (double& v : h.data) v = g(rng);
        AssignmentSolver solver;
        for (int it = 0; it < 5; ++it) {
            for (double& v : h.data) v += 0.05 * g(rng);
            const double a = w2_exact(f, h, solver).cost;
            const double b = w2_exact(f, h).cost;
            warm = std::max(warm, std::abs(a - b));
        }
    }
    r.checks.push_back({"warm_start_matches_cold", warm < 1e-12, false, "max error " + fmt(warm)});

    ParticleCloud f(30, 2), h(30, 2);
    for (double& v : f.data) v = g(rng);
    for (double& v : h.data) v = g(rng) + 0.5;
    const double exact = w2_exact(f, h).cost;
    const double e1 = w2_entropic(f, h, 0.2).cost;
    const double e2 = w2_entropic(f, h, 0.05).cost;
    const bool ok = e1 >= exact - 1e-9 && e2 >= exact - 1e-9 && std::abs(e2 - exact) < std::abs(e1 - exact);
    r.checks.push_back({"entropic_approaches_exact", ok, false,
                        "exact " + fmt(exact) + ", reg 0.2 " + fmt(e1) + ", reg 0.05 " + fmt(e2)});

    bool rejects = false;
    try {
        validate_plan(TransportPlan{{0, 0, 1}, 0, 0}, 3);
    } catch (const InvalidArgument&) {
        rejects = true;
    }
    r.checks.push_back({"validate_plan_rejects_duplicates", rejects, false, ""});
    return r;
}

SelftestResult osgood_suite()
{
    SelftestResult r{"osgood", {}};
    double worst = 0;
    int used = 0;
    for (int a = 0; a < 50; ++a) {
        const double x = std::pow(10.0, -8.0 + 8.7 * a / 49.0);
        for (int b = 0; b < 50; ++b) {
            const double y = 0.02 + 3.0 * b / 49.0;
            if (h_branch(x, y) > 3) continue;
            const double ode = osgood_solve(x, Sampled::constant(1.0), 1.0, y, 20000).final();
            worst = std::max(worst, std::abs(ode - h_bound(x, y)) / h_bound(x, y));
            ++used;
        }
    }
    r.checks.push_back({"h_matches_ode_branches_1_3", worst <= 1e-6, false,
                        "max relative error " + fmt(worst) + " over " + std::to_string(used) + " points"});

    double jump = 0;
    for (int b = 0; b < 50; ++b) {
        const double y = 0.05 + 2.0 * b / 49.0;
        const double x = std::exp(-std::exp(y));
        const double h1 = std::pow(x, std::exp(-y));
        const double h2 = std::exp(y - 1.0) / (-std::log(x));
        jump = std::max(jump, std::abs(h1 - h2));
    }
    r.checks.push_back({"branch_1_2_continuity", jump <= 1e-9, false, "max jump " + fmt(jump)});

    bool ineq = true;
    for (int a = 0; a < 200; ++a)
        for (int b = 0; b < 200; ++b) {
            const double u = 10.0 * a / 199.0, v = 10.0 * b / 199.0;
            if (u * psi(v) > psi(u * u) + psi(v * v) || u * psi(u) > psi(u * u)) ineq = false;
        }
    r.checks.push_back({"psi_inequalities", ineq, false, "200x200 grid on [0,10]^2"});
    r.checks.push_back({"psi_junction", psi(kInvE) == kInvE, false, "psi(1/e) = " + fmt(psi(kInvE))});

    // branch 4 does not solve the ODE; reported only
    const double x4 = 0.5, y4 = 1.0;
    const double ode4 = osgood_solve(x4, Sampled::constant(1.0), 1.0, y4, 20000).final();
    r.checks.push_back({"branch_4_vs_ode", std::abs(ode4 - h_bound(x4, y4)) <= 1e-6 * ode4, true,
                        "known discrepancy: H(0.5,1) = " + fmt(h_bound(x4, y4)) + ", ODE gives " + fmt(ode4)});
    return r;
}

SelftestResult estimates_suite()
{
    SelftestResult r{"estimates", {}};
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    const double i1 = singular_integral_radial(ball, 1.0, 0.0);
    const double i2 = singular_integral_radial(ball, 2.0, 0.0);
    r.checks.push_back({"centre_integrals", std::abs(i1 - 1.5) <= 1e-3 && std::abs(i2 - 3.0) <= 1e-3, false,
                        "I1 = " + fmt(i1) + ", I2 = " + fmt(i2)});
    const std::vector<double> eps = {0.01, 0.02, 0.05, 0.1, 0.2};
    for (auto [a, b] : {std::pair{3.0, 1.0}, std::pair{3.0, 2.0}, std::pair{2.0, 1.0}}) {
        const auto reps = verify_sing_int_lemma(ball, a, b, eps);
        const double slope = reps[1].data.at("slope").get<double>();
        const bool known = a < 3.0;
        r.checks.push_back({"sing_int_eps_" + fmt(a) + "_" + fmt(b), reps[1].pass, known && !reps[1].pass,
                            "slope " + fmt(slope) + " expected " + fmt(a - b) +
                                (known ? " (bounded density scales like eps^(3-beta))" : "")});
        r.checks.push_back({"sing_int_log_" + fmt(a) + "_" + fmt(b), reps[2].pass, false,
                            "C " + fmt(reps[2].fitted_C)});
    }

    const ModelSpec lh = builtin_model("landau-homogeneous", {{"gamma", -2.5}});
    const ParticleCloud f = RadialDensity::gaussian(1.0).sample(400, 5);
    const EstimateReport cs = verify_coefficient_estimate(lh, f, "sigma_sq", {4, {}, 3});
    r.checks.push_back({"coefficient_sigma_sq_hard", cs.pass, false, "sup ratio " + fmt(cs.sup_ratio)});
    return r;
}

SelftestResult coupling_suite()
{
    SelftestResult r{"coupling", {}};
    const ModelSpec spec = builtin_model("fuzzy-landau", {{"gamma", -2.5}});
    InitialCondition ic;
    ic.components.push_back({1.0, std::vector<double>(6, 0.0), Eigen::MatrixXd::Identity(6, 6)});
    const ParticleCloud f0 = sample_initial(ic, spec, 48, 3);
    const double eps = default_eps_cut(f0, spec);

    CoupledState st = init_coupled(f0, f0, 9, eps);
    bool zero = st.plan.cost == 0.0;
    for (int s = 0; s < 30; ++s) {
        step_coupled(st, spec, spec, 1e-3);
        zero = zero && st.plan.cost == 0.0 && st.X.data == st.Y.data;
    }
    r.checks.push_back({"perfect_coupling", zero, false, "48 particles, 30 steps"});

    CoupledState a = init_coupled(f0, f0, 4, eps), b = init_coupled(f0, f0, 4, eps);
    ParticleCloud single = f0;
    for (int s = 0; s < 10; ++s) {
        step_coupled(a, spec, spec, 1e-3);
        step_coupled(b, spec, spec, 1e-3);
        single = step_single(single, spec, 1e-3, 4, s, eps);
    }
    r.checks.push_back({"deterministic", a.X.data == b.X.data && a.Y.data == b.Y.data, false, ""});
    r.checks.push_back({"x_marginal_is_single_run", a.X.data == single.data, false, ""});

    InitialCondition pert;
    pert.kind = InitialCondition::Kind::perturbation;
    pert.delta2 = 1e-2;
    const ParticleCloud g0 = sample_initial(pert, spec, 48, 8, &f0);
    CoupledState c = init_coupled(f0, g0, 5, eps);
    double gap = 0;
    for (int s = 0; s < 10; ++s) {
        step_coupled(c, spec, spec, 1e-3);
        gap = std::max(gap, std::abs(c.plan.cost - w2_exact(c.X, c.Y).cost));
    }
    r.checks.push_back({"plan_cost_is_exact_w2", gap <= 1e-12, false, "max gap " + fmt(gap)});

    const ModelSpec heat = builtin_model("heat", {{"dim", 1}});
    InitialCondition h1;
    h1.components.push_back({1.0, {0.0}, Eigen::MatrixXd::Identity(1, 1)});
    const auto traj = simulate_single(sample_initial(h1, heat, 200, 2), heat, 0.01, 20, 6);
    const PicardResult pic = picard_diagnostics(traj, heat, 0.01, 4, 50, 7);
    r.checks.push_back({"picard_not_diverged", !pic.diverged, false, "rho " + nlohmann::json(pic.rho).dump()});
    return r;
}

}  // namespace

SelftestResult run_selftest(const std::string& suite)
{
    if (suite == "kernels") return kernels_suite();
    if (suite == "transport") return transport_suite();
    if (suite == "osgood") return osgood_suite();
    if (suite == "estimates") return estimates_suite();
    if (suite == "coupling") return coupling_suite();
    throw InvalidArgument("unknown selftest suite '" + suite + "'");
}

}  // namespace nlfp
