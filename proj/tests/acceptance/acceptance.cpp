// Runs the 14 acceptance criteria; one PASS/FAIL line each. Exit code 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nlfp/coupling.hpp"
#include "nlfp/estimates.hpp"
#include "nlfp/harness.hpp"
#include "nlfp/osgood.hpp"
#include "nlfp/transport.hpp"

using namespace nlfp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const SelftestCheck& find_check(const SelftestResult& r, const std::string& name)
{
    for (const auto& c : r.checks)
        if (c.name == name) return c;
    throw std::runtime_error("missing selftest check " + name);
}

// all named checks must pass; details joined
Outcome from_checks(const SelftestResult& r, const std::vector<std::string>& names)
{
    Outcome o{true, ""};
    for (const auto& n : names) {
        const SelftestCheck& c = find_check(r, n);
        o.pass = o.pass && c.pass;
        if (!o.detail.empty()) o.detail += "; ";
        o.detail += n + (c.pass ? " ok" : " FAILED") + (c.detail.empty() ? "" : " (" + c.detail + ")");
    }
    return o;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

InitialCondition standard_normal(int n)
{
    InitialCondition ic;
    ic.components.push_back({1.0, std::vector<double>(n, 0.0), Eigen::MatrixXd::Identity(n, n)});
    return ic;
}

Outcome ot_exactness()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> pickN(1, 7), pickd(1, 6);
    double worst = 0;
    for (int s = 0; s < 200; ++s) {
        const std::size_t N = pickN(rng);
        const int d = pickd(rng);
        ParticleCloud f(N, d), h(N, d);
        for (double& v : f.data) v = g(rng);
        for (double& v : h.data) v = 2.0 * g(rng) + 0.5;
        std::vector<int> perm(N);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double c = 0;
            for (std::size_t i = 0; i < N; ++i)
                for (int q = 0; q < d; ++q) {
                    const double e = f.data[i * d + q] - h.data[perm[i] * d + q];
                    c += e * e;
                }
            best = std::min(best, c / static_cast<double>(N));
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst = std::max(worst, std::abs(w2_exact(f, h).cost - best));
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-12 && secs < 5.0, "max |exact - brute| " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome perfect_coupling()
{
    const ModelSpec spec = builtin_model("fuzzy-landau", {{"gamma", -2.5}});
    const ParticleCloud f0 = sample_initial(standard_normal(6), spec, 512, 5);
    CoupledState st = init_coupled(f0, f0, 17, default_eps_cut(f0, spec));
    bool zero = st.plan.cost == 0.0;
    int bad = 0;
    for (int s = 0; s < 500; ++s) {
        step_coupled(st, spec, spec, 1e-3);
        if (!(st.plan.cost == 0.0 && st.X.data == st.Y.data)) {
            zero = false;
            ++bad;
        }
    }
    return {zero, "500 steps, N = 512, steps with nonzero d2: " + std::to_string(bad)};
}

Outcome stability_slope(const fs::path& config_dir)
{
    const auto t0 = Clock::now();
    const ExperimentConfig fz = ExperimentConfig::load((config_dir / "fuzzy_scan.json").string());
    const ScanReport a = delta_scan(fz, fz.deltas);
    const ExperimentConfig ms = ExperimentConfig::load((config_dir / "multispecies_scan.json").string());
    const ScanReport b = delta_scan(ms, ms.deltas);
    const double secs = seconds_since(t0);
    const bool ok_a = a.slope > 0.5 && a.slope <= 1.05;
    const bool ok_b = std::abs(b.slope - 1.0) <= 0.1;
    return {ok_a && ok_b && secs < 600.0, "fuzzy slope " + fmt(a.slope) + " (CI " + fmt(a.ci_low) + ".." +
                                              fmt(a.ci_high) + "), multispecies gamma=0 slope " + fmt(b.slope) +
                                              ", " + fmt(secs) + " s"};
}

// median over seed pairs of W2(coupled X, single) / W2(single, single), same f0, independent noise
double marginal_ratio(const ModelSpec& spec, int n, int pairs)
{
    const int steps = 50;
    const double dt = 1e-3;
    std::vector<double> ratios;
    for (int p = 0; p < pairs; ++p) {
        const std::uint64_t base = 1000 + 7 * p;
        const ParticleCloud f0 = sample_initial(standard_normal(n), spec, 512, base);
        InitialCondition pert;
        pert.kind = InitialCondition::Kind::perturbation;
        pert.delta2 = 1e-2;
        const ParticleCloud g0 = sample_initial(pert, spec, 512, base + 1, &f0);
        const double eps = default_eps_cut(f0, spec);
        CoupledState st = init_coupled(f0, g0, base + 2, eps);
        ParticleCloud s1 = f0, s2 = f0;
        for (int s = 0; s < steps; ++s) {
            step_coupled(st, spec, spec, dt);
            s1 = step_single(s1, spec, dt, base + 3, s, eps);
            s2 = step_single(s2, spec, dt, base + 4, s, eps);
        }
        const double num = std::sqrt(w2_exact(st.X, s1).cost);
        const double den = std::sqrt(w2_exact(s1, s2).cost);
        ratios.push_back(num / den);
    }
    return median(ratios);
}

Outcome marginal_consistency()
{
    const double rh = marginal_ratio(builtin_model("heat", {{"dim", 3}}), 3, 20);
    const double rf = marginal_ratio(builtin_model("fuzzy-landau", {{"gamma", -2.5}}), 6, 20);
    return {rh <= 1.5 && rf <= 1.5, "median W2 ratio heat " + fmt(rh) + ", fuzzy " + fmt(rf) + " (T = 0.05)"};
}

Outcome heat_criterion()
{
    const HeatReport r = heat_dissipation_check(0, 1, 0, 2, {0.0, 0.1, 0.25, 0.5});
    double worst = 0;
    for (double e : r.rel_error) worst = std::max(worst, e);
    const bool d0 = std::abs(r.derivative[0] + 1.0) <= 1e-6;
    return {r.pass && d0, std::string("monotone ") + (r.monotone ? "yes" : "no") + ", derivative(0) " +
                              fmt(r.derivative[0]) + ", max empirical rel error " + fmt(worst)};
}

Outcome singular_integrals()
{
    const RadialDensity ball = RadialDensity::uniform_ball(1.0);
    const std::vector<double> eps = {0.01, 0.02, 0.05, 0.1, 0.2};
    Outcome o{true, ""};
    for (auto [a, b] : {std::pair{2.0, 1.0}, std::pair{3.0, 1.0}, std::pair{3.0, 2.0}}) {
        const auto reps = verify_sing_int_lemma(ball, a, b, eps);
        const double slope = reps[1].data.at("slope").get<double>();
        const bool ok = std::abs(slope - (a - b)) <= 0.05;
        o.pass = o.pass && ok;
        o.detail += "(" + fmt(a) + "," + fmt(b) + ") slope " + fmt(slope) + (ok ? "" : " != " + fmt(a - b)) + "; ";
    }
    const double i1 = singular_integral_radial(ball, 1.0, 0.0);
    const double i2 = singular_integral_radial(ball, 2.0, 0.0);
    o.pass = o.pass && std::abs(i1 - 1.5) <= 1e-3 && std::abs(i2 - 3.0) <= 1e-3;
    o.detail += "I1 " + fmt(i1) + ", I2 " + fmt(i2);
    if (!o.pass)
        o.detail += ". Known: a bounded density makes the near-region integral scale like eps^(3-beta), "
                    "so (2,1) gives 2, not 1";
    return o;
}

Outcome soft_case()
{
    // a sparse cloud leaves the eps balls nearly empty and region_slope noisy
    const ParticleCloud f = RadialDensity::gaussian(1.0).sample(4000, 5);
    const std::vector<double> eps = {0.05, 0.1, 0.2, 0.4, 0.8};
    Outcome o{true, ""};
    for (double a : {0.5, 1.0, 1.5}) {
        const ModelSpec spec = builtin_model("landau-homogeneous", {{"gamma", -a}});
        const EstimateReport r = verify_soft_case_estimate(spec, f, eps, "sigma", {8, {}, 3});
        const double expo = a * a / 2.0;
        const double s2 = r.data.at("second_term_slope").get<double>();
        const double sr = r.data.at("region_slope").get<double>();
        // the fitted term's slope is expo by construction; the near region must decay at least that fast
        const bool ok = r.pass && std::abs(s2 - expo) <= 0.05 && sr >= expo - 0.05;
        o.pass = o.pass && ok;
        o.detail += "alpha " + fmt(a) + ": term slope " + fmt(s2) + ", region slope " + fmt(sr) + ", expected " +
                    fmt(expo) + (ok ? "" : " FAILED") + "; ";
    }
    o.detail.resize(o.detail.size() - 2);
    return o;
}

Outcome weak_residual()
{
    const RefinementReport r = weak_residual_refinement(0.02, 200, 4, 0.2, 32, 13);
    std::string d;
    for (std::size_t f = 0; f < r.functions.size(); ++f) {
        d += r.functions[f] + ":";
        for (std::size_t l = 0; l < r.residual.size(); ++l) d += " " + fmt(r.residual[l][f]);
        d += "; ";
    }
    d.resize(d.size() - 2);
    return {r.strictly_decreasing, d};
}

Outcome point_vortex()
{
    ParticleCloud v(3, 2);
    v.data = {0.0, 0.0, 1.0, 0.0, 0.3, 0.8};
    // one perturbation is not evidence; every seed has to validate
    const int seeds = 20;
    int validated = 0, zero_C = 0;
    double rev = 0, worst = 0;
    for (int s = 1; s <= seeds; ++s) {
        const VortexReport r = vortex_check(v, 1e-6, 1e-4, 1.0, s, 100);
        rev = std::max(rev, r.reversibility_error);
        validated += r.validated;
        zero_C += r.fitted_C == 0.0;
        for (std::size_t q = 0; q < r.t.size(); ++q) worst = std::max(worst, r.d2sq[q] / r.bound[q]);
    }
    Outcome o{rev <= 1e-6 && validated == seeds,
              "reversibility " + fmt(rev) + ", validated " + std::to_string(validated) + "/" + std::to_string(seeds) +
                  " perturbations (C_hat = 0 in " + std::to_string(zero_C) + "), max d2/bound " + fmt(worst)};
    if (!o.pass && rev <= 1e-6)
        o.detail += ". Known: d2 is quasi-periodic for point vortices, so a C_hat fitted on the first quarter "
                    "misses later rises";
    return o;
}

Outcome determinism(const fs::path& config_dir)
{
    const fs::path root = fs::temp_directory_path() / "nlfp_acceptance_det";
    fs::remove_all(root);
    Outcome o{true, ""};
    nlohmann::json heat = {{"model", {{"name", "heat"}, {"params", {{"dim", 2}}}}},
                           {"N", 200}, {"dt", 0.01}, {"T", 0.2}, {"seed", 4}, {"snapshot_every", 5},
                           {"f0", {{"mixture", {{{"weight", 1.0}, {"mean", 0.0}, {"std", 1.0}}}}}},
                           {"g0", {{"perturb", {{"delta2", 0.01}}}}}};
    std::vector<std::pair<std::string, ExperimentConfig>> cases = {
        {"fuzzy", ExperimentConfig::load((config_dir / "small_fuzzy.json").string())},
        {"heat", ExperimentConfig::from_json(heat)}};
    int files = 0;
    for (auto& [name, cfg] : cases) {
        ExperimentConfig a = cfg, b = cfg;
        a.output_dir = (root / name / "a").string();
        b.output_dir = (root / name / "b").string();
        run_experiment(a);
        run_experiment(b);
        for (const auto& e : fs::recursive_directory_iterator(a.output_dir)) {
            if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
            const fs::path rel = fs::relative(e.path(), a.output_dir);
            ++files;
            if (slurp(e.path()) != slurp(fs::path(b.output_dir) / rel)) {
                o.pass = false;
                o.detail += name + "/" + rel.string() + " differs; ";
            }
        }
    }
    fs::remove_all(root);
    o.detail += std::to_string(files) + " files compared (report.json, CSVs, snapshots)";
    return o;
}

}  // namespace

int main()
{
    const fs::path config_dir = fs::path(NLFP_SOURCE_DIR) / "configs";
    // computed on first use so the timing lands on criterion 2 and 4
    std::optional<SelftestResult> kernels_cache, osgood_cache;
    auto kernels = [&]() -> const SelftestResult& {
        if (!kernels_cache) kernels_cache = run_selftest("kernels");
        return *kernels_cache;
    };
    auto osg = [&]() -> const SelftestResult& {
        if (!osgood_cache) osgood_cache = run_selftest("osgood");
        return *osgood_cache;
    };

    struct Criterion {
        std::string name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"ot_exactness", ot_exactness},
        {"kernel_algebra",
         [&] {
             return from_checks(kernels(), {"sigma_sigma_T_equals_phi", "projection_properties", "b_j_orthogonal",
                                          "div_b_j_zero", "homogeneity"});
         }},
        {"commutator_tables",
         [&] { return from_checks(kernels(), {"fuzzy_commutator_table", "multispecies_commutator_table"}); }},
        {"osgood_consistency",
         [&] {
             Outcome o = from_checks(osg(), {"h_matches_ode_branches_1_3", "branch_1_2_continuity"});
             const SelftestCheck& b4 = find_check(osg(), "branch_4_vs_ode");
             o.detail += "; branch 4 " + std::string(b4.known_issue ? "(known) " : "") + b4.detail;
             return o;
         }},
        {"psi_inequalities", [&] { return from_checks(osg(), {"psi_inequalities", "psi_junction"}); }},
        {"perfect_coupling", perfect_coupling},
        {"stability_slope", [&] { return stability_slope(config_dir); }},
        {"marginal_consistency", marginal_consistency},
        {"heat_dissipation", heat_criterion},
        {"singular_integral", singular_integrals},
        {"soft_case_exponent", soft_case},
        {"weak_residual", weak_residual},
        {"point_vortex", point_vortex},
        {"determinism", [&] { return determinism(config_dir); }},
    };

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << (k + 1) << " " << criteria[k].name << " [" << fmt(seconds_since(t0))
                  << " s]: " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
