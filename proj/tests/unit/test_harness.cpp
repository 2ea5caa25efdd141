#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

#include "nlfp/coupling.hpp"
#include "nlfp/harness.hpp"
#include "nlfp/osgood.hpp"

using namespace nlfp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("nlfp_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

json heat_config()
{
    return {{"model", {{"name", "heat"}, {"params", {{"dim", 1}}}}},
            {"N", 64},
            {"dt", 0.01},
            {"T", 0.1},
            {"seed", 3},
            {"record_every", 2},
            {"norm_every", 5},
            {"f0", {{"mixture", {{{"weight", 1.0}, {"mean", 0.0}, {"std", 1.0}}}}}},
            {"g0", {{"perturb", {{"delta2", 0.01}}}}}};
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(NLFP_CLI) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("config parsing and round trip")
{
    const ExperimentConfig c = ExperimentConfig::from_json(heat_config());
    CHECK(c.model == "heat");
    CHECK(c.N == 64);
    CHECK(c.steps() == 10);
    CHECK(c.g0.kind == InitialCondition::Kind::perturbation);
    CHECK(c.g0.delta2 == 0.01);
    CHECK(c.g0.mode == "random");
    const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());

    json plain = heat_config();
    plain["model"] = "euler2d";
    plain["f0"]["mixture"][0]["mean"] = {0.5, -0.5};
    plain.erase("g0");
    const ExperimentConfig e = ExperimentConfig::from_json(plain);
    CHECK(e.model == "euler2d");
    CHECK(e.g0.to_json() == e.f0.to_json());
}

TEST_CASE("invalid configs")
{
    auto bad = [](auto&& edit) {
        json j = heat_config();
        edit(j);
        return j;
    };
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j.erase("model"); })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["model"] = "nope"; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["N"] = 1; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["dt"] = 0.0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["T"] = 0.105; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["T"] = -1.0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["record_every"] = 0; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j.erase("f0"); })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["f0"] = j["g0"]; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["g0"]["perturb"]["mode"] = "spiral"; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["f0"]["mixture"][0]["std"] = -1.0; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["f0"]["mixture"][0]["mean"] = {1.0, 2.0}; })),
                    ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json(bad([](json& j) { j["f0"]["mixture"][0]["cov"] = {{-1.0}}; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["deltas"] = {1e-2, 1e-3}; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["N"] = "many"; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/config.json"), ConfigError);

    const fs::path dir = scratch("badjson");
    std::ofstream(dir / "c.json") << "{ \"model\": ";
    CHECK_THROWS_AS(ExperimentConfig::load((dir / "c.json").string()), ConfigError);
}

TEST_CASE("mixture sampling")
{
    const ModelSpec spec = builtin_model("heat", {{"dim", 2}});
    InitialCondition ic = InitialCondition::from_json(
        {{"mixture", {{{"weight", 3.0}, {"mean", {2.0, 0.0}}, {"std", 0.5}}, {{"weight", 1.0}, {"mean", {-2.0, 1.0}}, {"cov", {{1.0, 0.3}, {0.3, 1.0}}}}}}},
        2, ".");
    const ParticleCloud c = sample_initial(ic, spec, 40000, 9);
    double left = 0, mx = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        mx += c.data[2 * i];
        if (c.data[2 * i] < 0) left += 1;
    }
    // P(component 2) = 1/4; mean of x0 = 0.75 * 2 - 0.25 * 2 = 1
    CHECK(left / 40000.0 == doctest::Approx(0.25).epsilon(0.04));
    CHECK(mx / 40000.0 == doctest::Approx(1.0).epsilon(0.03));
    CHECK(sample_initial(ic, spec, 100, 9).data == sample_initial(ic, spec, 100, 9).data);
    CHECK(sample_initial(ic, spec, 100, 9).data != sample_initial(ic, spec, 100, 10).data);
}

TEST_CASE("perturbations hit the requested mean squared displacement")
{
    const ModelSpec spec = builtin_model("fuzzy-landau", {{"gamma", -2.5}});
    InitialCondition base;
    base.components.push_back({1.0, std::vector<double>(6, 0.0), Eigen::MatrixXd::Identity(6, 6)});
    const ParticleCloud f = sample_initial(base, spec, 200, 1);
    for (const char* mode : {"random", "translate"}) {
        InitialCondition p;
        p.kind = InitialCondition::Kind::perturbation;
        p.delta2 = 1e-3;
        p.mode = mode;
        const ParticleCloud g = sample_initial(p, spec, 200, 2, &f);
        CHECK(plan_cost(f, g, [] {
                  std::vector<int> id(200);
                  for (int i = 0; i < 200; ++i) id[i] = i;
                  return id;
              }()) == doctest::Approx(1e-3).epsilon(1e-12));
    }
}

TEST_CASE("run_experiment with identical initial data stays at zero")
{
    json j = heat_config();
    j.erase("g0");
    const StabilityReport r = run_experiment(ExperimentConfig::from_json(j));
    for (double v : r.d2sq) CHECK(v == 0.0);
    CHECK(r.fitted_C == 0.0);
    CHECK(r.dominated);
}

TEST_CASE("run_experiment outputs are reproducible")
{
    json j = heat_config();
    j["model"] = {{"name", "landau-homogeneous"}, {"params", {{"gamma", -2.0}}}};
    j["f0"]["mixture"][0]["mean"] = 0.0;
    j["N"] = 40;
    j["T"] = 0.04;
    j["snapshot_every"] = 2;
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    ExperimentConfig ca = ExperimentConfig::from_json(j), cb = ca;
    ca.output_dir = a.string();
    cb.output_dir = b.string();
    const StabilityReport ra = run_experiment(ca);
    run_experiment(cb);
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(slurp(a / "d2_series.csv") == slurp(b / "d2_series.csv"));
    int snaps = 0;
    for (const auto& e : fs::directory_iterator(a / "snapshots")) {
        CHECK(slurp(e.path()) == slurp(b / "snapshots" / e.path().filename()));
        ++snaps;
    }
    CHECK(snaps == 2 * 3);
    CHECK(fs::exists(a / "timing.json"));
    CHECK(slurp(a / "report.json").find("wall_clock") == std::string::npos);

    std::istringstream csv(slurp(a / "d2_series.csv"));
    std::string head;
    std::getline(csv, head);
    CHECK(head == "t,d2sq,bound_oracle,bound_H,norm_max,m2f,m2g");

    // plan cost at every refresh is the exact W2
    for (std::size_t q = 0; q < ra.snapshot_t.size(); ++q)
        CHECK(std::abs(ra.snapshot_d2_plan[q] - ra.snapshot_d2_exact[q]) <= 1e-12);
    // fitted bound dominates the series
    for (std::size_t q = 0; q < ra.t.size(); ++q) CHECK(ra.bound_oracle[q] >= ra.d2sq[q]);
    CHECK(ra.dominated);

    const ParticleCloud x0 = read_cloud_csv((a / "snapshots" / "X_0.csv").string());
    CHECK(x0.size() == 40);
    CHECK(x0.n == 3);
}

TEST_CASE("delta scan")
{
    json j = heat_config();
    j["T"] = 0.0;
    const ExperimentConfig c = ExperimentConfig::from_json(j);
    const ScanReport s = delta_scan(c, {1e-4, 1e-3, 1e-2}, 1);
    CHECK(s.slope == doctest::Approx(1.0).epsilon(1e-10));
    // optimal re-pairing can only lower the prescribed displacement
    for (std::size_t q = 0; q < 3; ++q) {
        CHECK(s.d2_initial[q] <= s.deltas[q] * (1 + 1e-12));
        CHECK(s.d2_final[q] == s.d2_initial[q]);
    }

    CHECK_THROWS_AS(delta_scan(c, {1e-4, 1e-2}, 1), ConfigError);
    CHECK_THROWS_AS(delta_scan(c, {1e-4, 1e-3, 5e-3}, 1), ConfigError);
    CHECK_THROWS_AS(delta_scan(c, {1e-2, 1e-3, 1e-4}, 1), ConfigError);
}

TEST_CASE("heat closed form")
{
    CHECK(heat_closed_form(0, 1, 0, 2, 0) == doctest::Approx(1.0));
    for (double t : {0.0, 0.3, 2.0}) CHECK(heat_closed_form(1.0, 1.5, -0.5, 1.5, t) == doctest::Approx(2.25));
    CHECK(heat_dissipation(1.0, 2.0, 0.0) == doctest::Approx(-1.0).epsilon(1e-12));
    for (double t : {0.0, 0.1, 0.7, 3.0}) {
        const double a = std::sqrt(1 + 2 * t), b = std::sqrt(4 + 2 * t);
        CHECK(heat_dissipation(1.0, 2.0, t) == doctest::Approx(-2 * (a - b) * (a - b) / (a * b)).epsilon(1e-12));
    }
    const HeatReport r = heat_dissipation_check(0, 1, 0, 2, {0.0, 0.2}, 400, 7, 0.05, 4);
    CHECK(r.monotone);
    CHECK(r.derivative_match);
    CHECK(r.derivative[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK_THROWS_AS(heat_dissipation_check(0, -1, 0, 2, {0.0}), InvalidArgument);
}

TEST_CASE("fit_osgood_constant recovers a known constant")
{
    const double x0 = 1e-3, T = 0.5, C0 = 0.8;
    const Sampled m{{0.0, 0.5}, {1.0, 2.0}};
    const OsgoodResult o = osgood_solve(x0, m, C0, T, 4000);
    std::vector<double> t, target;
    for (int k = 0; k <= 10; ++k) {
        t.push_back(0.05 * k);
        target.push_back(o.at(0.05 * k));
    }
    CHECK(fit_osgood_constant(x0, t, target, m.t, m.v, T) == doctest::Approx(C0).epsilon(1e-6));
    const std::vector<double> flat(t.size(), x0);
    CHECK(fit_osgood_constant(x0, t, flat, m.t, m.v, T) == 0.0);
}

TEST_CASE("vortex check on a short horizon")
{
    ParticleCloud v(3, 2);
    v.data = {0.0, 0.0, 1.0, 0.0, 0.3, 0.8};
    const VortexReport r = vortex_check(v, 1e-6, 1e-3, 0.2, 4, 10);
    CHECK(r.reversibility_error < 1e-9);
    CHECK(r.t.size() == 21);
    CHECK(r.d2sq.front() == doctest::Approx(1e-6).epsilon(1e-10));
    CHECK(r.fitted_C >= 0.0);
}

TEST_CASE("weak residual refinement on a small ladder")
{
    const RefinementReport r = weak_residual_refinement(0.04, 100, 2, 0.4, 8, 5);
    CHECK(r.functions.size() == 3);
    CHECK(r.residual.size() == 2);
    CHECK(r.N[1] == 400);
    CHECK(r.dt[1] == 0.02);
}

TEST_CASE("selftest suites")
{
    CHECK(run_selftest("osgood").pass());
    CHECK_THROWS_AS(run_selftest("bogus"), InvalidArgument);
}

TEST_CASE("CLI exit codes")
{
    const fs::path dir = scratch("cli");
    CHECK(run_cli("run --config /nonexistent.json") == 1);
    json j = heat_config();
    j["T"] = 0.105;
    std::ofstream(dir / "bad.json") << j.dump();
    CHECK(run_cli("run --config " + (dir / "bad.json").string()) == 1);
    j["T"] = 0.02;
    std::ofstream(dir / "good.json") << j.dump();
    CHECK(run_cli("run --config " + (dir / "good.json").string() + " --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "report.json"));
    CHECK(run_cli("scan --config " + (dir / "good.json").string() + " --deltas 1e-4,1e-3") == 1);
    CHECK(run_cli("selftest --suite bogus") == 1);
    CHECK(run_cli("heatcheck --s1 -1") == 1);
    // too few particles for the 5% empirical check
    CHECK(run_cli("heatcheck --particles 10 --replicates 1") == 2);
    CHECK(run_cli("selftest --suite osgood") == 0);
}
