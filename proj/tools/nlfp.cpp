#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlfp/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitSelftest = 3;

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(nlfp::parse_double(item));
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"particle coupling experiments for nonlinear Fokker-Planck equations"};
    app.require_subcommand(1);

    std::string config_path, out_dir, deltas_arg, suite;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;

    auto* run = app.add_subcommand("run", "run one coupled stability experiment");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) { seed_set = true; });
    run->add_option("--out", out_dir, "output directory");

    auto* scan = app.add_subcommand("scan", "delta scan: slope of log d2(T) against log d2(0)");
    scan->add_option("--config", config_path, "experiment config (JSON)")->required();
    scan->add_option("--deltas", deltas_arg, "initial d2^2 values, comma separated");
    scan->add_option("--out", out_dir, "output directory");
    scan->add_option("--workers", workers, "parallel runs (0: hardware threads)");

    auto* self = app.add_subcommand("selftest", "run a module invariant suite");
    self->add_option("--suite", suite, "kernels | transport | osgood | estimates | coupling | all")->required();

    double mu1 = 0, s1 = 1, mu2 = 0, s2 = 2;
    std::string times = "0,0.1,0.25,0.5";
    int replicates = 32;
    std::size_t particles = 2000;
    auto* heat = app.add_subcommand("heatcheck", "Gaussian heat-flow dissipation check");
    heat->add_option("--mu1", mu1);
    heat->add_option("--s1", s1);
    heat->add_option("--mu2", mu2);
    heat->add_option("--s2", s2);
    heat->add_option("--times", times, "comma separated");
    heat->add_option("--particles", particles);
    heat->add_option("--replicates", replicates, "independent noise draws averaged per time");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            nlfp::ExperimentConfig cfg = nlfp::ExperimentConfig::load(config_path);
            if (seed_set) cfg.seed = seed;
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            const auto rep = nlfp::run_experiment(cfg);
            std::cout << "model " << rep.model << "  d2sq(0) " << nlfp::format_double(rep.d2sq_initial) << "  sup d2sq "
                      << nlfp::format_double(*std::max_element(rep.d2sq.begin(), rep.d2sq.end())) << "  fitted C "
                      << nlfp::format_double(rep.fitted_C) << "  dominated " << (rep.dominated ? "yes" : "no") << '\n';
            if (!cfg.output_dir.empty()) std::cout << "wrote " << cfg.output_dir << '\n';
            return kExitOk;
        }
        if (*scan) {
            nlfp::ExperimentConfig cfg = nlfp::ExperimentConfig::load(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            const std::vector<double> deltas = deltas_arg.empty() ? cfg.deltas : parse_list(deltas_arg);
            const auto rep = nlfp::delta_scan(cfg, deltas, workers);
            std::cout << rep.to_json().dump(2) << '\n';
            return kExitOk;
        }
        if (*self) {
            std::vector<std::string> suites = suite == "all" ? nlfp::selftest_suites() : std::vector<std::string>{suite};
            bool ok = true;
            for (const auto& s : suites) {
                const auto res = nlfp::run_selftest(s);
                for (const auto& c : res.checks)
                    std::cout << (c.pass ? "PASS " : (c.known_issue ? "KNOWN " : "FAIL ")) << s << '.' << c.name
                              << (c.detail.empty() ? "" : "  " + c.detail) << '\n';
                ok = ok && res.pass();
            }
            return ok ? kExitOk : kExitSelftest;
        }
        if (*heat) {
            const auto rep = nlfp::heat_dissipation_check(mu1, s1, mu2, s2, parse_list(times), particles, 7, 0.05, replicates);
            std::cout << rep.to_json().dump(2) << '\n';
            return rep.pass ? kExitOk : kExitNumerical;
        }
    } catch (const nlfp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlfp::InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlfp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}
