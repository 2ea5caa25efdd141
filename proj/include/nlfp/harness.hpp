#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nlfp/model_core.hpp"

namespace nlfp {

struct MixtureComponent {
    double weight = 1.0;
    std::vector<double> mean;
    Eigen::MatrixXd cov;  // n x n, symmetric positive definite
};

// Initial cloud: Gaussian mixture, CSV file, or (g0 only) a perturbation of f0.
struct InitialCondition {
    enum class Kind { mixture, file, perturbation } kind = Kind::mixture;
    std::vector<MixtureComponent> components;
    std::string path;
    double delta2 = 0;             // target mean squared displacement
    std::string mode = "random";   // random | translate

    static InitialCondition from_json(const nlohmann::json& j, int n, const std::string& base_dir);
    nlohmann::json to_json() const;
};

struct ExperimentConfig {
    std::string model;
    nlohmann::json model_params = nlohmann::json::object();
    std::size_t N = 512;
    double dt = 1e-3;
    double T = 0.5;
    std::uint64_t seed = 1;
    std::optional<double> eps_cut;  // empty: default_eps_cut
    double eps_scale = 1.0;
    int refresh_interval = 1;
    int record_every = 10;
    int norm_every = 50;      // steps between L^p norm estimates; 0 disables
    int snapshot_every = 0;   // 0: initial and final only
    std::optional<double> norm_bandwidth;
    InitialCondition f0;
    InitialCondition g0;
    std::vector<double> deltas;  // delta-scan list, initial d2^2 targets
    std::string output_dir;

    static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
    static ExperimentConfig load(const std::string& path);
    nlohmann::json to_json() const;
    void validate() const;
    int steps() const;
};

ParticleCloud sample_initial(const InitialCondition& ic, const ModelSpec& spec, std::size_t N, std::uint64_t seed,
                             const ParticleCloud* base = nullptr);

struct StabilityReport {
    nlohmann::json config;
    std::string model;
    double p = 0;
    double eps_cut = 0;
    std::vector<double> t, d2sq, norm_max, m2f, m2g, bound_oracle, bound_H;
    std::vector<int> h_branch;
    std::vector<double> snapshot_t, snapshot_d2_plan, snapshot_d2_exact;
    double d2sq_initial = 0;
    double fitted_C = 0;
    double growth_C = 0;   // largest one-step growth ratio
    double min_slack = 0;  // min over t of bound_oracle - d2sq
    bool dominated = false;
    double omega = 0;      // closed-form modulus at the fitted C
    nlohmann::json assumptions;
    double wall_clock = 0;  // not part of report.json

    nlohmann::json to_json() const;
};

// Writes report.json, d2_series.csv, snapshots and timing.json when output_dir is set.
StabilityReport run_experiment(const ExperimentConfig& config);

struct ScanReport {
    std::vector<double> deltas, d2_initial, d2_final;
    double slope = 0;
    double intercept = 0;
    double slope_stderr = 0;
    double ci_low = 0;
    double ci_high = 0;
    double T = 0;
    nlohmann::json to_json() const;
};

ScanReport delta_scan(const ExperimentConfig& config, const std::vector<double>& deltas, int workers = 0);

struct HeatReport {
    std::vector<double> t, closed, derivative, dissipation, empirical, rel_error;  // empirical: replicate mean
    bool monotone = false;
    bool derivative_match = false;
    bool empirical_match = false;
    bool pass = false;
    nlohmann::json to_json() const;
};

double heat_closed_form(double mu1, double s1, double mu2, double s2, double t);
// Dissipation from the affine optimal map, by quadrature along the geodesic.
double heat_dissipation(double s1, double s2, double t);

HeatReport heat_dissipation_check(double mu1, double s1, double mu2, double s2, const std::vector<double>& t_grid,
                                  std::size_t N = 2000, std::uint64_t seed = 7, double tolerance = 0.05,
                                  int replicates = 32);

// Classical RK4 for noise-free models; negative dt runs backwards.
ParticleCloud integrate_deterministic(const ParticleCloud& cloud, const ModelSpec& spec, double dt, int steps);

struct VortexReport {
    double reversibility_error = 0;
    double fitted_C = 0;
    bool validated = false;
    std::vector<double> t, d2sq, bound;
    nlohmann::json to_json() const;
};

VortexReport vortex_check(const ParticleCloud& vortices, double delta2, double dt, double T, std::uint64_t seed,
                          int record_every = 100);

// RMS (over replicates) weak-form residual of the heat flow per level and test function.
struct RefinementReport {
    std::vector<double> dt;
    std::vector<std::size_t> N;
    std::vector<std::string> functions;
    std::vector<std::vector<double>> residual;  // [level][function]
    bool strictly_decreasing = false;
    nlohmann::json to_json() const;
};

RefinementReport weak_residual_refinement(double dt0, std::size_t N0, int levels, double T, int replicates,
                                          std::uint64_t seed);

// Minimal C >= 0 with osgood_solve(x0, m, C) >= target at every time; bisection.
double fit_osgood_constant(double x0, const std::vector<double>& t, const std::vector<double>& target,
                           const std::vector<double>& m_t, const std::vector<double>& m_v, double T);

struct SelftestCheck {
    std::string name;
    bool pass = false;
    bool known_issue = false;  // reported, not counted as failure
    std::string detail;
};

struct SelftestResult {
    std::string suite;
    std::vector<SelftestCheck> checks;
    bool pass() const;
};

SelftestResult run_selftest(const std::string& suite);
std::vector<std::string> selftest_suites();

}  // namespace nlfp
