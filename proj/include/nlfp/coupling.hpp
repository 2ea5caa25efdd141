#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlfp/model_core.hpp"
#include "nlfp/transport.hpp"

namespace nlfp {

// Two particle clouds driven by shared noise and coupled through an optimal plan.
// After each refresh Y is reindexed so that Y[i] is the partner of X[i].
struct CoupledState {
    ParticleCloud X;
    ParticleCloud Y;
    TransportPlan plan;               // identity pairing after reindexing; cost of current pairing
    std::vector<int> last_pairing;    // plan found at the last refresh, before reindexing
    double last_refresh_cost = 0;     // d2^2 at the last refresh
    std::size_t step_index = 0;
    std::uint64_t seed = 0;
    double eps_cut = 0;               // 0: no regularization
    int refresh_interval = 1;         // 0: never refresh after init
    std::vector<std::uint64_t> labels;  // noise identity of pair i
    AssignmentSolver solver;
};

// N^{-1/(2d)} times the rms spread of the singular blocks, times scale.
double default_eps_cut(const ParticleCloud& f0, const ModelSpec& spec, double scale = 1.0);

CoupledState init_coupled(const ParticleCloud& f0, const ParticleCloud& g0, std::uint64_t seed, double eps_cut,
                          int refresh_interval = 1);

// One Euler-Maruyama step of both clouds with shared noise, then plan refresh if due.
void step_coupled(CoupledState& state, const ModelSpec& spec_f, const ModelSpec& spec_g, double dt);

// Same scheme for one cloud. labels default to 0..N-1.
ParticleCloud step_single(const ParticleCloud& cloud, const ModelSpec& spec, double dt, std::uint64_t seed,
                          std::size_t step_index, double eps_cut = 0,
                          const std::vector<std::uint64_t>* labels = nullptr);

// Runs `steps` single steps; returns every snapshot including the initial one.
std::vector<ParticleCloud> simulate_single(const ParticleCloud& cloud, const ModelSpec& spec, double dt, int steps,
                                           std::uint64_t seed, double eps_cut = 0);

struct PicardResult {
    std::vector<double> rho;  // rho[m] = sup_t E|X^{m+1}_t - X^m_t|^2
    bool diverged = false;
};

// Picard iteration of the nonlinear SDE with the law frozen to f_frozen[s] at step s.
PicardResult picard_diagnostics(const std::vector<ParticleCloud>& f_frozen, const ModelSpec& spec, double dt,
                                int iterations, int n_paths, std::uint64_t seed, double eps_cut = 0);

struct TestFunction {
    std::string name;
    std::function<double(ConstVec)> value;
    std::function<void(ConstVec, double*)> grad;  // n
    std::function<void(ConstVec, double*)> hess;  // n x n row-major
};

// cos(x_0), exp(-|x|^2/2), |x|^2 / (1 + |x|^2 / R^2)
std::vector<TestFunction> standard_test_functions(double R = 3.0);
TestFunction constant_test_function(double c = 1.0);

// |<phi, mu_T> - <phi, mu_0> - sum_s dt <L_s phi, mu_s>| for each test function,
// with left-point quadrature in time. trajectory[s] is the cloud after s steps.
std::vector<double> weak_form_residual(const std::vector<ParticleCloud>& trajectory, const ModelSpec& spec, double dt,
                                       const std::vector<TestFunction>& test_fns);

}  // namespace nlfp
