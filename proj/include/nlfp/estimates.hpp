#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlfp/model_core.hpp"

namespace nlfp {

// Radially symmetric probability density on R^3.
struct RadialDensity {
    enum class Kind { uniform_ball, gaussian } kind = Kind::uniform_ball;
    double scale = 1.0;  // ball radius or Gaussian standard deviation

    static RadialDensity uniform_ball(double radius) { return {Kind::uniform_ball, radius}; }
    static RadialDensity gaussian(double sd) { return {Kind::gaussian, sd}; }

    double operator()(double r) const;
    double lp_norm(double p) const;
    double support_radius() const;  // effective outer radius for quadrature
    // mean of h over the sphere of radius rho centred at distance s from the origin
    double sphere_mean(double s, double rho) const;
    ParticleCloud sample(std::size_t N, std::uint64_t seed) const;
    std::string describe() const;
};

// int |x - x_*|^{-beta} h(x_*) dx_* at |x| = s, by adaptive quadrature.
double singular_integral_radial(const RadialDensity& h, double beta, double s);

// int_{|x - x_*| <= eps} |x - x_*|^{-beta} h at |x| = s (centre of the ball at x).
double singular_integral_near(const RadialDensity& h, double beta, double s, double eps);

// int_{|x - x_*| >= eps} |x - x_*|^{-alpha} h at |x| = s.
double singular_integral_far(const RadialDensity& h, double alpha, double s, double eps);

struct SingularIntegralResult {
    std::vector<double> values;
    std::size_t skipped = 0;  // coincident particle/evaluation pairs left out
};

// (1/N) sum_k |x - p_k|^{-beta} for every evaluation point x.
SingularIntegralResult singular_integral(const ParticleCloud& cloud, double beta, const ParticleCloud& eval_points);

struct EstimateReport {
    std::string lemma_id;
    nlohmann::json params = nlohmann::json::object();
    int sample_count = 0;
    double sup_ratio = 0;
    double fitted_C = 0;
    bool pass = false;
    nlohmann::json data = nlohmann::json::object();

    nlohmann::json to_json() const;
};

// Three reports: "sing_int", "sing_int_eps", "sing_int_log".
std::vector<EstimateReport> verify_sing_int_lemma(const RadialDensity& h, double alpha, double beta,
                                                  const std::vector<double>& eps_grid);

struct PairSampling {
    int n_points = 8;         // base points x
    std::vector<double> gaps;  // |x - y| values; default 1 .. 1e-6
    std::uint64_t seed = 1;
};

// Hard case (alpha >= 2) and globally Lipschitz (alpha = 0). mode: sigma_sq | b | b_plan.
EstimateReport verify_coefficient_estimate(const ModelSpec& spec, const ParticleCloud& f, const std::string& mode,
                                           const PairSampling& sampling = {});

// Soft case 0 < alpha < 2 (b modes need alpha < 1). mode: sigma | b | b_plan.
EstimateReport verify_soft_case_estimate(const ModelSpec& spec, const ParticleCloud& f,
                                         const std::vector<double>& eps_grid, const std::string& mode,
                                         const PairSampling& sampling = {});

}  // namespace nlfp
