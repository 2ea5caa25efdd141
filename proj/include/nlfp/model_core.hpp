#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "nlfp/common.hpp"

namespace nlfp {

using ConstVec = std::span<const double>;

// out has n entries (drift) or n*n entries row-major (m).
using FieldFn = std::function<void(ConstVec x, double* out)>;

// Interaction coefficients at z = x - x_*. Either output may be null.
// b: n entries. sigma: n * noise_dim entries, row-major.
using PairFn = std::function<void(ConstVec z, double* b, double* sigma)>;

// Coefficient bundle for one model. The singular part of the interaction
// lives on k blocks of width d, starting at block_offsets[i].
struct ModelSpec {
    std::string name;
    int n = 0;
    int d = 0;
    int k = 0;
    int noise_dim = 0;  // columns of sigma
    double alpha = 0;
    double K = 1;
    std::vector<int> block_offsets;

    FieldFn c;  // empty: zero
    FieldFn m;  // empty: zero
    PairFn interaction;
    bool has_b = false;
    bool has_sigma = false;

    nlohmann::json params = nlohmann::json::object();

    // d / (d - alpha); infinite when alpha == d.
    double p() const;

    Eigen::VectorXd c_eval(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd m_eval(const Eigen::VectorXd& x) const;
    Eigen::VectorXd b_eval(const Eigen::VectorXd& z) const;
    Eigen::MatrixXd sigma_eval(const Eigen::VectorXd& z) const;

    // min over singular blocks of |z^i|
    double min_block_norm(ConstVec z) const;
};

struct ParticleCloud {
    int n = 0;
    std::vector<double> data;  // size() * n, row-major
    double time = 0;

    ParticleCloud() = default;
    ParticleCloud(std::size_t count, int dim, double t = 0) : n(dim), data(count * dim, 0.0), time(t) {}

    std::size_t size() const { return n > 0 ? data.size() / static_cast<std::size_t>(n) : 0; }
    std::span<const double> point(std::size_t i) const { return {data.data() + i * n, static_cast<std::size_t>(n)}; }
    std::span<double> point(std::size_t i) { return {data.data() + i * n, static_cast<std::size_t>(n)}; }
};

ModelSpec builtin_model(std::string_view name, const nlohmann::json& params = nlohmann::json::object());
std::vector<std::string> builtin_model_names();

struct AssumptionReport {
    std::string model;
    int samples = 0;
    double min_block_norm = 0;
    double ratio_b = 0;      // sup |b| / (1 + sum |x^i|^{1-alpha})
    double ratio_sigma = 0;  // sup |sigma| / (1 + sum |x^i|^{1-alpha/2})
    double ratio_lip = 0;    // sup of the local Lipschitz quotient over its weight
    double K = 0;
    bool pass = false;

    nlohmann::json to_json() const;
};

AssumptionReport verify_assumptions(const ModelSpec& spec, int n_samples, std::uint64_t seed,
                                    double min_block_norm = 1e-3);

// Projection onto singular block i (0-based).
ParticleCloud marginal(const ParticleCloud& cloud, const ModelSpec& spec, int block);
// Raw coordinate selection.
ParticleCloud select_coordinates(const ParticleCloud& cloud, const std::vector<int>& coords);

double silverman_bandwidth(const ParticleCloud& cloud);

// ||KDE||_{L^p} with a Gaussian kernel, integrated on a grid. p may be +inf.
double lp_norm_estimate(const ParticleCloud& cloud, double p, std::optional<double> bandwidth = std::nullopt);

// (1/N) sum |x_i|^2
double second_moment(const ParticleCloud& cloud);

void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud);
void write_cloud_csv(const std::string& path, const ParticleCloud& cloud);
ParticleCloud read_cloud_csv(std::istream& is);
ParticleCloud read_cloud_csv(const std::string& path);

}  // namespace nlfp
