#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nlfp/model_core.hpp"

namespace nlfp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

Mat3 projection(const Vec3& z);
Mat3 landau_phi(const Vec3& z, double gamma);
Vec3 landau_b(const Vec3& z, double gamma);
// Columns |z|^{gamma/2} b_j(z), j = 1..3.
Mat3 landau_sigma(const Vec3& z, double gamma);

// b_1 = (0,-z3,z2), b_2 = (z3,0,-z1), b_3 = (-z2,z1,0). j is 0-based.
Vec3 b_field(int j, const Vec3& z);

// |z|^{1+gamma/2} [[z2,-z3,0],[-z1,0,z3],[0,z1,-z2]]
Mat3 r_matrix(const Vec3& z, double gamma);

// Raw versions for inner loops; no argument checks.
// b += scale_b * landau_b(z), sigma block (3 x 3, row stride ld) += scale_s * landau_sigma(z).
void landau_accumulate(const double* z, double gamma, double scale_b, double* b, double scale_s, double* sigma,
                       int ld);

// Spatial weight of the fuzzy model.
struct Kappa {
    enum class Kind { constant, gaussian } kind = Kind::constant;
    double amplitude = 1.0;
    double length = 1.0;  // gaussian: amplitude * exp(-|x|^2 / (2 length^2))

    double operator()(const double* x) const;
    double sqrt_lipschitz() const;
    static Kappa from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct CoefficientValues {
    Eigen::VectorXd drift;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd diffusion;  // sigma sigma^T
};

// Interaction at z = (v - v_*, x - x_*), velocity block first.
CoefficientValues fuzzy_coefficients(const Vec3& x, const Vec3& v, double gamma, const Kappa& kappa);

// Weights used by the multispecies kernel.
struct SpeciesWeights {
    int ns = 0;
    std::vector<double> drift;      // (c_ij/m_i)(1/m_i + 1/m_j), row-major
    std::vector<double> diffusion;  // c_ij / m_i^2
};
SpeciesWeights species_weights(const std::vector<double>& masses, const Eigen::MatrixXd& c);

// v holds the N_s partner blocks. sigma is 3N_s x 3N_s^2, one 3x3 column group per (i, j).
CoefficientValues multispecies_coefficients(const Eigen::VectorXd& v, double gamma, const std::vector<double>& masses,
                                            const Eigen::MatrixXd& c);

Eigen::Vector2d biot_savart(const Eigen::Vector2d& x);
Vec3 coulomb_field(const Vec3& x);
Eigen::Vector2d ks_potential_gradient(const Eigen::Vector2d& x, double a);
double bessel_k1(double x);

// Cubic smoothstep cutoff: 0 on [0, eps], 1 on [2 eps, inf).
double cutoff_theta(double r, double eps);
ModelSpec cutoff_coefficients(const ModelSpec& spec, double eps);

// Lifted fields on R^12 = (x, v, x_*, v_*).
struct LiftedFrame {
    std::array<Eigen::VectorXd, 3> b_tilde;
    Eigen::VectorXd n_hat;
    double r = 0;
};
LiftedFrame lifted_fields(const Vec3& v, const Vec3& v_star);

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

VectorField fuzzy_b_tilde(int j);
// Constant frame: kind in {'~' e tilde, '^' e hat, 'x' xi, 'e' eta}, i 0-based.
Eigen::VectorXd fuzzy_frame(char kind, int i);

// Multispecies lifted space (R^3)^{2N}: v^1..v^N then v_*^1..v_*^N.
VectorField multispecies_b(int i, int j, int k, const std::vector<double>& masses);
Eigen::VectorXd multispecies_n(const Eigen::VectorXd& point, int i, int j, int ns);
Eigen::VectorXd multispecies_e(int l, int q, int ns);
Eigen::VectorXd multispecies_xi(int l, int q, int ns);

// [a,b]_i = a . grad b_i - b . grad a_i by central differences.
Eigen::VectorXd lie_bracket(const VectorField& a, const VectorField& b, const Eigen::VectorXd& p, double h = 1e-3);

VectorField constant_field(const Eigen::VectorXd& c);

}  // namespace nlfp
