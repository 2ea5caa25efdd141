#include "nlfp/kernels.hpp"

#include <cmath>
#include <numbers>

namespace nlfp {

namespace {

void require_nonzero(const Vec3& z, const char* what)
{
    if (z.squaredNorm() == 0.0) throw InvalidArgument(std::string(what) + ": z = 0");
}

}  // namespace

Mat3 projection(const Vec3& z)
{
    require_nonzero(z, "projection");
    return Mat3::Identity() - z * z.transpose() / z.squaredNorm();
}

Mat3 landau_phi(const Vec3& z, double gamma)
{
    if (z.squaredNorm() == 0.0) {
        if (2.0 + gamma < 0.0) throw InvalidArgument("landau_phi: z = 0 with 2 + gamma < 0");
        return Mat3::Zero();
    }
    return std::pow(z.norm(), 2.0 + gamma) * projection(z);
}

Vec3 landau_b(const Vec3& z, double gamma)
{
    if (z.squaredNorm() == 0.0) {
        if (gamma < 0.0) throw InvalidArgument("landau_b: z = 0 with gamma < 0");
        return Vec3::Zero();
    }
    return -2.0 * std::pow(z.norm(), gamma) * z;
}

Vec3 b_field(int j, const Vec3& z)
{
    switch (j) {
    case 0: return {0.0, -z[2], z[1]};
    case 1: return {z[2], 0.0, -z[0]};
    case 2: return {-z[1], z[0], 0.0};
    default: throw InvalidArgument("b_field: j must be 0, 1 or 2");
    }
}

Mat3 landau_sigma(const Vec3& z, double gamma)
{
    if (z.squaredNorm() == 0.0) {
        if (gamma < -2.0) throw InvalidArgument("landau_sigma: z = 0 with gamma < -2");
        return Mat3::Zero();
    }
    Mat3 s;
    for (int j = 0; j < 3; ++j) s.col(j) = b_field(j, z);
    return std::pow(z.norm(), gamma / 2.0) * s;
}

Mat3 r_matrix(const Vec3& z, double gamma)
{
    Mat3 r;
    r << z[1], -z[2], 0.0, -z[0], 0.0, z[2], 0.0, z[0], -z[1];
    if (z.squaredNorm() == 0.0) return Mat3::Zero();
    return std::pow(z.norm(), 1.0 + gamma / 2.0) * r;
}

void landau_accumulate(const double* z, double gamma, double scale_b, double* b, double scale_s, double* sigma, int ld)
{
    const double r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
    if (r2 == 0.0) return;
    const double s = gamma == 0.0 ? 1.0 : std::pow(r2, 0.25 * gamma);  // |z|^{gamma/2}
    if (b) {
        const double f = -2.0 * s * s * scale_b;
        b[0] += f * z[0];
        b[1] += f * z[1];
        b[2] += f * z[2];
    }
    if (sigma) {
        const double f = s * scale_s;
        double* r0 = sigma;
        double* r1 = sigma + ld;
        double* r2r = sigma + 2 * ld;
        // column 0: (0, -z3, z2)
        r1[0] -= f * z[2];
        r2r[0] += f * z[1];
        // column 1: (z3, 0, -z1)
        r0[1] += f * z[2];
        r2r[1] -= f * z[0];
        // column 2: (-z2, z1, 0)
        r0[2] -= f * z[1];
        r1[2] += f * z[0];
    }
}

double Kappa::operator()(const double* x) const
{
    if (kind == Kind::constant) return amplitude;
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return amplitude * std::exp(-r2 / (2.0 * length * length));
}

double Kappa::sqrt_lipschitz() const
{
    if (kind == Kind::constant) return 0.0;
    // sqrt(a) exp(-r^2/(4 l^2)) has slope at most sqrt(a) / (l sqrt(2e))
    return std::sqrt(amplitude) / (length * std::sqrt(2.0 * std::numbers::e));
}

Kappa Kappa::from_json(const nlohmann::json& j)
{
    Kappa k;
    if (j.is_number()) {
        k.amplitude = j.get<double>();
    } else if (j.is_object()) {
        const std::string type = j.value("type", std::string("constant"));
        if (type == "constant") {
            k.amplitude = j.value("value", 1.0);
        } else if (type == "gaussian") {
            k.kind = Kind::gaussian;
            k.amplitude = j.value("amplitude", 1.0);
            k.length = j.value("length", 1.0);
            if (!(k.length > 0)) throw InvalidArgument("kappa: length must be positive");
        } else {
            throw InvalidArgument("kappa: unknown type '" + type + "'");
        }
    } else if (!j.is_null()) {
        throw InvalidArgument("kappa: expected number or object");
    }
    if (!(k.amplitude >= 0)) throw InvalidArgument("kappa must be non-negative");
    return k;
}

nlohmann::json Kappa::to_json() const
{
    if (kind == Kind::constant) return {{"type", "constant"}, {"value", amplitude}};
    return {{"type", "gaussian"}, {"amplitude", amplitude}, {"length", length}};
}

CoefficientValues fuzzy_coefficients(const Vec3& x, const Vec3& v, double gamma, const Kappa& kappa)
{
    const double kap = kappa(x.data());
    if (kap < 0) throw InvalidArgument("fuzzy_coefficients: kappa(x) < 0");
    CoefficientValues out;
    out.drift = Eigen::VectorXd::Zero(6);
    out.sigma = Eigen::MatrixXd::Zero(6, 3);
    if (kap > 0) {
        out.drift.head<3>() = 2.0 * kap * landau_b(v, gamma);
        out.sigma.topRows<3>() = std::sqrt(kap) * landau_sigma(v, gamma);
    }
    out.diffusion = out.sigma * out.sigma.transpose();
    return out;
}

SpeciesWeights species_weights(const std::vector<double>& masses, const Eigen::MatrixXd& c)
{
    const int ns = static_cast<int>(masses.size());
    if (ns < 1) throw InvalidArgument("multispecies: need at least one species");
    if (c.rows() != ns || c.cols() != ns) throw InvalidArgument("multispecies: c must be N_s x N_s");
    for (double m : masses)
        if (!(m > 0)) throw InvalidArgument("multispecies: masses must be positive");
    SpeciesWeights w;
    w.ns = ns;
    w.drift.resize(ns * ns);
    w.diffusion.resize(ns * ns);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < ns; ++j) {
            if (!(c(i, j) >= 0)) throw InvalidArgument("multispecies: c_ij must be non-negative");
            w.drift[i * ns + j] = c(i, j) / masses[i] * (1.0 / masses[i] + 1.0 / masses[j]);
            w.diffusion[i * ns + j] = c(i, j) / (masses[i] * masses[i]);
        }
    return w;
}

CoefficientValues multispecies_coefficients(const Eigen::VectorXd& v, double gamma, const std::vector<double>& masses,
                                            const Eigen::MatrixXd& c)
{
    const SpeciesWeights w = species_weights(masses, c);
    const int ns = w.ns;
    if (v.size() != 3 * ns) throw InvalidArgument("multispecies_coefficients: v must have 3 N_s entries");
    for (int j = 0; j < ns; ++j) {
        Vec3 vj = v.segment<3>(3 * j);
        if (vj.squaredNorm() == 0.0 && gamma < 0) throw InvalidArgument("multispecies_coefficients: v^j = 0 with gamma < 0");
    }
    CoefficientValues out;
    out.drift = Eigen::VectorXd::Zero(3 * ns);
    out.sigma = Eigen::MatrixXd::Zero(3 * ns, 3 * ns * ns);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < ns; ++j) {
            Vec3 vj = v.segment<3>(3 * j);
            out.drift.segment<3>(3 * i) += w.drift[i * ns + j] * landau_b(vj, gamma);
            out.sigma.block<3, 3>(3 * i, 3 * (i * ns + j)) = std::sqrt(w.diffusion[i * ns + j]) * landau_sigma(vj, gamma);
        }
    out.diffusion = out.sigma * out.sigma.transpose();
    return out;
}

Eigen::Vector2d biot_savart(const Eigen::Vector2d& x)
{
    const double r2 = x.squaredNorm();
    if (r2 == 0.0) throw InvalidArgument("biot_savart: x = 0");
    return Eigen::Vector2d(-x[1], x[0]) / (2.0 * std::numbers::pi * r2);
}

Vec3 coulomb_field(const Vec3& x)
{
    const double r = x.norm();
    if (r == 0.0) throw InvalidArgument("coulomb_field: x = 0");
    return -x / (4.0 * std::numbers::pi * r * r * r);
}

double bessel_k1(double x)
{
    if (!(x > 0)) throw InvalidArgument("bessel_k1: x must be positive");
    // K_1(x) = int_0^inf exp(-x cosh t) cosh t dt; the trapezoid rule converges
    // geometrically for this integrand (analytic in |Im t| < pi/2).
    if (x > 740.0) return 0.0;
    const double h = 0.125;
    const double tmax = std::acosh(std::max(1.0, 760.0 / x)) + h;
    double sum = 0.5 * std::exp(-x);
    for (double t = h; t <= tmax; t += h) {
        const double ch = std::cosh(t);
        sum += std::exp(-x * ch) * ch;
    }
    return h * sum;
}

Eigen::Vector2d ks_potential_gradient(const Eigen::Vector2d& x, double a)
{
    if (a < 0) throw InvalidArgument("ks_potential_gradient: a < 0");
    const double r = x.norm();
    if (r == 0.0) throw InvalidArgument("ks_potential_gradient: x = 0");
    if (a == 0.0) return -x / (2.0 * std::numbers::pi * r * r);
    const double sa = std::sqrt(a);
    return -(sa / (2.0 * std::numbers::pi)) * bessel_k1(sa * r) * x / r;
}

double cutoff_theta(double r, double eps)
{
    if (r <= eps) return 0.0;
    if (r >= 2.0 * eps) return 1.0;
    const double t = (r - eps) / eps;
    return t * t * (3.0 - 2.0 * t);
}

ModelSpec cutoff_coefficients(const ModelSpec& spec, double eps)
{
    if (!(eps > 0)) throw InvalidArgument("cutoff_coefficients: eps must be positive");
    ModelSpec out = spec;
    out.params["eps_cut"] = eps;
    if (!spec.interaction) return out;
    const int n = spec.n;
    const int m = spec.noise_dim;
    const int d = spec.d;
    const std::vector<int> offsets = spec.block_offsets;
    PairFn inner = spec.interaction;
    out.interaction = [=](ConstVec z, double* b, double* sigma) {
        double theta = 1.0;
        for (int off : offsets) {
            double r2 = 0;
            for (int q = 0; q < d; ++q) r2 += z[off + q] * z[off + q];
            theta *= cutoff_theta(std::sqrt(r2), eps);
            if (theta == 0.0) break;
        }
        if (theta == 0.0) {
            if (b) std::fill(b, b + n, 0.0);
            if (sigma) std::fill(sigma, sigma + static_cast<std::ptrdiff_t>(n) * m, 0.0);
            return;
        }
        inner(z, b, sigma);
        if (theta != 1.0) {
            if (b)
                for (int i = 0; i < n; ++i) b[i] *= theta;
            if (sigma)
                for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n) * m; ++i) sigma[i] *= theta;
        }
    };
    return out;
}

}  // namespace nlfp
