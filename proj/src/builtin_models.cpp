#include <cmath>
#include <numbers>

#include "nlfp/kernels.hpp"
#include "nlfp/model_core.hpp"

namespace nlfp {

namespace {

double get_gamma(const nlohmann::json& params, double def, double lo, double hi, const std::string& model)
{
    const double g = params.value("gamma", def);
    if (!(g >= lo && g <= hi))
        throw InvalidArgument(model + ": gamma = " + format_double(g) + " outside [" + format_double(lo) + ", " +
                              format_double(hi) + "]");
    return g;
}

FieldFn identity_m(int n)
{
    return [n](ConstVec, double* out) {
        std::fill(out, out + n * n, 0.0);
        for (int i = 0; i < n; ++i) out[i * n + i] = 1.0;
    };
}

// Fuzzy Landau, layout (v, x).
ModelSpec fuzzy_landau(const nlohmann::json& params)
{
    const double gamma = get_gamma(params, -2.0, -3.0, -2.0, "fuzzy-landau");
    const Kappa kappa = Kappa::from_json(params.value("kappa", nlohmann::json(1.0)));
    ModelSpec s;
    s.name = "fuzzy-landau";
    s.n = 6;
    s.d = 3;
    s.k = 1;
    s.noise_dim = 3;
    s.alpha = -gamma;
    s.block_offsets = {0};
    s.has_b = s.has_sigma = true;
    s.params = {{"gamma", gamma}, {"kappa", kappa.to_json()}};
    // kappa = 1, 2000 samples: ratios b ~ 4.0, sigma <= 1.4, Lip <= 4.1 over
    // gamma in [-3, -2]. Lipschitz quotient also picks up |grad sqrt kappa|.
    s.K = 8.0 * std::max(1.0, kappa.amplitude) * (kappa.sqrt_lipschitz() + 1.0);
    s.c = [](ConstVec x, double* out) {
        out[0] = out[1] = out[2] = 0.0;
        out[3] = x[0];
        out[4] = x[1];
        out[5] = x[2];
    };
    s.interaction = [gamma, kappa](ConstVec z, double* b, double* sigma) {
        const double kap = kappa(z.data() + 3);
        if (b) std::fill(b, b + 6, 0.0);
        if (sigma) std::fill(sigma, sigma + 18, 0.0);
        if (kap <= 0.0) return;
        landau_accumulate(z.data(), gamma, 2.0 * kap, b, std::sqrt(kap), sigma, 3);
    };
    return s;
}

ModelSpec landau_homogeneous(const nlohmann::json& params)
{
    const double gamma = get_gamma(params, -2.0, -3.0, 0.0, "landau-homogeneous");
    ModelSpec s;
    s.name = "landau-homogeneous";
    s.n = s.d = 3;
    s.k = 1;
    s.noise_dim = 3;
    s.alpha = -gamma;
    s.block_offsets = {0};
    s.has_b = s.has_sigma = true;
    s.params = {{"gamma", gamma}};
    s.K = 8.0;
    s.interaction = [gamma](ConstVec z, double* b, double* sigma) {
        if (b) std::fill(b, b + 3, 0.0);
        if (sigma) std::fill(sigma, sigma + 9, 0.0);
        landau_accumulate(z.data(), gamma, 2.0, b, 1.0, sigma, 3);
    };
    return s;
}

ModelSpec multispecies_landau(const nlohmann::json& params)
{
    const double gamma = get_gamma(params, 0.0, -3.0, 0.0, "multispecies-landau");
    std::vector<double> masses = params.value("masses", std::vector<double>{1.0, 1.0});
    if (params.contains("species")) {
        const int ns = params["species"].get<int>();
        if (ns < 1) throw InvalidArgument("multispecies-landau: species must be >= 1");
        if (!params.contains("masses")) masses.assign(ns, 1.0);
        if (static_cast<int>(masses.size()) != ns) throw InvalidArgument("multispecies-landau: masses size != species");
    }
    const int ns = static_cast<int>(masses.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Ones(ns, ns);
    if (params.contains("c")) {
        const auto rows = params["c"].get<std::vector<std::vector<double>>>();
        if (static_cast<int>(rows.size()) != ns) throw InvalidArgument("multispecies-landau: c must be N_s x N_s");
        for (int i = 0; i < ns; ++i) {
            if (static_cast<int>(rows[i].size()) != ns) throw InvalidArgument("multispecies-landau: c must be N_s x N_s");
            for (int j = 0; j < ns; ++j) c(i, j) = rows[i][j];
        }
    }
    const SpeciesWeights w = species_weights(masses, c);
    ModelSpec s;
    s.name = "multispecies-landau";
    s.n = 3 * ns;
    s.d = 3;
    s.k = ns;
    s.noise_dim = 3 * ns * ns;
    s.alpha = -gamma;
    for (int i = 0; i < ns; ++i) s.block_offsets.push_back(3 * i);
    s.has_b = s.has_sigma = true;
    nlohmann::json cj = nlohmann::json::array();
    for (int i = 0; i < ns; ++i) {
        std::vector<double> row(ns);
        for (int j = 0; j < ns; ++j) row[j] = c(i, j);
        cj.push_back(row);
    }
    s.params = {{"gamma", gamma}, {"masses", masses}, {"c", cj}};
    double wmax = 0;
    for (int i = 0; i < ns; ++i) {
        double rb = 0, rs = 0;
        for (int j = 0; j < ns; ++j) {
            rb += w.drift[i * ns + j];
            rs += w.diffusion[i * ns + j];
        }
        wmax = std::max({wmax, rb, rs});
    }
    s.K = 8.0 * std::max(1.0, wmax) * ns;
    std::vector<double> sqrt_diff(w.diffusion.size());
    for (std::size_t q = 0; q < sqrt_diff.size(); ++q) sqrt_diff[q] = std::sqrt(w.diffusion[q]);
    const int n = s.n;
    const int m = s.noise_dim;
    s.interaction = [=](ConstVec z, double* b, double* sigma) {
        if (b) std::fill(b, b + n, 0.0);
        if (sigma) std::fill(sigma, sigma + n * m, 0.0);
        for (int i = 0; i < ns; ++i)
            for (int j = 0; j < ns; ++j) {
                const double wb = w.drift[i * ns + j];
                const double ws = sqrt_diff[i * ns + j];
                if (wb == 0.0 && ws == 0.0) continue;
                landau_accumulate(z.data() + 3 * j, gamma, wb, b ? b + 3 * i : nullptr, ws,
                                  sigma ? sigma + (3 * i) * m + 3 * (i * ns + j) : nullptr, m);
            }
    };
    return s;
}

ModelSpec euler2d(const nlohmann::json&)
{
    ModelSpec s;
    s.name = "euler2d";
    s.n = s.d = 2;
    s.k = 1;
    s.noise_dim = 0;
    s.alpha = 2.0;
    s.block_offsets = {0};
    s.has_b = true;
    s.K = 1.0;
    s.interaction = [](ConstVec z, double* b, double*) {
        if (!b) return;
        const double r2 = z[0] * z[0] + z[1] * z[1];
        if (r2 == 0.0) {
            b[0] = b[1] = 0.0;
            return;
        }
        const double f = 1.0 / (2.0 * std::numbers::pi * r2);
        b[0] = -z[1] * f;
        b[1] = z[0] * f;
    };
    return s;
}

void coulomb_add(const double* x, double sign, double* out)
{
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if (r2 == 0.0) return;
    const double f = -sign / (4.0 * std::numbers::pi * r2 * std::sqrt(r2));
    out[0] += f * x[0];
    out[1] += f * x[1];
    out[2] += f * x[2];
}

// Layout (x, v).
ModelSpec vlasov_poisson(const nlohmann::json&)
{
    ModelSpec s;
    s.name = "vlasov-poisson";
    s.n = 6;
    s.d = 3;
    s.k = 1;
    s.noise_dim = 0;
    s.alpha = 3.0;
    s.block_offsets = {0};
    s.has_b = true;
    s.K = 1.0;
    s.c = [](ConstVec x, double* out) {
        out[0] = x[3];
        out[1] = x[4];
        out[2] = x[5];
        out[3] = out[4] = out[5] = 0.0;
    };
    s.interaction = [](ConstVec z, double* b, double*) {
        if (!b) return;
        std::fill(b, b + 6, 0.0);
        coulomb_add(z.data(), 1.0, b + 3);
    };
    return s;
}

// Layout (x+, v+, x-, v-).
ModelSpec vlasov_poisson_2species(const nlohmann::json&)
{
    ModelSpec s;
    s.name = "vlasov-poisson-2species";
    s.n = 12;
    s.d = 3;
    s.k = 2;
    s.noise_dim = 0;
    s.alpha = 3.0;
    s.block_offsets = {0, 6};
    s.has_b = true;
    s.K = 1.0;
    s.c = [](ConstVec x, double* out) {
        for (int q = 0; q < 3; ++q) {
            out[q] = x[3 + q];
            out[3 + q] = 0.0;
            out[6 + q] = x[9 + q];
            out[9 + q] = 0.0;
        }
    };
    s.interaction = [](ConstVec z, double* b, double*) {
        if (!b) return;
        std::fill(b, b + 12, 0.0);
        double e[3] = {0, 0, 0};
        coulomb_add(z.data(), 1.0, e);
        coulomb_add(z.data() + 6, -1.0, e);
        for (int q = 0; q < 3; ++q) {
            b[3 + q] = e[q];
            b[9 + q] = -e[q];
        }
    };
    return s;
}

ModelSpec keller_segel(const nlohmann::json& params)
{
    const double a = params.value("a", 0.0);
    const double chi = params.value("chi", 1.0);
    if (!(a >= 0)) throw InvalidArgument("keller-segel: a must be >= 0");
    ModelSpec s;
    s.name = "keller-segel";
    s.n = s.d = 2;
    s.k = 1;
    s.noise_dim = 0;
    s.alpha = 2.0;
    s.block_offsets = {0};
    s.has_b = true;
    s.params = {{"a", a}, {"chi", chi}};
    s.K = std::max(1.0, std::abs(chi));
    s.m = identity_m(2);
    s.interaction = [a, chi](ConstVec z, double* b, double*) {
        if (!b) return;
        b[0] = b[1] = 0.0;
        if (z[0] == 0.0 && z[1] == 0.0) return;
        const Eigen::Vector2d g = ks_potential_gradient(Eigen::Vector2d(z[0], z[1]), a);
        b[0] = chi * g[0];
        b[1] = chi * g[1];
    };
    return s;
}

ModelSpec heat(const nlohmann::json& params)
{
    const int dim = params.value("dim", 1);
    if (dim < 1) throw InvalidArgument("heat: dim must be >= 1");
    ModelSpec s;
    s.name = "heat";
    s.n = s.d = dim;
    s.k = 1;
    s.noise_dim = 0;
    s.alpha = 0.0;
    s.block_offsets = {0};
    s.params = {{"dim", dim}};
    s.K = 1.0;
    s.m = identity_m(dim);
    return s;
}

}  // namespace

std::vector<std::string> builtin_model_names()
{
    return {"fuzzy-landau", "multispecies-landau", "euler2d",    "vlasov-poisson", "vlasov-poisson-2species",
            "keller-segel", "landau-homogeneous",  "heat"};
}

ModelSpec builtin_model(std::string_view name, const nlohmann::json& params_in)
{
    const nlohmann::json params = params_in.is_null() ? nlohmann::json::object() : params_in;
    if (!params.is_object()) throw InvalidArgument("builtin_model: params must be an object");
    if (name == "fuzzy-landau") return fuzzy_landau(params);
    if (name == "multispecies-landau") return multispecies_landau(params);
    if (name == "euler2d") return euler2d(params);
    if (name == "vlasov-poisson") return vlasov_poisson(params);
    if (name == "vlasov-poisson-2species") return vlasov_poisson_2species(params);
    if (name == "keller-segel") return keller_segel(params);
    if (name == "landau-homogeneous") return landau_homogeneous(params);
    if (name == "heat") return heat(params);
    throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

}  // namespace nlfp
