#include "nlfp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nlfp/coupling.hpp"
#include "nlfp/osgood.hpp"
#include "nlfp/transport.hpp"

namespace nlfp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamInit = 10;
constexpr std::uint64_t kStreamPick = 11;
constexpr std::uint64_t kStreamPerturb = 12;

double unit_uniform(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::vector<double> read_vector(const json& j, int n, const char* what)
{
    if (j.is_number()) return std::vector<double>(n, j.get<double>());
    auto v = j.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != n)
        throw ConfigError(std::string(what) + ": expected " + std::to_string(n) + " entries");
    return v;
}

Eigen::MatrixXd read_cov(const json& c, int n)
{
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    if (c.contains("cov")) {
        const auto rows = c.at("cov").get<std::vector<std::vector<double>>>();
        if (static_cast<int>(rows.size()) != n) throw ConfigError("cov: wrong number of rows");
        for (int r = 0; r < n; ++r) {
            if (static_cast<int>(rows[r].size()) != n) throw ConfigError("cov: wrong row length");
            for (int q = 0; q < n; ++q) cov(r, q) = rows[r][q];
        }
        if (!cov.isApprox(cov.transpose(), 1e-12)) throw ConfigError("cov: not symmetric");
    } else {
        const auto sd = read_vector(c.value("std", json(1.0)), n, "std");
        for (int q = 0; q < n; ++q) {
            if (!(sd[q] > 0)) throw ConfigError("std: entries must be positive");
            cov(q, q) = sd[q] * sd[q];
        }
    }
    return cov;
}

}  // namespace

InitialCondition InitialCondition::from_json(const json& j, int n, const std::string& base_dir)
{
    InitialCondition ic;
    if (j.contains("file")) {
        ic.kind = Kind::file;
        fs::path p = j.at("file").get<std::string>();
        if (p.is_relative()) p = fs::path(base_dir) / p;
        ic.path = p.string();
    } else if (j.contains("perturb")) {
        ic.kind = Kind::perturbation;
        const json& pj = j.at("perturb");
        ic.delta2 = pj.at("delta2").get<double>();
        ic.mode = pj.value("mode", std::string("random"));
        if (!(ic.delta2 >= 0)) throw ConfigError("perturb.delta2 must be >= 0");
        if (ic.mode != "random" && ic.mode != "translate") throw ConfigError("perturb.mode must be random or translate");
    } else if (j.contains("mixture")) {
        ic.kind = Kind::mixture;
        for (const json& c : j.at("mixture")) {
            MixtureComponent mc;
            mc.weight = c.value("weight", 1.0);
            if (!(mc.weight > 0)) throw ConfigError("mixture weight must be positive");
            mc.mean = read_vector(c.value("mean", json(0.0)), n, "mean");
            mc.cov = read_cov(c, n);
            Eigen::LLT<Eigen::MatrixXd> llt(mc.cov);
            if (llt.info() != Eigen::Success) throw ConfigError("cov: not positive definite");
            ic.components.push_back(std::move(mc));
        }
        if (ic.components.empty()) throw ConfigError("mixture: no components");
    } else {
        throw ConfigError("initial condition needs one of: mixture, file, perturb");
    }
    return ic;
}

json InitialCondition::to_json() const
{
    switch (kind) {
    case Kind::file:
        return {{"file", path}};
    case Kind::perturbation:
        return {{"perturb", {{"delta2", delta2}, {"mode", mode}}}};
    case Kind::mixture:
        break;
    }
    json comps = json::array();
    for (const auto& c : components) {
        json cov = json::array();
        for (int r = 0; r < c.cov.rows(); ++r) {
            std::vector<double> row(c.cov.cols());
            for (int q = 0; q < c.cov.cols(); ++q) row[q] = c.cov(r, q);
            cov.push_back(row);
        }
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"cov", cov}});
    }
    return {{"mixture", comps}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir)
{
    ExperimentConfig c;
    try {
        const json& mj = j.at("model");
        if (mj.is_string()) {
            c.model = mj.get<std::string>();
        } else {
            c.model = mj.at("name").get<std::string>();
            c.model_params = mj.value("params", json::object());
        }
        const ModelSpec spec = builtin_model(c.model, c.model_params);
        c.N = j.value("N", c.N);
        c.dt = j.value("dt", c.dt);
        c.T = j.value("T", c.T);
        c.seed = j.value("seed", c.seed);
        if (j.contains("eps_cut") && !j.at("eps_cut").is_null()) c.eps_cut = j.at("eps_cut").get<double>();
        c.eps_scale = j.value("eps_scale", c.eps_scale);
        c.refresh_interval = j.value("refresh_interval", c.refresh_interval);
        c.record_every = j.value("record_every", c.record_every);
        c.norm_every = j.value("norm_every", c.norm_every);
        c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
        if (j.contains("norm_bandwidth") && !j.at("norm_bandwidth").is_null())
            c.norm_bandwidth = j.at("norm_bandwidth").get<double>();
        c.f0 = InitialCondition::from_json(j.at("f0"), spec.n, base_dir);
        if (c.f0.kind == InitialCondition::Kind::perturbation) throw ConfigError("f0 cannot be a perturbation");
        c.g0 = j.contains("g0") ? InitialCondition::from_json(j.at("g0"), spec.n, base_dir) : c.f0;
        c.deltas = j.value("deltas", std::vector<double>{});
        if (j.contains("output_dir")) {
            fs::path p = j.at("output_dir").get<std::string>();
            if (p.is_relative()) p = fs::path(base_dir) / p;
            c.output_dir = p.string();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

json ExperimentConfig::to_json() const
{
    json j = {{"model", {{"name", model}, {"params", model_params}}},
              {"N", N},
              {"dt", dt},
              {"T", T},
              {"seed", seed},
              {"eps_cut", eps_cut ? json(*eps_cut) : json(nullptr)},
              {"eps_scale", eps_scale},
              {"refresh_interval", refresh_interval},
              {"record_every", record_every},
              {"norm_every", norm_every},
              {"snapshot_every", snapshot_every},
              {"norm_bandwidth", norm_bandwidth ? json(*norm_bandwidth) : json(nullptr)},
              {"f0", f0.to_json()},
              {"g0", g0.to_json()},
              {"deltas", deltas}};
    return j;
}

void ExperimentConfig::validate() const
{
    if (N < 2) throw ConfigError("N must be >= 2");
    if (!(dt > 0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    if (!(T >= 0) || !std::isfinite(T)) throw ConfigError("T must be >= 0");
    const double s = T / dt;
    if (std::abs(s - std::round(s)) > 1e-9 * std::max(1.0, s)) throw ConfigError("T must be a multiple of dt");
    if (eps_cut && !(*eps_cut >= 0)) throw ConfigError("eps_cut must be >= 0");
    if (!(eps_scale > 0)) throw ConfigError("eps_scale must be positive");
    if (refresh_interval < 0) throw ConfigError("refresh_interval must be >= 0");
    if (record_every < 1) throw ConfigError("record_every must be >= 1");
    if (norm_every < 0 || snapshot_every < 0) throw ConfigError("norm_every and snapshot_every must be >= 0");
    if (norm_bandwidth && !(*norm_bandwidth > 0)) throw ConfigError("norm_bandwidth must be positive");
    for (std::size_t q = 0; q < deltas.size(); ++q) {
        if (!(deltas[q] > 0)) throw ConfigError("deltas must be positive");
        if (q > 0 && !(deltas[q] > deltas[q - 1])) throw ConfigError("deltas must be sorted ascending");
    }
}

int ExperimentConfig::steps() const { return static_cast<int>(std::llround(T / dt)); }

ParticleCloud sample_initial(const InitialCondition& ic, const ModelSpec& spec, std::size_t N, std::uint64_t seed,
                             const ParticleCloud* base)
{
    const int n = spec.n;
    const NoiseField nf(seed);
    switch (ic.kind) {
    case InitialCondition::Kind::file: {
        ParticleCloud c = read_cloud_csv(ic.path);
        if (c.n != n) throw ConfigError("initial file " + ic.path + ": dimension does not match the model");
        if (c.size() != N) throw ConfigError("initial file " + ic.path + ": particle count does not match N");
        return c;
    }
    case InitialCondition::Kind::perturbation: {
        if (!base) throw InvalidArgument("perturbation needs a base cloud");
        ParticleCloud c = *base;
        const double delta = std::sqrt(ic.delta2);
        if (ic.mode == "translate") {
            for (std::size_t i = 0; i < N; ++i)
                for (int q = 0; q < n; ++q) c.data[i * n + q] += delta / std::sqrt(static_cast<double>(n));
            return c;
        }
        std::vector<double> xi(c.data.size());
        for (std::size_t i = 0; i < N; ++i) nf.normals(nf.key(kStreamPerturb, 0, i), 0, xi.data() + i * n, n);
        double ss = 0;
        for (double v : xi) ss += v * v;
        const double scale = delta / std::sqrt(ss / static_cast<double>(N));
        for (std::size_t q = 0; q < xi.size(); ++q) c.data[q] += scale * xi[q];
        return c;
    }
    case InitialCondition::Kind::mixture:
        break;
    }
    std::vector<Eigen::MatrixXd> L;
    double wsum = 0;
    for (const auto& comp : ic.components) {
        L.push_back(Eigen::LLT<Eigen::MatrixXd>(comp.cov).matrixL());
        wsum += comp.weight;
    }
    ParticleCloud c(N, n);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t pick = 0;
        if (ic.components.size() > 1) {
            double u = unit_uniform(splitmix64(nf.key(kStreamPick, 0, i))) * wsum;
            while (pick + 1 < ic.components.size() && u >= ic.components[pick].weight) u -= ic.components[pick++].weight;
        }
        nf.normals(nf.key(kStreamInit, 0, i), 0, z.data(), n);
        const auto& comp = ic.components[pick];
        for (int r = 0; r < n; ++r) {
            double acc = comp.mean[r];
            for (int q = 0; q <= r; ++q) acc += L[pick](r, q) * z[q];
            c.data[i * n + r] = acc;
        }
    }
    return c;
}

json StabilityReport::to_json() const
{
    return {{"config", config},
            {"model", model},
            {"p", std::isinf(p) ? json("inf") : json(p)},
            {"eps_cut", eps_cut},
            {"d2sq_initial", d2sq_initial},
            {"fitted_C", fitted_C},
            {"growth_C", growth_C},
            {"min_slack", min_slack},
            {"dominated", dominated},
            {"omega", omega},
            {"sup_d2sq", d2sq.empty() ? 0.0 : *std::max_element(d2sq.begin(), d2sq.end())},
            {"series",
             {{"t", t},
              {"d2sq", d2sq},
              {"norm_max", norm_max},
              {"m2f", m2f},
              {"m2g", m2g},
              {"bound_oracle", bound_oracle},
              {"bound_H", bound_H},
              {"h_branch", h_branch}}},
            {"snapshots", {{"t", snapshot_t}, {"d2sq_plan", snapshot_d2_plan}, {"d2sq_exact", snapshot_d2_exact}}},
            {"assumptions", assumptions}};
}

double fit_osgood_constant(double x0, const std::vector<double>& t, const std::vector<double>& target,
                           const std::vector<double>& m_t, const std::vector<double>& m_v, double T)
{
    if (t.size() != target.size()) throw InvalidArgument("fit_osgood_constant: size mismatch");
    const Sampled m{m_t, m_v};
    auto dominates = [&](double C) {
        if (T <= 0) return std::all_of(target.begin(), target.end(), [&](double v) { return v <= x0; });
        const OsgoodResult r = osgood_solve(x0, m, C, T, 4000);
        for (std::size_t q = 0; q < t.size(); ++q)
            if (r.at(t[q]) < target[q]) return false;
        return true;
    };
    if (dominates(0.0)) return 0.0;
    if (x0 <= 0) return std::numeric_limits<double>::infinity();
    double hi = 1.0;
    while (!dominates(hi)) {
        hi *= 2.0;
        if (hi > 1e12) return std::numeric_limits<double>::infinity();
    }
    double lo = hi / 2.0;
    if (hi == 1.0) lo = 0.0;
    for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (dominates(mid) ? hi : lo) = mid;
    }
    return hi;
}

namespace {

double block_norm_max(const ParticleCloud& c, const ModelSpec& spec, std::optional<double> bw)
{
    double mx = 0;
    for (int b = 0; b < spec.k; ++b) mx = std::max(mx, lp_norm_estimate(marginal(c, spec, b), spec.p(), bw));
    return mx;
}

void write_series(const fs::path& path, const StabilityReport& r)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "t,d2sq,bound_oracle,bound_H,norm_max,m2f,m2g\n";
    for (std::size_t q = 0; q < r.t.size(); ++q)
        os << format_double(r.t[q]) << ',' << format_double(r.d2sq[q]) << ',' << format_double(r.bound_oracle[q])
           << ',' << format_double(r.bound_H[q]) << ',' << format_double(r.norm_max[q]) << ','
           << format_double(r.m2f[q]) << ',' << format_double(r.m2g[q]) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

StabilityReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const ModelSpec spec = builtin_model(cfg.model, cfg.model_params);
    const ParticleCloud f0 = sample_initial(cfg.f0, spec, cfg.N, splitmix64(cfg.seed ^ 0xf0));
    // g0 equal to f0 (or omitted) means the same cloud, not a second sample
    const ParticleCloud g0 = cfg.g0.to_json() == cfg.f0.to_json()
                                 ? f0
                                 : sample_initial(cfg.g0, spec, cfg.N, splitmix64(cfg.seed ^ 0x90), &f0);
    double eps = 0;
    if (cfg.eps_cut)
        eps = *cfg.eps_cut;
    else if (spec.alpha > 0 && spec.k > 0)
        eps = default_eps_cut(f0, spec, cfg.eps_scale);

    const fs::path out = cfg.output_dir;
    if (!cfg.output_dir.empty()) {
        fs::create_directories(out / "snapshots");
    }

    StabilityReport rep;
    rep.config = cfg.to_json();
    rep.model = spec.name;
    rep.p = spec.p();
    rep.eps_cut = eps;
    rep.assumptions = verify_assumptions(spec, 2000, cfg.seed).to_json();

    CoupledState st = init_coupled(f0, g0, cfg.seed, eps, cfg.refresh_interval);
    const int steps = cfg.steps();
    std::vector<double> norm_t, norm_v;

    auto snapshot = [&](int s) {
        const double d2 = w2_exact(st.X, st.Y).cost;
        rep.snapshot_t.push_back(s * cfg.dt);
        rep.snapshot_d2_plan.push_back(st.plan.cost);
        rep.snapshot_d2_exact.push_back(d2);
        if (!cfg.output_dir.empty()) {
            write_cloud_csv((out / "snapshots" / ("X_" + std::to_string(s) + ".csv")).string(), st.X);
            write_cloud_csv((out / "snapshots" / ("Y_" + std::to_string(s) + ".csv")).string(), st.Y);
        }
    };
    auto record = [&](int s) {
        const double t = s * cfg.dt;
        if (cfg.norm_every > 0 && (s % cfg.norm_every == 0 || s == steps) &&
            (norm_t.empty() || norm_t.back() < t)) {
            norm_t.push_back(t);
            norm_v.push_back(std::max(block_norm_max(st.X, spec, cfg.norm_bandwidth),
                                      block_norm_max(st.Y, spec, cfg.norm_bandwidth)));
        }
        if (s % cfg.record_every == 0 || s == steps) {
            rep.t.push_back(t);
            rep.d2sq.push_back(st.plan.cost);
            rep.m2f.push_back(second_moment(st.X));
            rep.m2g.push_back(second_moment(st.Y));
        }
        if (s == 0 || s == steps || (cfg.snapshot_every > 0 && s % cfg.snapshot_every == 0)) snapshot(s);
    };

    record(0);
    for (int s = 1; s <= steps; ++s) {
        try {
            step_coupled(st, spec, spec, cfg.dt);
        } catch (const NumericalError& e) {
            throw NumericalError("step " + std::to_string(s) + ": " + e.what());
        }
        record(s);
    }

    // m(t) = max(1, norms, second moments)
    if (norm_t.empty()) {
        norm_t.push_back(0.0);
        norm_v.push_back(0.0);
    }
    const Sampled norms{norm_t, norm_v};
    std::vector<double> mv(rep.t.size());
    for (std::size_t q = 0; q < rep.t.size(); ++q) {
        rep.norm_max.push_back(norms(rep.t[q]));
        mv[q] = std::max({1.0, rep.norm_max[q], rep.m2f[q], rep.m2g[q]});
    }
    rep.d2sq_initial = rep.d2sq.front();
    const double T = steps * cfg.dt;
    rep.fitted_C = fit_osgood_constant(rep.d2sq_initial, rep.t, rep.d2sq, rep.t, mv, T);
    for (std::size_t q = 0; q + 1 < rep.t.size(); ++q) {
        const double rise = rep.d2sq[q + 1] - rep.d2sq[q];
        const double den = (rep.t[q + 1] - rep.t[q]) * mv[q] * psi(rep.d2sq[q]);
        if (rise > 0 && den > 0) rep.growth_C = std::max(rep.growth_C, rise / den);
    }

    const Sampled m{rep.t, mv};
    const OsgoodResult orc = std::isfinite(rep.fitted_C) ? osgood_solve(rep.d2sq_initial, m, rep.fitted_C, T, 4000)
                                                         : OsgoodResult{{0.0}, {std::numeric_limits<double>::infinity()}};
    rep.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < rep.t.size(); ++q) {
        const double b = orc.at(rep.t[q]);
        const double y = rep.fitted_C * m.integral(rep.t[q]);
        rep.bound_oracle.push_back(b);
        rep.bound_H.push_back(std::isfinite(y) ? h_bound(rep.d2sq_initial, y) : std::numeric_limits<double>::infinity());
        rep.h_branch.push_back(std::isfinite(y) ? h_branch(rep.d2sq_initial, y) : 4);
        rep.min_slack = std::min(rep.min_slack, b - rep.d2sq[q]);
    }
    rep.dominated = rep.min_slack >= 0;
    OmegaInputs oi;
    oi.norm_l1t = norms.integral(T);
    oi.m2_f = *std::max_element(rep.m2f.begin(), rep.m2f.end());
    oi.m2_g = *std::max_element(rep.m2g.begin(), rep.m2g.end());
    oi.T = T;
    rep.omega = std::isfinite(rep.fitted_C) ? modulus_omega(rep.d2sq_initial, rep.fitted_C, oi)
                                            : std::numeric_limits<double>::infinity();
    rep.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!cfg.output_dir.empty()) {
        write_json(out / "report.json", rep.to_json());
        write_series(out / "d2_series.csv", rep);
        write_json(out / "timing.json", {{"wall_clock_seconds", rep.wall_clock}});
    }
    return rep;
}

json ScanReport::to_json() const
{
    return {{"deltas", deltas},   {"d2_initial", d2_initial}, {"d2_final", d2_final}, {"slope", slope},
            {"intercept", intercept}, {"slope_stderr", slope_stderr}, {"ci95", {ci_low, ci_high}}, {"T", T}};
}

ScanReport delta_scan(const ExperimentConfig& config, const std::vector<double>& deltas, int workers)
{
    if (deltas.size() < 3) throw ConfigError("delta_scan: need at least 3 deltas");
    for (std::size_t q = 0; q < deltas.size(); ++q) {
        if (!(deltas[q] > 0)) throw ConfigError("delta_scan: deltas must be positive");
        if (q > 0 && !(deltas[q] > deltas[q - 1])) throw ConfigError("delta_scan: deltas must be sorted ascending");
    }
    if (deltas.back() / deltas.front() < 100.0 * (1 - 1e-12)) throw ConfigError("delta_scan: deltas must span two decades");
    if (config.f0.kind == InitialCondition::Kind::file && config.g0.kind != InitialCondition::Kind::perturbation)
        throw ConfigError("delta_scan: g0 must be a perturbation");

    std::vector<ExperimentConfig> runs;
    for (std::size_t q = 0; q < deltas.size(); ++q) {
        ExperimentConfig c = config;
        c.g0 = InitialCondition{};
        c.g0.kind = InitialCondition::Kind::perturbation;
        c.g0.delta2 = deltas[q];
        c.g0.mode = config.g0.kind == InitialCondition::Kind::perturbation ? config.g0.mode : "random";
        c.deltas.clear();
        if (!config.output_dir.empty()) c.output_dir = (fs::path(config.output_dir) / ("delta_" + std::to_string(q))).string();
        runs.push_back(std::move(c));
    }
    if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<StabilityReport> reports(runs.size());
    for (std::size_t base = 0; base < runs.size(); base += workers) {
        std::vector<std::future<StabilityReport>> fut;
        for (std::size_t q = base; q < std::min(runs.size(), base + workers); ++q)
            fut.push_back(std::async(std::launch::async, [&runs, q] { return run_experiment(runs[q]); }));
        for (std::size_t q = 0; q < fut.size(); ++q) reports[base + q] = fut[q].get();
    }

    ScanReport sr;
    sr.deltas = deltas;
    sr.T = config.steps() * config.dt;
    std::vector<double> lx, ly;
    for (const auto& r : reports) {
        sr.d2_initial.push_back(r.d2sq.front());
        sr.d2_final.push_back(r.d2sq.back());
        if (!(r.d2sq.front() > 0) || !(r.d2sq.back() > 0))
            throw NumericalError("delta_scan: degenerate fit, d2 vanished; use larger deltas or N");
        lx.push_back(std::log(r.d2sq.front()));
        ly.push_back(std::log(r.d2sq.back()));
    }
    const LineFit fit = fit_line(lx, ly);
    if (!std::isfinite(fit.slope)) throw NumericalError("delta_scan: degenerate fit");
    sr.slope = fit.slope;
    sr.intercept = fit.intercept;
    sr.slope_stderr = fit.slope_stderr;
    const boost::math::students_t dist(static_cast<double>(deltas.size() - 2));
    const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    sr.ci_low = fit.slope - tq * fit.slope_stderr;
    sr.ci_high = fit.slope + tq * fit.slope_stderr;
    if (!config.output_dir.empty()) {
        fs::create_directories(config.output_dir);
        write_json(fs::path(config.output_dir) / "scan.json", sr.to_json());
    }
    return sr;
}

json HeatReport::to_json() const
{
    return {{"t", t},
            {"closed", closed},
            {"derivative", derivative},
            {"dissipation", dissipation},
            {"empirical", empirical},
            {"rel_error", rel_error},
            {"monotone", monotone},
            {"derivative_match", derivative_match},
            {"empirical_match", empirical_match},
            {"pass", pass}};
}

double heat_closed_form(double mu1, double s1, double mu2, double s2, double t)
{
    const double a = std::sqrt(s1 * s1 + 2 * t);
    const double b = std::sqrt(s2 * s2 + 2 * t);
    return (mu1 - mu2) * (mu1 - mu2) + (a - b) * (a - b);
}

double heat_dissipation(double s1, double s2, double t)
{
    // optimal map x -> mu2 + (b/a)(x - mu1); along the geodesic the Hessian of
    // the velocity potential is k/(1+sk) with k = b/a - 1, and rho_s has unit mass.
    const double a = std::sqrt(s1 * s1 + 2 * t);
    const double b = std::sqrt(s2 * s2 + 2 * t);
    const double k = b / a - 1.0;
    auto f = [k](double s) { return k * k / ((1 + s * k) * (1 + s * k)); };
    return -2.0 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 0, 1e-14);
}

HeatReport heat_dissipation_check(double mu1, double s1, double mu2, double s2, const std::vector<double>& t_grid,
                                  std::size_t N, std::uint64_t seed, double tolerance, int replicates)
{
    if (!(s1 > 0 && s2 > 0)) throw InvalidArgument("heatcheck: s1 and s2 must be positive");
    if (replicates < 1 || N < 2) throw InvalidArgument("heatcheck: need N >= 2 and replicates >= 1");
    if (t_grid.empty()) throw InvalidArgument("heatcheck: empty time grid");
    for (std::size_t q = 0; q < t_grid.size(); ++q)
        if (!(t_grid[q] >= 0) || (q > 0 && !(t_grid[q] > t_grid[q - 1])))
            throw InvalidArgument("heatcheck: times must be >= 0 and increasing");
    HeatReport r;
    const ModelSpec heat = builtin_model("heat", {{"dim", 1}});
    const boost::math::normal nd;
    ParticleCloud f(N, 1), g(N, 1);
    for (std::size_t i = 0; i < N; ++i) {
        const double z = boost::math::quantile(nd, (static_cast<double>(i) + 0.5) / static_cast<double>(N));
        f.data[i] = mu1 + s1 * z;
        g.data[i] = mu2 + s2 * z;
    }
    const double shift = (mu1 - mu2) * (mu1 - mu2);
    r.monotone = true;
    r.derivative_match = true;
    r.empirical_match = true;
    for (double t : t_grid) {
        const double d = heat_closed_form(mu1, s1, mu2, s2, t);
        const double h = 1e-4 * std::max(1.0, t);
        double der;
        if (t >= 2 * h)
            der = (heat_closed_form(mu1, s1, mu2, s2, t + h) - heat_closed_form(mu1, s1, mu2, s2, t - h)) / (2 * h);
        else
            der = (-3 * d + 4 * heat_closed_form(mu1, s1, mu2, s2, t + h) - heat_closed_form(mu1, s1, mu2, s2, t + 2 * h)) /
                  (2 * h);
        const double diss = heat_dissipation(s1, s2, t);
        double emp = w2_exact(f, g).cost;
        if (t > 0) {
            emp = 0;
            for (int rep = 0; rep < replicates; ++rep) {
                const std::uint64_t s = splitmix64(seed + 2 * static_cast<std::uint64_t>(rep));
                const ParticleCloud ft = step_single(f, heat, t, s, 0);
                const ParticleCloud gt = step_single(g, heat, t, splitmix64(s), 0);
                emp += w2_exact(ft, gt).cost;
            }
            emp /= replicates;
        }
        const double rel = d > 0 ? std::abs(emp - d) / d : std::abs(emp);
        if (!r.closed.empty() && d - shift > r.closed.back() - shift + 1e-15) r.monotone = false;
        if (der > 1e-12) r.monotone = false;
        if (std::abs(der - diss) > 1e-6 * std::max(1.0, std::abs(diss))) r.derivative_match = false;
        if (rel > tolerance) r.empirical_match = false;
        r.t.push_back(t);
        r.closed.push_back(d);
        r.derivative.push_back(der);
        r.dissipation.push_back(diss);
        r.empirical.push_back(emp);
        r.rel_error.push_back(rel);
    }
    r.pass = r.monotone && r.derivative_match && r.empirical_match;
    return r;
}

ParticleCloud integrate_deterministic(const ParticleCloud& cloud, const ModelSpec& spec, double dt, int steps)
{
    if (spec.m || spec.has_sigma) throw InvalidArgument("integrate_deterministic: model has noise");
    if (spec.n != cloud.n) throw InvalidArgument("integrate_deterministic: dimension mismatch");
    if (!(dt != 0) || !std::isfinite(dt) || steps < 0) throw InvalidArgument("integrate_deterministic: bad dt or steps");
    const std::size_t N = cloud.size();
    const int n = cloud.n;
    std::vector<double> z(n), b(n);
    auto velocity = [&](const std::vector<double>& x, std::vector<double>& v) {
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            double* vi = v.data() + i * n;
            const double* xi = x.data() + i * n;
            if (spec.c) spec.c(ConstVec(xi, n), vi);
            if (!spec.interaction || !spec.has_b) continue;
            for (std::size_t k = 0; k < N; ++k) {
                if (k == i) continue;
                for (int q = 0; q < n; ++q) z[q] = xi[q] - x[k * n + q];
                spec.interaction(ConstVec(z.data(), n), b.data(), nullptr);
                for (int q = 0; q < n; ++q) vi[q] += b[q] / static_cast<double>(N);
            }
        }
        for (double w : v)
            if (!std::isfinite(w)) throw NumericalError("integrate_deterministic: non-finite velocity");
    };
    ParticleCloud out = cloud;
    std::vector<double>& x = out.data;
    std::vector<double> k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size()), tmp(x.size());
    for (int s = 0; s < steps; ++s) {
        velocity(x, k1);
        for (std::size_t q = 0; q < x.size(); ++q) tmp[q] = x[q] + 0.5 * dt * k1[q];
        velocity(tmp, k2);
        for (std::size_t q = 0; q < x.size(); ++q) tmp[q] = x[q] + 0.5 * dt * k2[q];
        velocity(tmp, k3);
        for (std::size_t q = 0; q < x.size(); ++q) tmp[q] = x[q] + dt * k3[q];
        velocity(tmp, k4);
        for (std::size_t q = 0; q < x.size(); ++q) x[q] += dt / 6.0 * (k1[q] + 2 * k2[q] + 2 * k3[q] + k4[q]);
    }
    out.time = cloud.time + dt * steps;
    return out;
}

json VortexReport::to_json() const
{
    return {{"reversibility_error", reversibility_error}, {"fitted_C", fitted_C}, {"validated", validated},
            {"t", t}, {"d2sq", d2sq}, {"bound", bound}};
}

VortexReport vortex_check(const ParticleCloud& vortices, double delta2, double dt, double T, std::uint64_t seed,
                          int record_every)
{
    if (!(delta2 > 0)) throw InvalidArgument("vortex_check: delta2 must be positive");
    if (record_every < 1) throw InvalidArgument("vortex_check: record_every must be >= 1");
    const ModelSpec spec = builtin_model("euler2d");
    if (vortices.n != spec.n) throw InvalidArgument("vortex_check: vortices must be 2-d");
    const int steps = static_cast<int>(std::llround(T / dt));
    VortexReport r;

    const ParticleCloud fwd = integrate_deterministic(vortices, spec, dt, steps);
    const ParticleCloud back = integrate_deterministic(fwd, spec, -dt, steps);
    for (std::size_t q = 0; q < vortices.data.size(); ++q)
        r.reversibility_error = std::max(r.reversibility_error, std::abs(back.data[q] - vortices.data[q]));

    InitialCondition pert;
    pert.kind = InitialCondition::Kind::perturbation;
    pert.delta2 = delta2;
    ParticleCloud X = vortices;
    ParticleCloud Y = sample_initial(pert, spec, vortices.size(), seed, &vortices);
    r.t.push_back(0.0);
    r.d2sq.push_back(w2_exact(X, Y).cost);
    for (int s = record_every; s <= steps; s += record_every) {
        X = integrate_deterministic(X, spec, dt, record_every);
        Y = integrate_deterministic(Y, spec, dt, record_every);
        r.t.push_back(s * dt);
        r.d2sq.push_back(w2_exact(X, Y).cost);
    }
    const double x0 = r.d2sq.front();
    for (std::size_t q = 1; q < r.t.size(); ++q)
        if (r.t[q] <= 0.25 * T * (1 + 1e-12))
            r.fitted_C = std::max(r.fitted_C, h_bound_inverse(x0, r.d2sq[q]) / r.t[q]);
    r.validated = true;
    for (std::size_t q = 0; q < r.t.size(); ++q) {
        r.bound.push_back(h_bound(x0, r.fitted_C * r.t[q]));
        if (r.t[q] > 0.25 * T * (1 + 1e-12) && r.d2sq[q] > r.bound.back() * (1 + 1e-12)) r.validated = false;
    }
    return r;
}

json RefinementReport::to_json() const
{
    return {{"dt", dt}, {"N", N}, {"functions", functions}, {"residual", residual},
            {"strictly_decreasing", strictly_decreasing}};
}

RefinementReport weak_residual_refinement(double dt0, std::size_t N0, int levels, double T, int replicates,
                                          std::uint64_t seed)
{
    if (levels < 2 || replicates < 1) throw InvalidArgument("refinement: need >= 2 levels and >= 1 replicate");
    const ModelSpec heat = builtin_model("heat", {{"dim", 1}});
    const auto fns = standard_test_functions(3.0);
    RefinementReport r;
    for (const auto& f : fns) r.functions.push_back(f.name);
    InitialCondition ic;
    ic.components.push_back({1.0, {0.0}, Eigen::MatrixXd::Identity(1, 1)});
    double dt = dt0;
    std::size_t N = N0;
    for (int l = 0; l < levels; ++l) {
        const int steps = static_cast<int>(std::llround(T / dt));
        std::vector<double> ss(fns.size(), 0.0);
        for (int rep = 0; rep < replicates; ++rep) {
            const std::uint64_t s = splitmix64(seed + 1000003ULL * l + rep);
            const ParticleCloud f0 = sample_initial(ic, heat, N, s);
            const auto traj = simulate_single(f0, heat, dt, steps, splitmix64(s));
            const auto res = weak_form_residual(traj, heat, dt, fns);
            for (std::size_t q = 0; q < fns.size(); ++q) ss[q] += res[q] * res[q];
        }
        std::vector<double> rms;
        for (double v : ss) rms.push_back(std::sqrt(v / replicates));
        r.dt.push_back(dt);
        r.N.push_back(N);
        r.residual.push_back(rms);
        dt /= 2;
        N *= 4;
    }
    r.strictly_decreasing = true;
    for (int l = 1; l < levels; ++l)
        for (std::size_t q = 0; q < fns.size(); ++q)
            if (!(r.residual[l][q] < r.residual[l - 1][q])) r.strictly_decreasing = false;
    return r;
}

}  // namespace nlfp
