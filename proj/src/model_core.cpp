#include "nlfp/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace nlfp {

double ModelSpec::p() const
{
    if (alpha >= d) return std::numeric_limits<double>::infinity();
    return d / (d - alpha);
}

Eigen::VectorXd ModelSpec::c_eval(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (c) c(ConstVec(x.data(), n), out.data());
    return out;
}

Eigen::MatrixXd ModelSpec::m_eval(const Eigen::VectorXd& x) const
{
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out =
        Eigen::MatrixXd::Zero(n, n);
    if (m) m(ConstVec(x.data(), n), out.data());
    return out;
}

Eigen::VectorXd ModelSpec::b_eval(const Eigen::VectorXd& z) const
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (interaction && has_b) interaction(ConstVec(z.data(), n), out.data(), nullptr);
    return out;
}

Eigen::MatrixXd ModelSpec::sigma_eval(const Eigen::VectorXd& z) const
{
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out =
        Eigen::MatrixXd::Zero(n, noise_dim);
    if (interaction && has_sigma && noise_dim > 0) interaction(ConstVec(z.data(), n), nullptr, out.data());
    return out;
}

double ModelSpec::min_block_norm(ConstVec z) const
{
    double r = std::numeric_limits<double>::infinity();
    for (int off : block_offsets) {
        double s = 0;
        for (int q = 0; q < d; ++q) s += z[off + q] * z[off + q];
        r = std::min(r, std::sqrt(s));
    }
    return r;
}

nlohmann::json AssumptionReport::to_json() const
{
    return {{"model", model},         {"samples", samples},       {"min_block_norm", min_block_norm},
            {"ratio_b", ratio_b},     {"ratio_sigma", ratio_sigma}, {"ratio_lip", ratio_lip},
            {"K", K},                 {"pass", pass}};
}

namespace {

double block_power_sum(const ModelSpec& spec, const Eigen::VectorXd& x, double e)
{
    double s = 0;
    for (int off : spec.block_offsets) s += std::pow(x.segment(off, spec.d).norm(), e);
    return s;
}

// Point whose singular blocks have log-uniform radii in [r_min, 10].
Eigen::VectorXd sample_point(const ModelSpec& spec, std::mt19937_64& rng, double r_min)
{
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(std::log(r_min), std::log(10.0));
    Eigen::VectorXd x(spec.n);
    const double scale = std::exp(u(rng));
    for (int i = 0; i < spec.n; ++i) x[i] = scale * g(rng);
    for (int off : spec.block_offsets) {
        Eigen::VectorXd dir(spec.d);
        for (int q = 0; q < spec.d; ++q) dir[q] = g(rng);
        const double nd = dir.norm();
        if (nd == 0) dir[0] = 1;
        x.segment(off, spec.d) = std::exp(u(rng)) * dir / dir.norm();
    }
    return x;
}

void require_finite(const Eigen::MatrixXd& m, const std::string& what)
{
    if (!m.allFinite()) throw NumericalError("verify_assumptions: non-finite " + what);
}

}  // namespace

AssumptionReport verify_assumptions(const ModelSpec& spec, int n_samples, std::uint64_t seed, double min_block_norm)
{
    if (n_samples < 1) throw InvalidArgument("verify_assumptions: n_samples must be >= 1");
    if (!(min_block_norm > 0)) throw InvalidArgument("verify_assumptions: threshold must be positive");
    AssumptionReport rep;
    rep.model = spec.name;
    rep.samples = n_samples;
    rep.min_block_norm = min_block_norm;
    rep.K = spec.K;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lu(std::log(1e-6), 0.0);
    std::normal_distribution<double> g;
    for (int s = 0; s < n_samples; ++s) {
        const Eigen::VectorXd x = sample_point(spec, rng, min_block_norm);
        const Eigen::VectorXd bx = spec.b_eval(x);
        const Eigen::MatrixXd sx = spec.sigma_eval(x);
        require_finite(bx, "b");
        require_finite(sx, "sigma");
        rep.ratio_b = std::max(rep.ratio_b, bx.norm() / (1.0 + block_power_sum(spec, x, 1.0 - spec.alpha)));
        rep.ratio_sigma =
            std::max(rep.ratio_sigma, sx.norm() / (1.0 + block_power_sum(spec, x, 1.0 - spec.alpha / 2.0)));

        // Pair partner: alternate between a nearby point and an independent one.
        Eigen::VectorXd y;
        for (int attempt = 0; attempt < 100; ++attempt) {
            if (s % 2 == 0) {
                Eigen::VectorXd dir(spec.n);
                for (int i = 0; i < spec.n; ++i) dir[i] = g(rng);
                y = x + std::exp(lu(rng)) * x.norm() * dir / dir.norm();
            } else {
                y = sample_point(spec, rng, min_block_norm);
            }
            if (spec.min_block_norm(ConstVec(y.data(), spec.n)) >= min_block_norm && (y - x).norm() > 0) break;
            y.resize(0);
        }
        if (y.size() == 0) continue;
        const Eigen::VectorXd by = spec.b_eval(y);
        const Eigen::MatrixXd sy = spec.sigma_eval(y);
        require_finite(by, "b");
        require_finite(sy, "sigma");
        const double dxy = (x - y).norm();
        const double q = (bx - by).norm() / dxy + (sx - sy).squaredNorm() / (dxy * dxy);
        const double w = 1.0 + block_power_sum(spec, x, -spec.alpha) + block_power_sum(spec, y, -spec.alpha);
        rep.ratio_lip = std::max(rep.ratio_lip, q / w);
    }
    rep.pass = std::isfinite(rep.ratio_b) && std::isfinite(rep.ratio_sigma) && std::isfinite(rep.ratio_lip) &&
               rep.ratio_b <= spec.K && rep.ratio_sigma <= spec.K && rep.ratio_lip <= spec.K;
    return rep;
}

ParticleCloud marginal(const ParticleCloud& cloud, const ModelSpec& spec, int block)
{
    if (block < 0 || block >= spec.k) throw InvalidArgument("marginal: block index out of range");
    if (cloud.n != spec.n) throw InvalidArgument("marginal: cloud dimension does not match spec");
    std::vector<int> coords(spec.d);
    for (int q = 0; q < spec.d; ++q) coords[q] = spec.block_offsets[block] + q;
    return select_coordinates(cloud, coords);
}

ParticleCloud select_coordinates(const ParticleCloud& cloud, const std::vector<int>& coords)
{
    for (int c : coords)
        if (c < 0 || c >= cloud.n) throw InvalidArgument("select_coordinates: coordinate out of range");
    const std::size_t N = cloud.size();
    ParticleCloud out(N, static_cast<int>(coords.size()), cloud.time);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t q = 0; q < coords.size(); ++q) out.data[i * coords.size() + q] = cloud.data[i * cloud.n + coords[q]];
    return out;
}

double silverman_bandwidth(const ParticleCloud& cloud)
{
    const std::size_t N = cloud.size();
    const int D = cloud.n;
    if (N == 0) throw InvalidArgument("silverman_bandwidth: empty cloud");
    double sd = 0;
    for (int q = 0; q < D; ++q) {
        double mean = 0;
        for (std::size_t i = 0; i < N; ++i) mean += cloud.data[i * D + q];
        mean /= static_cast<double>(N);
        double var = 0;
        for (std::size_t i = 0; i < N; ++i) var += (cloud.data[i * D + q] - mean) * (cloud.data[i * D + q] - mean);
        sd += std::sqrt(var / static_cast<double>(N));
    }
    sd /= D;
    if (!(sd > 0)) return 1.0;
    return sd * std::pow(4.0 / ((D + 2.0) * static_cast<double>(N)), 1.0 / (D + 4.0));
}

double lp_norm_estimate(const ParticleCloud& cloud, double p, std::optional<double> bandwidth)
{
    const std::size_t N = cloud.size();
    const int D = cloud.n;
    if (N == 0 || D == 0) throw InvalidArgument("lp_norm_estimate: empty cloud");
    if (!(p >= 1)) throw InvalidArgument("lp_norm_estimate: p must be >= 1");
    const double h = bandwidth ? *bandwidth : silverman_bandwidth(cloud);
    if (!(h > 0)) throw InvalidArgument("lp_norm_estimate: bandwidth must be positive");

    constexpr double reach = 8.0;  // kernel support in bandwidths
    constexpr double max_cells = 2.0e6;
    std::vector<double> lo(D), hi(D);
    for (int q = 0; q < D; ++q) {
        lo[q] = std::numeric_limits<double>::infinity();
        hi[q] = -lo[q];
        for (std::size_t i = 0; i < N; ++i) {
            lo[q] = std::min(lo[q], cloud.data[i * D + q]);
            hi[q] = std::max(hi[q], cloud.data[i * D + q]);
        }
        lo[q] -= reach * h;
        hi[q] += reach * h;
    }
    double spacing = 0.5 * h;
    auto cells_for = [&](double dx) {
        double c = 1;
        for (int q = 0; q < D; ++q) c *= std::floor((hi[q] - lo[q]) / dx) + 2;
        return c;
    };
    while (cells_for(spacing) > max_cells) spacing *= 1.1;

    std::vector<long> dims(D);
    std::vector<long> stride(D);
    long total = 1;
    for (int q = D - 1; q >= 0; --q) {
        dims[q] = static_cast<long>(std::floor((hi[q] - lo[q]) / spacing)) + 2;
        stride[q] = total;
        total *= dims[q];
    }
    std::vector<double> grid(static_cast<std::size_t>(total), 0.0);
    const double norm1d = 1.0 / (std::sqrt(2.0 * M_PI) * h);

    std::vector<std::vector<double>> w(D);
    std::vector<long> first(D), count(D), idx(D);
    for (std::size_t i = 0; i < N; ++i) {
        for (int q = 0; q < D; ++q) {
            const double x = cloud.data[i * D + q];
            long a = std::max(0L, static_cast<long>(std::ceil((x - reach * h - lo[q]) / spacing)));
            long b = std::min(dims[q] - 1, static_cast<long>(std::floor((x + reach * h - lo[q]) / spacing)));
            first[q] = a;
            count[q] = std::max(0L, b - a + 1);
            w[q].resize(count[q]);
            for (long g = 0; g < count[q]; ++g) {
                const double t = (lo[q] + (a + g) * spacing - x) / h;
                w[q][g] = norm1d * std::exp(-0.5 * t * t);
            }
        }
        bool empty = false;
        for (int q = 0; q < D; ++q) empty = empty || count[q] == 0;
        if (empty) continue;
        // odometer over the local box; innermost dimension is the last one
        std::fill(idx.begin(), idx.end(), 0L);
        while (true) {
            double prod = 1.0;
            long off = 0;
            for (int q = 0; q < D - 1; ++q) {
                prod *= w[q][idx[q]];
                off += (first[q] + idx[q]) * stride[q];
            }
            double* row = grid.data() + off + first[D - 1];
            const double* wl = w[D - 1].data();
            for (long g = 0; g < count[D - 1]; ++g) row[g] += prod * wl[g];
            int q = D - 2;
            while (q >= 0) {
                if (++idx[q] < count[q]) break;
                idx[q] = 0;
                --q;
            }
            if (q < 0) break;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(N);
    if (std::isinf(p)) {
        double mx = 0;
        for (double v : grid) mx = std::max(mx, v);
        return mx * inv_n;
    }
    double cell = std::pow(spacing, D);
    double s = 0;
    for (double v : grid) s += std::pow(v * inv_n, p);
    return std::pow(s * cell, 1.0 / p);
}

double second_moment(const ParticleCloud& cloud)
{
    const std::size_t N = cloud.size();
    if (N == 0) throw InvalidArgument("second_moment: empty cloud");
    double s = 0;
    for (double v : cloud.data) s += v * v;
    return s / static_cast<double>(N);
}

void write_cloud_csv(std::ostream& os, const ParticleCloud& cloud)
{
    os << "t";
    for (int q = 0; q < cloud.n; ++q) os << ",x" << q;
    os << '\n';
    const std::string t = format_double(cloud.time);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        os << t;
        for (int q = 0; q < cloud.n; ++q) os << ',' << format_double(cloud.data[i * cloud.n + q]);
        os << '\n';
    }
}

void write_cloud_csv(const std::string& path, const ParticleCloud& cloud)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_cloud_csv(os, cloud);
}

ParticleCloud read_cloud_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw InvalidArgument("read_cloud_csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) head.push_back(tok);
    }
    if (head.size() < 2 || head[0] != "t") throw InvalidArgument("read_cloud_csv: header must be t,x0,...");
    for (std::size_t q = 1; q < head.size(); ++q)
        if (head[q] != "x" + std::to_string(q - 1)) throw InvalidArgument("read_cloud_csv: bad column name " + head[q]);
    ParticleCloud cloud;
    cloud.n = static_cast<int>(head.size()) - 1;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) row.push_back(parse_double(tok));
        if (static_cast<int>(row.size()) != cloud.n + 1) throw InvalidArgument("read_cloud_csv: ragged row");
        if (first) {
            cloud.time = row[0];
            first = false;
        }
        cloud.data.insert(cloud.data.end(), row.begin() + 1, row.end());
    }
    return cloud;
}

ParticleCloud read_cloud_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open " + path);
    return read_cloud_csv(is);
}

}  // namespace nlfp
