#include "nlfp/coupling.hpp"

#include <cmath>
#include <numeric>

#include "nlfp/kernels.hpp"

namespace nlfp {

namespace {

constexpr std::uint64_t kStreamB = 0;
constexpr std::uint64_t kStreamW = 1;
constexpr std::uint64_t kStreamPicardB = 2;
constexpr std::uint64_t kStreamPicardW = 3;

struct Workspace {
    std::vector<double> z, b, sig, drift, sb, sn, mmat, mterm;

    void resize(const ModelSpec& s)
    {
        const int n = s.n;
        z.assign(n, 0.0);
        b.assign(n, 0.0);
        sig.assign(static_cast<std::size_t>(n) * std::max(1, s.noise_dim), 0.0);
        drift.assign(n, 0.0);
        sb.assign(n, 0.0);
        sn.assign(n, 0.0);
        mmat.assign(static_cast<std::size_t>(n) * n, 0.0);
        mterm.assign(n, 0.0);
    }
};

// Gaussian draws for one particle: n for the m-noise, N x noise_dim for the atoms.
struct NoiseRow {
    std::vector<double> wrow, bnoise;

    void resize(const ModelSpec& s, std::size_t N)
    {
        wrow.assign(N * std::max(1, s.noise_dim), 0.0);
        bnoise.assign(s.n, 0.0);
    }
};

bool uses_w(const ModelSpec& s) { return s.interaction && s.has_sigma && s.noise_dim > 0; }

void fill_noise(const NoiseField& nf, std::uint64_t sb, std::uint64_t sw, std::size_t step, std::uint64_t label_i,
                const std::vector<std::uint64_t>& labels, const ModelSpec& s, NoiseRow& ws)
{
    if (s.m) nf.normals(nf.key(sb, step, label_i), 0, ws.bnoise.data(), s.n);
    if (uses_w(s)) {
        const std::uint64_t key = nf.key(sw, step, label_i);
        const int m = s.noise_dim;
        for (std::size_t k = 0; k < labels.size(); ++k) nf.normals(key, labels[k], ws.wrow.data() + k * m, m);
    }
}

void check_finite(const std::vector<double>& v, int n, const char* term, std::size_t i)
{
    for (int q = 0; q < n; ++q)
        if (!std::isfinite(v[q]))
            throw NumericalError(std::string("step: non-finite ") + term + " at particle " + std::to_string(i));
}

// New position of x driven by cloud P. self is the index of x in P or -1.
void increment(const double* x, long self, const ParticleCloud& P, const ModelSpec& s, double dt, const NoiseRow& nr,
               Workspace& ws, double* out)
{
    const int n = s.n;
    const int m = s.noise_dim;
    const std::size_t N = P.size();
    const ConstVec xs(x, n);
    std::fill(ws.drift.begin(), ws.drift.end(), 0.0);
    std::fill(ws.sb.begin(), ws.sb.end(), 0.0);
    std::fill(ws.sn.begin(), ws.sn.end(), 0.0);
    std::fill(ws.mterm.begin(), ws.mterm.end(), 0.0);
    if (s.c) s.c(xs, ws.drift.data());
    if (s.m) {
        s.m(xs, ws.mmat.data());
        for (int r = 0; r < n; ++r) {
            double acc = 0;
            for (int q = 0; q < n; ++q) acc += ws.mmat[r * n + q] * nr.bnoise[q];
            ws.mterm[r] = acc;
        }
    }
    const bool want_b = s.interaction && s.has_b;
    const bool want_w = uses_w(s);
    if (want_b || want_w) {
        double* bp = want_b ? ws.b.data() : nullptr;
        double* sp = want_w ? ws.sig.data() : nullptr;
        const ConstVec zs(ws.z.data(), n);
        for (std::size_t k = 0; k < N; ++k) {
            const bool is_self = static_cast<long>(k) == self;
            if (is_self && !want_w) continue;
            const double* xk = P.data.data() + k * n;
            for (int q = 0; q < n; ++q) ws.z[q] = x[q] - xk[q];
            s.interaction(zs, is_self ? nullptr : bp, sp);
            if (want_b && !is_self)
                for (int q = 0; q < n; ++q) ws.sb[q] += ws.b[q];
            if (want_w) {
                const double* w = nr.wrow.data() + k * m;
                for (int r = 0; r < n; ++r) {
                    const double* srow = ws.sig.data() + static_cast<std::size_t>(r) * m;
                    double acc = 0;
                    for (int c = 0; c < m; ++c) acc += srow[c] * w[c];
                    ws.sn[r] += acc;
                }
            }
        }
    }
    const std::size_t idx = self >= 0 ? static_cast<std::size_t>(self) : 0;
    check_finite(ws.drift, n, "drift c", idx);
    check_finite(ws.sb, n, "interaction drift b", idx);
    check_finite(ws.mterm, n, "noise m", idx);
    check_finite(ws.sn, n, "noise sigma", idx);
    const double invN = 1.0 / static_cast<double>(N);
    const double sq = std::sqrt(2.0 * dt);
    const double sqn = std::sqrt(2.0 * dt * invN);
    for (int q = 0; q < n; ++q) out[q] = x[q] + dt * (ws.drift[q] + ws.sb[q] * invN) + sq * ws.mterm[q] + sqn * ws.sn[q];
}

std::vector<std::uint64_t> default_labels(std::size_t N)
{
    std::vector<std::uint64_t> l(N);
    std::iota(l.begin(), l.end(), 0);
    return l;
}

ModelSpec regularized(const ModelSpec& s, double eps_cut)
{
    if (eps_cut > 0 && s.interaction) return cutoff_coefficients(s, eps_cut);
    return s;
}

void refresh(CoupledState& st)
{
    // on the line sorting beats the warm-started solver; its duals are then unused
    const bool line = st.X.n == 1;
    const TransportPlan p = line ? w2_exact(st.X, st.Y) : w2_exact(st.X, st.Y, st.solver);
    st.last_pairing = p.pairing;
    st.last_refresh_cost = p.cost;
    ParticleCloud y(st.Y.size(), st.Y.n, st.Y.time);
    for (std::size_t i = 0; i < st.Y.size(); ++i) {
        auto src = st.Y.point(static_cast<std::size_t>(p.pairing[i]));
        std::copy(src.begin(), src.end(), y.point(i).begin());
    }
    st.Y = std::move(y);
    st.plan.pairing.resize(st.X.size());
    std::iota(st.plan.pairing.begin(), st.plan.pairing.end(), 0);
    st.plan.cost = p.cost;
    st.plan.time = st.X.time;
    // keep the duals valid for the reindexed columns
    if (!line) st.solver.permute_columns(p.pairing);
}

}  // namespace

double default_eps_cut(const ParticleCloud& f0, const ModelSpec& spec, double scale)
{
    const std::size_t N = f0.size();
    if (N == 0) throw InvalidArgument("default_eps_cut: empty cloud");
    double acc = 0;
    for (int off : spec.block_offsets)
        for (int q = 0; q < spec.d; ++q) {
            double mean = 0;
            for (std::size_t i = 0; i < N; ++i) mean += f0.data[i * f0.n + off + q];
            mean /= static_cast<double>(N);
            for (std::size_t i = 0; i < N; ++i) {
                const double d = f0.data[i * f0.n + off + q] - mean;
                acc += d * d;
            }
        }
    const double spread = std::sqrt(acc / (static_cast<double>(N) * std::max(1, spec.k)));
    return scale * spread * std::pow(static_cast<double>(N), -1.0 / (2.0 * spec.d));
}

CoupledState init_coupled(const ParticleCloud& f0, const ParticleCloud& g0, std::uint64_t seed, double eps_cut,
                          int refresh_interval)
{
    if (f0.size() != g0.size()) throw InvalidArgument("init_coupled: clouds must have equal size");
    if (f0.n != g0.n) throw InvalidArgument("init_coupled: dimension mismatch");
    if (!(eps_cut >= 0)) throw InvalidArgument("init_coupled: eps_cut must be >= 0");
    if (refresh_interval < 0) throw InvalidArgument("init_coupled: refresh_interval must be >= 0");
    CoupledState st;
    st.X = f0;
    st.Y = g0;
    st.seed = seed;
    st.eps_cut = eps_cut;
    st.refresh_interval = refresh_interval;
    st.labels = default_labels(f0.size());
    refresh(st);
    return st;
}

void step_coupled(CoupledState& st, const ModelSpec& spec_f, const ModelSpec& spec_g, double dt)
{
    if (!(dt > 0)) throw InvalidArgument("step_coupled: dt must be positive");
    if (spec_f.n != st.X.n || spec_g.n != st.Y.n) throw InvalidArgument("step_coupled: spec dimension mismatch");
    if (spec_f.noise_dim != spec_g.noise_dim) throw InvalidArgument("step_coupled: specs must share the noise dimension");
    const ModelSpec sf = regularized(spec_f, st.eps_cut);
    const ModelSpec sg = regularized(spec_g, st.eps_cut);
    const std::size_t N = st.X.size();
    const NoiseField nf(st.seed);
    Workspace wf, wg;
    wf.resize(sf);
    wg.resize(sg);
    NoiseRow nr;
    nr.resize(sf, N);
    ParticleCloud X(N, st.X.n, st.X.time + dt), Y(N, st.Y.n, st.Y.time + dt);
    for (std::size_t i = 0; i < N; ++i) {
        fill_noise(nf, kStreamB, kStreamW, st.step_index, st.labels[i], st.labels, sf, nr);
        increment(st.X.data.data() + i * st.X.n, static_cast<long>(i), st.X, sf, dt, nr, wf, X.data.data() + i * X.n);
        increment(st.Y.data.data() + i * st.Y.n, static_cast<long>(i), st.Y, sg, dt, nr, wg, Y.data.data() + i * Y.n);
    }
    st.X = std::move(X);
    st.Y = std::move(Y);
    ++st.step_index;
    if (st.refresh_interval > 0 && st.step_index % static_cast<std::size_t>(st.refresh_interval) == 0) {
        refresh(st);
    } else {
        st.plan.cost = plan_cost(st.X, st.Y, st.plan.pairing);
        st.plan.time = st.X.time;
    }
}

ParticleCloud step_single(const ParticleCloud& cloud, const ModelSpec& spec, double dt, std::uint64_t seed,
                          std::size_t step_index, double eps_cut, const std::vector<std::uint64_t>* labels)
{
    if (dt == 0 || !std::isfinite(dt)) throw InvalidArgument("step_single: dt must be finite and non-zero");
    if (spec.n != cloud.n) throw InvalidArgument("step_single: spec dimension mismatch");
    const bool noisy = spec.m || uses_w(spec);
    if (dt < 0 && noisy) throw InvalidArgument("step_single: negative dt only for noise-free models");
    const std::size_t N = cloud.size();
    const std::vector<std::uint64_t> own = labels ? std::vector<std::uint64_t>{} : default_labels(N);
    const std::vector<std::uint64_t>& lab = labels ? *labels : own;
    if (lab.size() != N) throw InvalidArgument("step_single: labels size mismatch");
    const ModelSpec s = regularized(spec, eps_cut);
    const NoiseField nf(seed);
    Workspace ws;
    ws.resize(s);
    NoiseRow nr;
    nr.resize(s, N);
    ParticleCloud out(N, cloud.n, cloud.time + dt);
    // negative dt: integrate backwards, no noise
    const double h = std::abs(dt);
    for (std::size_t i = 0; i < N; ++i) {
        fill_noise(nf, kStreamB, kStreamW, step_index, lab[i], lab, s, nr);
        increment(cloud.data.data() + i * cloud.n, static_cast<long>(i), cloud, s, h, nr, ws,
                  out.data.data() + i * cloud.n);
        if (dt < 0) {
            const double* x = cloud.data.data() + i * cloud.n;
            double* o = out.data.data() + i * cloud.n;
            for (int q = 0; q < cloud.n; ++q) o[q] = x[q] - (o[q] - x[q]);
        }
    }
    return out;
}

std::vector<ParticleCloud> simulate_single(const ParticleCloud& cloud, const ModelSpec& spec, double dt, int steps,
                                           std::uint64_t seed, double eps_cut)
{
    std::vector<ParticleCloud> traj;
    traj.reserve(steps + 1);
    traj.push_back(cloud);
    for (int s = 0; s < steps; ++s) traj.push_back(step_single(traj.back(), spec, dt, seed, s, eps_cut));
    return traj;
}

PicardResult picard_diagnostics(const std::vector<ParticleCloud>& f_frozen, const ModelSpec& spec, double dt,
                                int iterations, int n_paths, std::uint64_t seed, double eps_cut)
{
    if (f_frozen.size() < 2) throw InvalidArgument("picard: need at least two frozen snapshots");
    if (iterations < 1 || n_paths < 1) throw InvalidArgument("picard: iterations and n_paths must be >= 1");
    if (!(dt > 0)) throw InvalidArgument("picard: dt must be positive");
    const ModelSpec s = regularized(spec, eps_cut);
    const int n = s.n;
    const std::size_t S = f_frozen.size() - 1;
    const std::size_t N0 = f_frozen[0].size();
    const NoiseField nf(seed);

    // paths[s][p*n + q]
    std::vector<std::vector<double>> prev(S + 1, std::vector<double>(static_cast<std::size_t>(n_paths) * n));
    for (int p = 0; p < n_paths; ++p) {
        auto x0 = f_frozen[0].point(static_cast<std::size_t>(p) % N0);
        for (std::size_t t = 0; t <= S; ++t) std::copy(x0.begin(), x0.end(), prev[t].begin() + p * n);
    }
    PicardResult res;
    Workspace ws;
    ws.resize(s);
    NoiseRow nr;
    std::vector<double> out(n);
    int rising = 0;
    for (int it = 0; it < iterations; ++it) {
        std::vector<std::vector<double>> next = prev;
        double sup = 0;
        for (std::size_t t = 0; t < S; ++t) {
            const ParticleCloud& cloud = f_frozen[t];
            if (cloud.n != n) throw InvalidArgument("picard: frozen cloud dimension mismatch");
            nr.resize(s, cloud.size());
            const std::vector<std::uint64_t> lab = default_labels(cloud.size());
            for (int p = 0; p < n_paths; ++p) {
                fill_noise(nf, kStreamPicardB, kStreamPicardW, t, static_cast<std::uint64_t>(p), lab, s, nr);
                const double* x = prev[t].data() + p * n;
                increment(x, -1, cloud, s, dt, nr, ws, out.data());
                for (int q = 0; q < n; ++q) next[t + 1][p * n + q] = next[t][p * n + q] + (out[q] - x[q]);
            }
        }
        for (std::size_t t = 0; t <= S; ++t) {
            double acc = 0;
            for (std::size_t q = 0; q < next[t].size(); ++q) {
                const double d = next[t][q] - prev[t][q];
                acc += d * d;
            }
            sup = std::max(sup, acc / n_paths);
        }
        if (!res.rho.empty() && sup > res.rho.back())
            ++rising;
        else
            rising = 0;
        res.rho.push_back(sup);
        prev.swap(next);
        if (rising >= 3 || !std::isfinite(sup)) {
            res.diverged = true;
            break;
        }
    }
    return res;
}

std::vector<TestFunction> standard_test_functions(double R)
{
    std::vector<TestFunction> fns;
    fns.push_back({"cos_x0", [](ConstVec x) { return std::cos(x[0]); },
                   [](ConstVec x, double* g) {
                       std::fill(g, g + x.size(), 0.0);
                       g[0] = -std::sin(x[0]);
                   },
                   [](ConstVec x, double* h) {
                       std::fill(h, h + x.size() * x.size(), 0.0);
                       h[0] = -std::cos(x[0]);
                   }});
    auto radial = [](std::string name, std::function<double(double)> g0, std::function<double(double)> g1,
                     std::function<double(double)> g2) {
        TestFunction t;
        t.name = std::move(name);
        t.value = [g0](ConstVec x) {
            double s = 0;
            for (double v : x) s += v * v;
            return g0(s);
        };
        t.grad = [g1](ConstVec x, double* g) {
            double s = 0;
            for (double v : x) s += v * v;
            const double a = 2.0 * g1(s);
            for (std::size_t q = 0; q < x.size(); ++q) g[q] = a * x[q];
        };
        t.hess = [g1, g2](ConstVec x, double* h) {
            double s = 0;
            for (double v : x) s += v * v;
            const double a = 2.0 * g1(s), c = 4.0 * g2(s);
            const std::size_t n = x.size();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t q = 0; q < n; ++q) h[r * n + q] = c * x[r] * x[q] + (r == q ? a : 0.0);
        };
        return t;
    };
    fns.push_back(radial(
        "gauss", [](double s) { return std::exp(-0.5 * s); }, [](double s) { return -0.5 * std::exp(-0.5 * s); },
        [](double s) { return 0.25 * std::exp(-0.5 * s); }));
    const double R2 = R * R;
    fns.push_back(radial(
        "clipped_sq", [R2](double s) { return s / (1.0 + s / R2); },
        [R2](double s) { return 1.0 / ((1.0 + s / R2) * (1.0 + s / R2)); },
        [R2](double s) { return -2.0 / (R2 * std::pow(1.0 + s / R2, 3)); }));
    return fns;
}

TestFunction constant_test_function(double c)
{
    return {"constant", [c](ConstVec) { return c; },
            [](ConstVec x, double* g) { std::fill(g, g + x.size(), 0.0); },
            [](ConstVec x, double* h) { std::fill(h, h + x.size() * x.size(), 0.0); }};
}

std::vector<double> weak_form_residual(const std::vector<ParticleCloud>& traj, const ModelSpec& spec, double dt,
                                       const std::vector<TestFunction>& fns)
{
    if (traj.size() < 2) throw InvalidArgument("weak_form_residual: need at least two snapshots");
    if (!(dt > 0)) throw InvalidArgument("weak_form_residual: dt must be positive");
    const int n = spec.n;
    const std::size_t N = traj[0].size();
    for (const auto& c : traj)
        if (c.size() != N || c.n != n) throw InvalidArgument("weak_form_residual: inconsistent trajectory");
    const int m = spec.noise_dim;
    const std::size_t F = fns.size();
    std::vector<double> gen(F, 0.0);
    std::vector<double> drift(n), A(static_cast<std::size_t>(n) * n), mm(static_cast<std::size_t>(n) * n), z(n), b(n),
        sig(static_cast<std::size_t>(n) * std::max(1, m)), grad(n), hess(static_cast<std::size_t>(n) * n);
    const double invN = 1.0 / static_cast<double>(N);
    for (std::size_t s = 0; s + 1 < traj.size(); ++s) {
        const ParticleCloud& P = traj[s];
        for (std::size_t i = 0; i < N; ++i) {
            const ConstVec x = P.point(i);
            std::fill(drift.begin(), drift.end(), 0.0);
            std::fill(A.begin(), A.end(), 0.0);
            if (spec.c) spec.c(x, drift.data());
            if (spec.m) {
                spec.m(x, mm.data());
                for (int r = 0; r < n; ++r)
                    for (int q = 0; q < n; ++q) {
                        double acc = 0;
                        for (int c = 0; c < n; ++c) acc += mm[r * n + c] * mm[q * n + c];
                        A[r * n + q] += acc;
                    }
            }
            if (spec.interaction && (spec.has_b || spec.has_sigma)) {
                const bool ws = spec.has_sigma && m > 0;
                for (std::size_t k = 0; k < N; ++k) {
                    const auto xk = P.point(k);
                    for (int q = 0; q < n; ++q) z[q] = x[q] - xk[q];
                    const bool self = k == i;
                    spec.interaction(ConstVec(z.data(), n), spec.has_b && !self ? b.data() : nullptr,
                                     ws ? sig.data() : nullptr);
                    if (spec.has_b && !self)
                        for (int q = 0; q < n; ++q) drift[q] += invN * b[q];
                    if (ws)
                        for (int r = 0; r < n; ++r)
                            for (int q = 0; q < n; ++q) {
                                double acc = 0;
                                for (int c = 0; c < m; ++c) acc += sig[r * m + c] * sig[q * m + c];
                                A[r * n + q] += invN * acc;
                            }
                }
            }
            for (std::size_t f = 0; f < F; ++f) {
                fns[f].grad(x, grad.data());
                fns[f].hess(x, hess.data());
                double l = 0;
                for (int q = 0; q < n; ++q) l += drift[q] * grad[q];
                for (int q = 0; q < n * n; ++q) l += A[q] * hess[q];
                gen[f] += dt * invN * l;
            }
        }
    }
    std::vector<double> res(F);
    for (std::size_t f = 0; f < F; ++f) {
        double a = 0, b0 = 0;
        for (std::size_t i = 0; i < N; ++i) {
            a += fns[f].value(traj.back().point(i));
            b0 += fns[f].value(traj.front().point(i));
        }
        res[f] = std::abs(a * invN - b0 * invN - gen[f]);
    }
    return res;
}

}  // namespace nlfp
