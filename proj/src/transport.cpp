#include "nlfp/transport.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace nlfp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void AssignmentSolver::reset()
{
    u_.clear();
    v_.clear();
    col4row_.clear();
    row4col_.clear();
}

void AssignmentSolver::permute_columns(const std::vector<int>& perm)
{
    const std::size_t N = perm.size();
    if (v_.size() != N || col4row_ != perm) {
        reset();
        return;
    }
    std::vector<double> v(N);
    for (std::size_t j = 0; j < N; ++j) v[j] = v_[perm[j]];
    v_.swap(v);
    for (std::size_t i = 0; i < N; ++i) {
        col4row_[i] = static_cast<int>(i);
        row4col_[i] = static_cast<int>(i);
    }
}

void AssignmentSolver::augment(const std::vector<double>& cost, int N, int cur)
{
    std::fill(spc_.begin(), spc_.end(), kInf);
    std::fill(sr_.begin(), sr_.end(), 0);
    std::fill(sc_.begin(), sc_.end(), 0);
    // unscanned columns live in remaining[0..left)
    remaining_.resize(N);
    std::iota(remaining_.begin(), remaining_.end(), 0);
    int left = N;
    double min_val = 0;
    int i = cur;
    int sink = -1;
    while (sink < 0) {
        sr_[i] = 1;
        const double* crow = cost.data() + static_cast<std::size_t>(i) * N;
        const double base = min_val - u_[i];
        double lowest = kInf;
        int qmin = -1;
        for (int q = 0; q < left; ++q) {
            const int j = remaining_[q];
            const double r = base + crow[j] - v_[j];
            if (r < spc_[j]) {
                path_[j] = i;
                spc_[j] = r;
            }
            // ties: a free column first (it ends the search), then the lowest index
            if (spc_[j] < lowest ||
                (spc_[j] == lowest && qmin >= 0 &&
                 std::pair(row4col_[j] >= 0, j) < std::pair(row4col_[remaining_[qmin]] >= 0, remaining_[qmin]))) {
                lowest = spc_[j];
                qmin = q;
            }
        }
        if (qmin < 0 || !std::isfinite(lowest)) throw NumericalError("assignment: infeasible or non-finite costs");
        min_val = lowest;
        const int jmin = remaining_[qmin];
        sc_[jmin] = 1;
        remaining_[qmin] = remaining_[--left];
        if (row4col_[jmin] < 0)
            sink = jmin;
        else
            i = row4col_[jmin];
    }
    u_[cur] += min_val;
    for (int r = 0; r < N; ++r)
        if (sr_[r] && r != cur) u_[r] += min_val - spc_[col4row_[r]];
    for (int j = 0; j < N; ++j)
        if (sc_[j]) v_[j] -= min_val - spc_[j];
    int j = sink;
    while (true) {
        const int r = path_[j];
        row4col_[j] = r;
        std::swap(col4row_[r], j);
        if (r == cur) break;
    }
    ++augmentations_;
}

// Augmenting row reduction (Jonker-Volgenant): cheap auction-like passes
// that assign most free rows before the shortest-path phase. Leaves u, v
// dual feasible with every assigned edge tight.
void AssignmentSolver::row_reduction(const std::vector<double>& cost, int N)
{
    std::vector<int> free;
    for (int i = 0; i < N; ++i)
        if (col4row_[i] < 0) free.push_back(i);
    for (int pass = 1; pass <= 2 && !free.empty(); ++pass) {
        std::vector<int> next;
        const long budget = static_cast<long>(pass) * N;
        long used = 0;
        std::size_t k = 0;
        while (k < free.size()) {
            const int i = free[k++];
            ++used;
            const double* crow = cost.data() + static_cast<std::size_t>(i) * N;
            double u1 = kInf, u2 = kInf;
            int j1 = -1, j2 = -1;
            for (int j = 0; j < N; ++j) {
                const double h = crow[j] - v_[j];
                if (h < u2) {
                    if (h < u1) {
                        u2 = u1;
                        j2 = j1;
                        u1 = h;
                        j1 = j;
                    } else {
                        u2 = h;
                        j2 = j;
                    }
                }
            }
            if (j2 < 0) u2 = u1;
            int i0 = row4col_[j1];
            if (used < budget) {
                if (u1 < u2)
                    v_[j1] -= u2 - u1;
                else if (i0 >= 0) {
                    j1 = j2;
                    i0 = row4col_[j2];
                }
                if (i0 >= 0) {
                    if (u1 < u2)
                        free[--k] = i0;
                    else
                        next.push_back(i0);
                }
            } else if (i0 >= 0) {
                next.push_back(i0);
            }
            if (i0 >= 0) col4row_[i0] = -1;
            row4col_[j1] = i;
            col4row_[i] = j1;
        }
        free.swap(next);
    }
    for (int i = 0; i < N; ++i) {
        const double* crow = cost.data() + static_cast<std::size_t>(i) * N;
        if (col4row_[i] >= 0) {
            u_[i] = crow[col4row_[i]] - v_[col4row_[i]];
        } else {
            double mn = kInf;
            for (int j = 0; j < N; ++j) mn = std::min(mn, crow[j] - v_[j]);
            u_[i] = mn;
        }
    }
}

const std::vector<int>& AssignmentSolver::solve(const std::vector<double>& cost, int N, bool warm)
{
    if (N < 0 || cost.size() != static_cast<std::size_t>(N) * N) throw InvalidArgument("assignment: cost must be N x N");
    for (double c : cost)
        if (!std::isfinite(c)) throw NumericalError("assignment: non-finite cost");
    augmentations_ = 0;
    spc_.assign(N, kInf);
    path_.assign(N, -1);
    sr_.assign(N, 0);
    sc_.assign(N, 0);

    const bool have_warm = warm && static_cast<int>(v_.size()) == N && static_cast<int>(col4row_.size()) == N;
    std::vector<int> prev = have_warm ? col4row_ : std::vector<int>{};
    if (!have_warm) {
        // column reduction
        v_.assign(N, 0.0);
        for (int j = 0; j < N; ++j) {
            double mn = kInf;
            for (int i = 0; i < N; ++i) mn = std::min(mn, cost[static_cast<std::size_t>(i) * N + j]);
            v_[j] = mn;
        }
    }
    u_.assign(N, 0.0);
    col4row_.assign(N, -1);
    row4col_.assign(N, -1);
    for (int i = 0; i < N; ++i) {
        const double* crow = cost.data() + static_cast<std::size_t>(i) * N;
        double mn = kInf;
        int jmin = -1;
        for (int j = 0; j < N; ++j) {
            const double r = crow[j] - v_[j];
            if (r < mn) {
                mn = r;
                jmin = j;
            }
        }
        u_[i] = mn;
        // keep the previous partner if its edge is still tight, else the first tight free column
        int pick = -1;
        if (have_warm) {
            const int jp = prev[i];
            if (jp >= 0 && row4col_[jp] < 0 && crow[jp] - v_[jp] == mn) pick = jp;
        } else if (row4col_[jmin] < 0) {
            pick = jmin;
        }
        if (pick >= 0) {
            col4row_[i] = pick;
            row4col_[pick] = i;
        }
    }
    if (!have_warm) row_reduction(cost, N);
    for (int i = 0; i < N; ++i)
        if (col4row_[i] < 0) augment(cost, N, i);
    return col4row_;
}

std::vector<double> squared_distance_matrix(const ParticleCloud& f, const ParticleCloud& g)
{
    const std::size_t N = f.size(), M = g.size();
    const int n = f.n;
    std::vector<double> c(N * M);
    for (std::size_t i = 0; i < N; ++i) {
        const double* x = f.data.data() + i * n;
        for (std::size_t j = 0; j < M; ++j) {
            const double* y = g.data.data() + j * n;
            double s = 0;
            for (int q = 0; q < n; ++q) {
                const double d = x[q] - y[q];
                s += d * d;
            }
            c[i * M + j] = s;
        }
    }
    return c;
}

double plan_cost(const ParticleCloud& f, const ParticleCloud& g, const std::vector<int>& pairing)
{
    const std::size_t N = f.size();
    double s = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const double* x = f.data.data() + i * f.n;
        const double* y = g.data.data() + static_cast<std::size_t>(pairing[i]) * g.n;
        for (int q = 0; q < f.n; ++q) {
            const double d = x[q] - y[q];
            s += d * d;
        }
    }
    return s / static_cast<double>(N);
}

namespace {
void check_pair(const ParticleCloud& f, const ParticleCloud& g)
{
    if (f.n != g.n) throw InvalidArgument("w2: dimension mismatch");
    if (f.size() != g.size()) throw InvalidArgument("w2: unequal particle counts");
    if (f.size() == 0) throw InvalidArgument("w2: empty clouds");
    for (double v : f.data)
        if (!std::isfinite(v)) throw NumericalError("w2: non-finite coordinate");
    for (double v : g.data)
        if (!std::isfinite(v)) throw NumericalError("w2: non-finite coordinate");
}
}  // namespace

TransportPlan w2_exact(const ParticleCloud& f, const ParticleCloud& g, AssignmentSolver& solver)
{
    check_pair(f, g);
    const int N = static_cast<int>(f.size());
    const std::vector<double> c = squared_distance_matrix(f, g);
    TransportPlan plan;
    plan.pairing = solver.solve(c, N);
    plan.cost = plan_cost(f, g, plan.pairing);
    plan.time = f.time;
    return plan;
}

TransportPlan w2_exact(const ParticleCloud& f, const ParticleCloud& g)
{
    if (f.n == 1 && g.n == 1) {
        // on the line the monotone rearrangement is optimal for the quadratic cost
        check_pair(f, g);
        const std::size_t N = f.size();
        std::vector<int> of(N), og(N);
        std::iota(of.begin(), of.end(), 0);
        std::iota(og.begin(), og.end(), 0);
        std::stable_sort(of.begin(), of.end(), [&](int a, int b) { return f.data[a] < f.data[b]; });
        std::stable_sort(og.begin(), og.end(), [&](int a, int b) { return g.data[a] < g.data[b]; });
        TransportPlan plan;
        plan.pairing.assign(N, -1);
        for (std::size_t q = 0; q < N; ++q) plan.pairing[of[q]] = og[q];
        plan.cost = plan_cost(f, g, plan.pairing);
        plan.time = f.time;
        return plan;
    }
    AssignmentSolver s;
    return w2_exact(f, g, s);
}

EntropicResult w2_entropic(const ParticleCloud& f, const ParticleCloud& g, double reg, int max_iters, double tol)
{
    check_pair(f, g);
    if (!(reg > 0)) throw InvalidArgument("w2_entropic: reg must be positive");
    const int N = static_cast<int>(f.size());
    const std::vector<double> c = squared_distance_matrix(f, g);
    const double loga = -std::log(static_cast<double>(N));
    std::vector<double> a(N, 0.0), b(N, 0.0), tmp(N);
    auto lse = [&](int count, auto&& term) {
        double mx = -kInf;
        for (int q = 0; q < count; ++q) mx = std::max(mx, term(q));
        double s = 0;
        for (int q = 0; q < count; ++q) s += std::exp(term(q) - mx);
        return mx + std::log(s);
    };
    auto sweep = [&](double r) {
        for (int i = 0; i < N; ++i)
            a[i] = r * (loga - lse(N, [&](int j) { return (b[j] - c[i * N + j]) / r; }));
        for (int j = 0; j < N; ++j)
            b[j] = r * (loga - lse(N, [&](int i) { return (a[i] - c[i * N + j]) / r; }));
    };
    // eps-scaling: warm the potentials on a decreasing sequence of regularizations
    const double cmax = *std::max_element(c.begin(), c.end());
    for (double r = cmax; r > 2.0 * reg; r *= 0.5)
        for (int it = 0; it < 20; ++it) sweep(r);
    EntropicResult res;
    double err = kInf;
    for (int it = 1; it <= max_iters; ++it) {
        sweep(reg);
        if (it % 10 == 0 || it == max_iters) {
            // columns are exact after the b update; measure the row marginals
            err = 0;
            for (int i = 0; i < N; ++i) {
                double s = 0;
                for (int j = 0; j < N; ++j) s += std::exp((a[i] + b[j] - c[i * N + j]) / reg);
                err += std::abs(s - 1.0 / N);
            }
            res.iterations = it;
            if (err <= tol) {
                res.converged = true;
                break;
            }
        }
    }
    res.marginal_error = err;
    if (!res.converged)
        throw NumericalError("w2_entropic: no convergence, marginal error " + format_double(err));
    double cost = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) cost += std::exp((a[i] + b[j] - c[i * N + j]) / reg) * c[i * N + j];
    res.cost = cost;
    return res;
}

void validate_plan(const TransportPlan& plan, std::size_t N)
{
    if (plan.pairing.size() != N) throw InvalidArgument("plan: wrong length");
    std::vector<char> seen(N, 0);
    for (int j : plan.pairing) {
        if (j < 0 || static_cast<std::size_t>(j) >= N) throw InvalidArgument("plan: index out of range");
        if (seen[j]) throw InvalidArgument("plan: not a bijection (duplicate " + std::to_string(j) + ")");
        seen[j] = 1;
    }
    if (!std::isfinite(plan.cost) || plan.cost < 0) throw InvalidArgument("plan: invalid cost");
}

bool validate_plan(const TransportPlan& plan, const ParticleCloud& f, const ParticleCloud& g)
{
    if (f.size() != g.size() || f.n != g.n) return false;
    try {
        validate_plan(plan, f.size());
    } catch (const InvalidArgument&) {
        return false;
    }
    const double c = plan_cost(f, g, plan.pairing);
    return std::abs(c - plan.cost) <= 1e-12 * std::max(1.0, c);
}

void write_plan_csv(std::ostream& os, const TransportPlan& plan)
{
    os << "# cost=" << format_double(plan.cost) << '\n';
    os << "i,pi_i\n";
    for (std::size_t i = 0; i < plan.pairing.size(); ++i) os << i << ',' << plan.pairing[i] << '\n';
}

TransportPlan read_plan_csv(std::istream& is)
{
    TransportPlan plan;
    std::string line;
    bool have_cost = false, have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# cost=", 0) == 0) {
            plan.cost = parse_double(line.substr(7));
            have_cost = true;
            continue;
        }
        if (line == "i,pi_i") {
            have_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InvalidArgument("plan csv: bad row '" + line + "'");
        const int i = std::stoi(line.substr(0, comma));
        if (i != static_cast<int>(plan.pairing.size())) throw InvalidArgument("plan csv: rows out of order");
        plan.pairing.push_back(std::stoi(line.substr(comma + 1)));
    }
    if (!have_cost || !have_header) throw InvalidArgument("plan csv: missing cost line or header");
    validate_plan(plan, plan.pairing.size());
    return plan;
}

}  // namespace nlfp
