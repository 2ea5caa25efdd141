#include "nlfp/osgood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nlfp {

double psi(double x)
{
    if (!(x >= 0)) throw InvalidArgument("psi: x must be >= 0");
    if (x < kInvE) return x == 0.0 ? 0.0 : -x * std::log(x);
    return x;
}

int h_branch(double x, double y)
{
    if (!(x >= 0) || !(y >= 0)) throw InvalidArgument("h_bound: arguments must be >= 0");
    if (x <= kInvE) {
        if (x <= std::exp(-std::exp(y))) return 1;
        return 2;
    }
    if (x >= std::exp(y - 1.0)) return 3;
    return 4;
}

double h_bound(double x, double y)
{
    switch (h_branch(x, y)) {
    case 1: return x == 0.0 ? 0.0 : std::pow(x, std::exp(-y));
    case 2: return std::exp(y - 1.0) / (-std::log(x));
    case 3: return x * std::exp(y);
    default: return std::exp(-(1.0 / x) * std::exp(-y - 1.0));
    }
}

double h_bound_inverse(double x, double target)
{
    if (!(x > 0) || !(target >= 0)) throw InvalidArgument("h_bound_inverse: need x > 0, target >= 0");
    if (target <= x) return 0.0;
    if (x >= kInvE) return std::log(target / x);
    // below 1/e the bound follows x^{e^{-y}} until it reaches 1/e, then grows like e^{y-1}/(-ln x)
    if (target <= kInvE) return std::log(std::log(x) / std::log(target));
    return 1.0 + std::log(target * -std::log(x));
}

double modulus_omega(double x, double C, const OmegaInputs& in)
{
    if (!(C >= 0)) throw InvalidArgument("modulus_omega: C must be >= 0");
    const double y = C * std::max({in.norm_l1t, in.m2_f, in.m2_g, in.T});
    return h_bound(x, y);
}

double Sampled::operator()(double s) const
{
    if (v.empty()) throw InvalidArgument("Sampled: no samples");
    if (v.size() == 1 || s <= t.front()) return v.front();
    if (s >= t.back()) return v.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double w = (s - t[k - 1]) / (t[k] - t[k - 1]);
    return (1.0 - w) * v[k - 1] + w * v[k];
}

double Sampled::integral(double s) const
{
    if (v.empty()) throw InvalidArgument("Sampled: no samples");
    if (v.size() == 1) return v.front() * s;
    double acc = 0;
    double prev_t = 0;
    double prev_v = (*this)(0.0);
    auto add_to = [&](double tt) {
        const double vv = (*this)(tt);
        acc += 0.5 * (prev_v + vv) * (tt - prev_t);
        prev_t = tt;
        prev_v = vv;
    };
    for (double tk : t) {
        if (tk <= 0) continue;
        if (tk >= s) break;
        add_to(tk);
    }
    add_to(s);
    return acc;
}

double OsgoodResult::at(double s) const
{
    if (t.empty()) throw InvalidArgument("OsgoodResult: empty");
    if (s <= t.front()) return rho.front();
    if (s >= t.back()) return rho.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double w = (s - t[k - 1]) / (t[k] - t[k - 1]);
    return (1.0 - w) * rho[k - 1] + w * rho[k];
}

OsgoodResult osgood_solve(double x0, const Sampled& m, double C, double T, int steps)
{
    if (!(x0 >= 0)) throw InvalidArgument("osgood_solve: x0 must be >= 0");
    if (!(C >= 0) || !(T >= 0)) throw InvalidArgument("osgood_solve: C and T must be >= 0");
    if (steps < 1) throw InvalidArgument("osgood_solve: steps must be >= 1");
    for (double v : m.v)
        if (!(v >= 0)) throw InvalidArgument("osgood_solve: m must be non-negative");
    OsgoodResult res;
    res.t.reserve(steps + 1);
    res.rho.reserve(steps + 1);
    const double h = T / steps;
    double rho = x0;
    res.t.push_back(0.0);
    res.rho.push_back(rho);
    auto f = [&](double s, double r) { return C * m(s) * psi(std::max(r, 0.0)); };
    for (int k = 0; k < steps; ++k) {
        const double s = k * h;
        const double k1 = f(s, rho);
        const double k2 = f(s + 0.5 * h, rho + 0.5 * h * k1);
        const double k3 = f(s + 0.5 * h, rho + 0.5 * h * k2);
        const double k4 = f(s + h, rho + h * k3);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        res.t.push_back((k + 1) * h);
        if (!std::isfinite(rho) || rho > std::numeric_limits<double>::max() / 16) {
            res.blew_up = true;
            res.blowup_time = (k + 1) * h;
            rho = std::numeric_limits<double>::infinity();
            res.rho.push_back(rho);
            break;
        }
        res.rho.push_back(rho);
    }
    return res;
}

}  // namespace nlfp
