#include "nlfp/common.hpp"

#include <boost/random/normal_distribution.hpp>

#include <charconv>
#include <cmath>
#include <numbers>
#include <system_error>

namespace nlfp {

std::string format_double(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s)
{
    double v = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    if (b < e && *b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

double norm2(std::span<const double> x)
{
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit_line: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0)) throw NumericalError("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - f.intercept - f.slope * x[i];
        rss += r * r;
    }
    f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
    f.slope_stderr = x.size() > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
    return f;
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t NoiseField::key(std::uint64_t stream, std::uint64_t step, std::uint64_t label) const
{
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ step);
    return splitmix64(h ^ label);
}

namespace {

// splitmix64 output sequence as a uniform random bit generator
struct SplitMixEngine {
    using result_type = std::uint64_t;
    std::uint64_t state;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()()
    {
        state += 0x9e3779b97f4a7c15ULL;
        return splitmix64(state);
    }
};

}  // namespace

void NoiseField::normals(std::uint64_t key, std::uint64_t sub, double* out, int count) const
{
    // Ziggurat sampler fed by a stream that is a pure function of (key, sub).
    SplitMixEngine eng{splitmix64(key + sub * 0xd1b54a32d192ed03ULL)};
    boost::random::normal_distribution<double> nd;
    for (int c = 0; c < count; ++c) out[c] = nd(eng);
}

}  // namespace nlfp
