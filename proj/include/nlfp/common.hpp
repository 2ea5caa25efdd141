#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlfp {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite values, divergence, solver non-convergence.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kInvE = 0.36787944117144233;  // exp(-1)

// Shortest decimal that parses back to the same double.
std::string format_double(double x);

double parse_double(const std::string& s);

double norm2(std::span<const double> x);

// Least-squares line fit y = a + s x.
struct LineFit {
    double slope = 0;
    double intercept = 0;
    double slope_stderr = 0;
    double r2 = 0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Counter-based Gaussian noise. Every draw is a pure function of
// (seed, stream, a, b, c), so results do not depend on loop order.
class NoiseField {
public:
    explicit NoiseField(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Key for a fixed (stream, step, particle) triple.
    std::uint64_t key(std::uint64_t stream, std::uint64_t step, std::uint64_t label) const;

    // Fills out[0..count) with standard normals indexed by (key, sub, 0..count).
    void normals(std::uint64_t key, std::uint64_t sub, double* out, int count) const;

private:
    std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace nlfp
