#pragma once

#include <vector>

#include "nlfp/common.hpp"

namespace nlfp {

// max(-x log x, x): -x log x below 1/e, identity above.
double psi(double x);

// Closed-form Osgood bound, four branches tried in order, first match wins.
double h_bound(double x, double y);
// 1..4
int h_branch(double x, double y);

// Smallest y >= 0 with h_bound(x, y) >= target, restricted to branches 1-3.
double h_bound_inverse(double x, double target);

struct OmegaInputs {
    double norm_l1t = 0;  // int_0^T max_i(||f^(i)||_p, ||g^(i)||_p) dt
    double m2_f = 0;
    double m2_g = 0;
    double T = 0;
};

double modulus_omega(double x, double C, const OmegaInputs& in);

// Piecewise-linear samples of m(t); a single sample means constant.
struct Sampled {
    std::vector<double> t;
    std::vector<double> v;

    static Sampled constant(double value) { return {{0.0}, {value}}; }
    double operator()(double s) const;
    // int_0^s m
    double integral(double s) const;
};

struct OsgoodResult {
    std::vector<double> t;
    std::vector<double> rho;
    bool blew_up = false;
    double blowup_time = 0;

    double final() const { return rho.back(); }
    // linear interpolation of the trajectory
    double at(double s) const;
};

// rho' = C m(t) psi(rho), rho(0) = x0, by classical RK4.
OsgoodResult osgood_solve(double x0, const Sampled& m, double C, double T, int steps = 10000);

}  // namespace nlfp
