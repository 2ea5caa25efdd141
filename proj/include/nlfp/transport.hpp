#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nlfp/model_core.hpp"

namespace nlfp {

// pairing[i] = index of the g-particle coupled with f-particle i (0-based).
struct TransportPlan {
    std::vector<int> pairing;
    double cost = 0;  // (1/N) sum |x_i - y_{pairing[i]}|^2
    double time = 0;
};

// Dense square assignment by shortest augmenting paths with dual potentials.
// Keeps its duals between calls so a slowly changing cost matrix can be
// re-solved from the previous optimum.
class AssignmentSolver {
public:
    // cost is N x N row-major. Returns row -> column.
    const std::vector<int>& solve(const std::vector<double>& cost, int N, bool warm = true);

    void reset();
    // Column j of the next problem is column perm[j] of the last one; the
    // stored assignment must itself be perm (as after reindexing by the plan).
    void permute_columns(const std::vector<int>& perm);
    const std::vector<double>& row_duals() const { return u_; }
    const std::vector<double>& col_duals() const { return v_; }
    int augmentations() const { return augmentations_; }

private:
    void augment(const std::vector<double>& cost, int N, int row);
    void row_reduction(const std::vector<double>& cost, int N);

    std::vector<double> u_, v_;
    std::vector<int> col4row_, row4col_;
    std::vector<double> spc_;
    std::vector<int> path_, remaining_;
    std::vector<char> sr_, sc_;
    int augmentations_ = 0;
};

std::vector<double> squared_distance_matrix(const ParticleCloud& f, const ParticleCloud& g);
double plan_cost(const ParticleCloud& f, const ParticleCloud& g, const std::vector<int>& pairing);

TransportPlan w2_exact(const ParticleCloud& f, const ParticleCloud& g);
TransportPlan w2_exact(const ParticleCloud& f, const ParticleCloud& g, AssignmentSolver& solver);

struct EntropicResult {
    double cost = 0;  // <P, C> with P the scaled plan (total mass 1)
    double marginal_error = 0;
    int iterations = 0;
    bool converged = false;
};

// Log-domain Sinkhorn; diagnostic only. Throws NumericalError on non-convergence.
EntropicResult w2_entropic(const ParticleCloud& f, const ParticleCloud& g, double reg, int max_iters = 100000,
                           double tol = 1e-9);

// Throws InvalidArgument unless pairing is a bijection of 0..N-1 with a finite cost.
void validate_plan(const TransportPlan& plan, std::size_t N);
// Bijection and recomputed cost match (relative 1e-12).
bool validate_plan(const TransportPlan& plan, const ParticleCloud& f, const ParticleCloud& g);

void write_plan_csv(std::ostream& os, const TransportPlan& plan);
TransportPlan read_plan_csv(std::istream& is);

}  // namespace nlfp
