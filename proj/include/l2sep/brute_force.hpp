#pragma once

#include <vector>

#include "l2sep/instance.hpp"

namespace l2sep {

struct BruteForceOptions {
    int var_limit = 16;
    long node_limit = 50'000'000;  // enumeration nodes before refusing
    double tol = 1e-6;
};

/// Exact optimum by depth-first enumeration of the integer variables.
/// Partial assignments are pruned only by row activity ranges and a box bound on the
/// objective (no LP relaxation is used). Continuous variables, if any, are handled by
/// solving the residual LP at every integer leaf.
/// Throws RefusalError if there are more than var_limit integer variables, an integer
/// variable has an infinite bound, or the node budget is exhausted.
Assignment brute_force_opt(const MilpInstance& inst, const BruteForceOptions& opts = {});
Assignment brute_force_opt(const MilpInstance& inst, int var_limit);

/// max  w'x  over the integer-feasible points of inst. Returns -inf when infeasible.
double brute_force_max(const MilpInstance& inst, const std::vector<double>& w, const BruteForceOptions& opts = {});

}  // namespace l2sep
