#pragma once

#include <string>

#include "hfn/qp.hpp"

namespace hfn {

enum class SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
};

const char* to_string(SolveStatus s);

struct SolverSettings {
    double tol = 1e-8;         // convergence tolerance on scaled residuals
    int max_iter = 120;
    bool polish = true;        // active-set cleanup after convergence
    // Static regularization of the KKT system. Equality rows that are exact
    // linear combinations of others (pinned states already implied by the
    // dynamics) would otherwise surface as zero pivots; each solve is
    // followed by iterative refinement to cancel the perturbation again.
    double regularization = 1e-7;
    bool verbose = false;      // per-iteration trace on stderr
};

struct Solution {
    Vec x;
    double objective = 0.0;    // evaluated on the original, unscaled data
    SolveStatus status = SolveStatus::MaxIterations;
    int iterations = 0;
    double primal_residual = 0.0;  // inf-norm of Ax - b on original data
    double dual_residual = 0.0;    // scaled-space dual residual at exit
    double gap = 0.0;              // complementarity measure at exit
    bool polished = false;
    std::string note;
};

// Primal-dual interior-point method with a predictor-corrector step,
// Ruiz equilibration, and an optional equality-constrained polish.
// Deterministic: no randomness, no threads, fixed iteration order.
Solution solve(const QPProblem& qp, const SolverSettings& settings = {});

} // namespace hfn
