#pragma once

#include <string>

#include "hfn/qp.hpp"

namespace hfn {

// Independent checks applied to a candidate solution. The state trajectories
// are replayed through the Petri net stepper from the solution's own initial
// markings, so agreement here means the flat solution vector and the network
// dynamics tell the same story. Every figure is relative to the data scale
// (1 + the inf-norm of the relevant side), so one tolerance fits any units.
struct VerificationReport {
    double equality_residual = 0.0;      // inf-norm of Ax - b
    double inequality_violation = 0.0;   // max positive part of Dx - e
    double nonnegativity_violation = 0.0;
    double duration_mismatch = 0.0;      // completions vs starts shifted by duration
    double sync_mismatch = 0.0;          // service firings vs scaled network firings
    double replay_state_error = 0.0;     // replayed buffer/transition states vs x
    double replay_service_error = 0.0;   // replayed service states vs x

    bool ok(double tol) const;
    std::string to_text() const;
};

VerificationReport verify(const Vec& x, const CompiledProblem& problem);

} // namespace hfn
