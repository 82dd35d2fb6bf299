// Per-operand service nets: feasibility and synchronization matrices and the
// block concatenation consumed by the program compiler.
#ifndef HFN_SERVICE_HPP
#define HFN_SERVICE_HPP

#include "hfn/core.hpp"
#include "hfn/petri.hpp"

#include <string>
#include <vector>

namespace hfn {

// Compiled service net for one operand.
struct ServiceNet {
    int operand = -1;
    std::vector<std::string> place_ids;
    std::vector<std::string> transition_ids;
    SpMat m_plus;  // places x transitions, binary
    SpMat m_minus; // places x transitions, binary
    Vec initial_marking;

    int places() const { return static_cast<int>(m_plus.rows()); }
    int transitions() const { return static_cast<int>(m_plus.cols()); }
};

// Binary feasibility: which engineering capability realizes which service
// activity, split by sign.
struct ServiceFeasibilityMatrix {
    SpMat plus;  // service transitions x capabilities
    SpMat minus;
};

// Device-model-scaled synchronization matrices (same shape as feasibility).
struct SynchronizationMatrix {
    SpMat plus;
    SpMat minus;
};

// Vertical/block concatenation across operands, in operand order.
struct ServiceBlock {
    SpMat m_plus;    // block-diagonal, total places x total transitions
    SpMat m_minus;
    SpMat lambda_plus;  // total transitions x capability count
    SpMat lambda_minus;
    Vec initial_marking; // stacked place markings
    std::vector<int> place_offset;      // per operand
    std::vector<int> transition_offset; // per operand
    // ids stacked in operand order; use the offsets to find an operand's rows
    std::vector<std::string> place_ids;
    std::vector<std::string> transition_ids;

    int places() const { return static_cast<int>(m_plus.rows()); }
    int transitions() const { return static_cast<int>(m_plus.cols()); }
};

// Builds the compiled net + feasibility matrices from a declaration.
// capability_count fixes the feasibility column dimension.
ServiceNet build_service_net(const ServiceNetDecl& decl, int capability_count);
ServiceFeasibilityMatrix build_feasibility(const ServiceNetDecl& decl,
                                           int capability_count);

// Entrywise scaling by the operand's device ratio of each capability's
// process. A feasible pair whose ratio is undeclared is rejected.
SynchronizationMatrix build_sync_matrices(const ServiceFeasibilityMatrix& feas,
                                          int operand,
                                          const SpMat& device_plus,
                                          const SpMat& device_minus,
                                          const ProcessCapabilityMap& pmap);

ServiceBlock concat_services(const std::vector<ServiceNet>& nets,
                             const std::vector<SynchronizationMatrix>& syncs);

// Synchronization residuals U_L+- - Lambda+- U+- for one step.
Vec sync_residual_plus(const ServiceBlock& block, const Vec& u_l_plus, const Vec& u_plus);
Vec sync_residual_minus(const ServiceBlock& block, const Vec& u_l_minus, const Vec& u_minus);

} // namespace hfn

#endif
