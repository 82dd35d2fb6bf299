// Positive/negative hetero-functional incidence tensors, their matricized
// forms, and device-model refinement.
#ifndef HFN_INCIDENCE_HPP
#define HFN_INCIDENCE_HPP

#include "hfn/core.hpp"

#include <string>
#include <vector>

namespace hfn {

// Sparse third-order tensor over (operand i, buffer y, capability psi).
struct IncidenceTensor3 {
    int operands = 0;
    int buffers = 0;
    int capabilities = 0;
    struct Entry {
        int operand;
        int buffer;
        int capability;
        double weight;
    };
    std::vector<Entry> entries; // sorted by (capability, operand, buffer)

    int nnz() const { return static_cast<int>(entries.size()); }
    double at(int i, int y, int psi) const;
};

struct IncidencePair {
    IncidenceTensor3 plus;  // injections
    IncidenceTensor3 minus; // pulls
};

// Operand-major matricization: row index vec(i, y) = i * buffers + y.
SpMat matricize(const IncidenceTensor3& t);

// Builds the binary tensors from the capability flow declarations. A storage
// capability (same operand pulled and injected at one buffer) produces a
// matching entry in both tensors; imports only in plus; exports/consumes only
// in minus. Throws std::invalid_argument on out-of-range indices.
IncidencePair build_incidence_tensors(const std::vector<Capability>& capabilities,
                                      int operand_count, int buffer_count);

// Entrywise device-model scaling: out(i,y,psi) = d(i, pmap(psi)) * in(i,y,psi).
// The positive tensor is scaled by the output ratios, the negative tensor by
// the input ratios. A structural nonzero whose ratio is undeclared is an
// error; silent zeroing would hide modelling bugs.
IncidencePair refine_with_device_models(const IncidencePair& binary,
                                        const SpMat& device_plus,
                                        const SpMat& device_minus,
                                        const ProcessCapabilityMap& pmap);

// Number of coordinates where plus(i,y,psi) - minus(i,y,psi) is nonzero;
// storage self-loops cancel under this count.
int signed_nonzero_count(const IncidencePair& pair);

// Debug export: one "i y psi weight" line per entry.
std::string to_coordinate_text(const IncidenceTensor3& t);

} // namespace hfn

#endif
