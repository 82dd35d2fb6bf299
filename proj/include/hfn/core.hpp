// Structural vocabulary of a hetero-functional system model: operands,
// resources, processes, the system concept matrix, and the capability list.
#ifndef HFN_CORE_HPP
#define HFN_CORE_HPP

#include <Eigen/Sparse>
#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfn {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

enum class ResourceKind { Transformation, IndependentBuffer, Transportation };

enum class ProcessKind { Transformation, RefinedTransportation };

struct Operand {
    std::string id;
    std::string name;
    std::string unit;
};

struct Resource {
    std::string id;
    std::string name;
    ResourceKind kind = ResourceKind::Transformation;
    int node = -1; // optional location label, -1 when absent
};

// A transformation process row of the concept matrix. Refined transportation
// processes (move operand g from buffer o to buffer d, storage on the
// diagonal o == d) are not stored individually; they are addressed through
// ProcessSpace row arithmetic.
struct Process {
    std::string id;
    std::string name;
    ProcessKind kind = ProcessKind::Transformation;
};

// Row layout of the concept matrix: transformation processes first, then one
// row per (transport operand, origin buffer, destination buffer) triple.
struct ProcessSpace {
    int transformation_count = 0;
    int transport_operand_count = 0;
    int buffer_count = 0;

    int rows() const {
        return transformation_count +
               transport_operand_count * buffer_count * buffer_count;
    }
    int transformation_row(int p) const { return p; }
    int transport_row(int g, int origin, int dest) const {
        return transformation_count + g * buffer_count * buffer_count +
               origin * buffer_count + dest;
    }
    bool is_transport_row(int row) const { return row >= transformation_count; }
    // Inverse of transport_row; only valid when is_transport_row(row).
    void split_transport_row(int row, int& g, int& origin, int& dest) const {
        int r = row - transformation_count;
        g = r / (buffer_count * buffer_count);
        r %= buffer_count * buffer_count;
        origin = r / buffer_count;
        dest = r % buffer_count;
    }
};

// Binary system concept matrix: rows are processes, columns are resources.
struct SystemConcept {
    int rows = 0;
    int cols = 0;
    SpMat a_s; // rows x cols, entries in {0,1}
};

// One admissible (process, resource) pair together with its physical
// parameters. The flow lists give, per operand, which buffer the capability
// pulls from or injects into; ratios live in the device matrices.
struct CapabilityFlow {
    int operand = -1;
    int buffer = -1; // index into the buffer list B_S
};

struct Capability {
    std::string id;
    int process_row = -1; // row in the concept matrix
    int resource = -1;    // column in the concept matrix
    int duration = 0;     // time steps between start and completion
    double capacity = 0.0;
    double linear_cost = 0.0;
    double quadratic_cost = 0.0;
    std::vector<CapabilityFlow> pulls;
    std::vector<CapabilityFlow> pushes;
};

// Maps every capability to its concept-matrix process row; the projection
// used when folding device ratios into tensors and sync matrices.
struct ProcessCapabilityMap {
    std::vector<int> process_row_of; // size = capability count
    int operator()(int psi) const { return process_row_of.at(psi); }
};

// Service-net structure for one operand (authored as model data).
struct ServiceNetDecl {
    int operand = -1;
    std::vector<std::string> place_ids;
    std::vector<std::string> transition_ids;
    // arcs: place index per transition, -1 when the transition has no arc on
    // that side
    std::vector<std::vector<int>> pull_places; // per transition
    std::vector<std::vector<int>> push_places; // per transition
    // realized capabilities per transition, by capability index, per sign
    std::vector<std::vector<int>> realizes_minus;
    std::vector<std::vector<int>> realizes_plus;
    Vec initial_marking; // per place
};

// Fully lowered, cross-referenced system description. Immutable after
// construction; safe to share across threads.
struct SystemModel {
    std::vector<Operand> operands;
    std::vector<Resource> resources;
    std::vector<Process> processes;            // transformation processes
    std::vector<std::string> transport_operands; // operand ids with a move grid
    ProcessSpace process_space;
    SystemConcept system_concept;
    std::vector<int> buffers;      // resource indices forming B_S, in order
    std::vector<int> buffer_index; // resource index -> position in B_S or -1
    std::vector<Capability> capabilities; // enumeration order (see below)
    ProcessCapabilityMap pmap;
    // device ratios: operand x process-row, split by direction
    SpMat device_plus;  // outputs: operand i ejected per unit firing
    SpMat device_minus; // inputs: operand i consumed per unit firing
    std::vector<ServiceNetDecl> service_nets; // one per operand, operand order
    // initial stock per (operand, buffer), dense operand-major vector
    Vec initial_stock; // size operands * buffers

    int operand_count() const { return static_cast<int>(operands.size()); }
    int buffer_count() const { return static_cast<int>(buffers.size()); }
    int capability_count() const { return static_cast<int>(capabilities.size()); }

    int find_operand(const std::string& id) const;
    int find_resource(const std::string& id) const;
    int find_capability(const std::string& id) const;
};

// Capability enumeration: column-major over the concept matrix (iterate
// resources, then process rows). Returns capabilities sorted into that
// canonical order; the input order does not matter. Throws
// std::invalid_argument when a capability references an out-of-range process
// or resource, or when two capabilities share a concept cell.
std::vector<Capability> enumerate_capabilities(const SystemConcept& sc,
                                               std::vector<Capability> declared);

// Buffer classification: transformation resources followed by independent
// buffers, in declaration order; transportation resources excluded.
std::vector<int> classify_buffers(const std::vector<Resource>& resources);

// Degrees of freedom of a concept matrix (number of structural nonzeros with
// value 1; zeros that are explicitly stored do not count).
int dof(const SystemConcept& sc);

} // namespace hfn

#endif
