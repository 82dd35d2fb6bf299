// Decision-vector layout and sparse assembly of the canonical quadratic
// program: objective, equality blocks (dynamics, duration, synchronization,
// boundary, initial/final conditions) and capacity inequalities.
#ifndef HFN_QP_HPP
#define HFN_QP_HPP

#include "hfn/core.hpp"
#include "hfn/incidence.hpp"
#include "hfn/petri.hpp"
#include "hfn/service.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hfn {

// Per-step segment order: [Q_B; Q_E; Q_SL; Q_EL; U+; U-; U_L+; U_L-].
// Time indices t = 0..K give K+1 copies; dynamics couple t to t+1.
struct DecisionVectorLayout {
    int K = 0;
    int n_qb = 0;  // operands x buffers
    int n_e = 0;   // capabilities (also Q_E, U+, U- length)
    int n_sl = 0;  // stacked service places
    int n_el = 0;  // stacked service transitions (also U_L+- length)

    int per_step() const { return n_qb + 3 * n_e + n_sl + 3 * n_el; }
    int size() const { return (K + 1) * per_step(); }

    int qb(int t, int i = 0) const { return t * per_step() + i; }
    int qe(int t, int i = 0) const { return t * per_step() + n_qb + i; }
    int qsl(int t, int i = 0) const { return t * per_step() + n_qb + n_e + i; }
    int qel(int t, int i = 0) const { return t * per_step() + n_qb + n_e + n_sl + i; }
    int up(int t, int i = 0) const {
        return t * per_step() + n_qb + n_e + n_sl + n_el + i;
    }
    int um(int t, int i = 0) const {
        return t * per_step() + n_qb + 2 * n_e + n_sl + n_el + i;
    }
    int ulp(int t, int i = 0) const {
        return t * per_step() + n_qb + 3 * n_e + n_sl + n_el + i;
    }
    int ulm(int t, int i = 0) const {
        return t * per_step() + n_qb + 3 * n_e + n_sl + 2 * n_el + i;
    }
};

DecisionVectorLayout layout(int n_qb, int n_e, int n_sl, int n_el, int K);

// Exogenous pins on import (U+) and export/consume (U-) transitions. Series
// are per-step over t = 0..K-1 and pinned exactly, zero days included.
struct BoundaryData {
    struct Pin {
        int capability = -1;
        Vec series; // length K
    };
    std::vector<Pin> demands;  // rows U-(cap)[t] = series[t]
    std::vector<Pin> supplies; // rows U+(cap)[t] = series[t]

    int rows_per_step() const {
        return static_cast<int>(demands.size() + supplies.size());
    }
};

// Initial block pins Q_B, Q_E, Q_SL at t = 0. The final block emits one row
// per entry of Q_B, Q_E, Q_SL at t = K plus the terminal-start rows
// U-[K] = 0 and U_L-[K] = 0; entries whose active flag is false become
// vacuous 0 = 0 rows so the row-count identities are preserved while the
// value is left free.
struct InitialFinalConditions {
    Vec initial_qb;
    Vec initial_qe;
    Vec initial_qsl;
    Vec final_qb;
    Vec final_qe;
    Vec final_qsl;
    std::vector<bool> final_qb_active;
    std::vector<bool> final_qe_active;
    std::vector<bool> final_qsl_active;
};

// Capacity limits per capability, applied to U- at every t = 0..K. The
// selector for supplied input transitions is intentionally empty: every
// import here is instantaneous, so its U+ equals its already-capped U-
// through the duration rows.
struct CapacityData {
    Vec c_u;
};

struct QPProblem {
    SpMat F; // diagonal, entries >= epsilon
    Vec f;
    SpMat A;
    Vec b;
    SpMat D;
    Vec e;
    DecisionVectorLayout layout;
};

struct BlockCount {
    std::string name;
    int rows = 0;          // rows actually emitted
    int formula_rows = 0;  // rows predicted by the dimension formula
};

struct CompileReport {
    // structural description
    int concept_rows = 0, concept_cols = 0, concept_nnz = 0;
    int tensor_operands = 0, tensor_buffers = 0, tensor_capabilities = 0;
    int tensor_joint_nnz = 0;  // nnz(M+) + nnz(M-)
    int tensor_signed_nnz = 0; // nnz(M+ - M-)
    std::string incidence_note;
    int buffer_count = 0;
    int capability_count = 0;
    int service_places = 0;
    int service_transitions = 0;
    // program dimensions
    int sigma_x = 0;
    int sigma_a = 0;
    int sigma_d = 0;
    std::vector<BlockCount> equality_blocks;
    std::string dimension_note;

    std::string to_text() const;
};

// Lowered scenario, already resolved against a model: capability indices,
// per-step series, linear cost adders.
struct ScenarioSpec {
    std::string id;
    int K = 20;
    std::vector<BoundaryData::Pin> demands;
    std::vector<BoundaryData::Pin> supplies;
    std::vector<std::pair<int, double>> cost_adders; // capability -> $/unit on U-
    bool zero_initial = false;
    double epsilon = 1e-9;
};

// Everything the solver and the verifier need, produced in one pass.
struct CompiledProblem {
    QPProblem qp;
    PlaceTransitionNet esn;      // color-split engineering system net
    ServiceBlock services;
    IncidencePair tensors_binary;
    IncidencePair tensors_refined;
    BoundaryData boundary;
    InitialFinalConditions conditions;
    CapacityData capacity;
    CompileReport report;
};

// Individual assembly stages; compile() composes them. All stages throw
// std::invalid_argument on dimension inconsistencies.
std::pair<SpMat, Vec> assemble_equalities(const PlaceTransitionNet& esn,
                                          const ServiceBlock& services,
                                          const std::vector<int>& durations,
                                          const BoundaryData& boundary,
                                          const InitialFinalConditions& conditions,
                                          const DecisionVectorLayout& layout,
                                          std::vector<BlockCount>* blocks = nullptr);

std::pair<SpMat, Vec> assemble_inequalities(const CapacityData& capacity,
                                            const DecisionVectorLayout& layout);

std::pair<SpMat, Vec> assemble_objective(const std::vector<double>& linear_cost,
                                         const std::vector<double>& quadratic_cost,
                                         const DecisionVectorLayout& layout,
                                         double epsilon);

CompiledProblem compile(const SystemModel& model, const ScenarioSpec& scenario);

// Coordinate-list export of the assembled program plus a dimension manifest.
std::string export_qp_text(const QPProblem& qp, const CompileReport& report);

} // namespace hfn

#endif
