#include "hfn/qp.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace hfn {

DecisionVectorLayout layout(int n_qb, int n_e, int n_sl, int n_el, int K) {
    if (n_qb < 0 || n_e < 0 || n_sl < 0 || n_el < 0 || K < 0)
        throw std::invalid_argument("layout dimensions are non-negative");
    DecisionVectorLayout l;
    l.K = K;
    l.n_qb = n_qb;
    l.n_e = n_e;
    l.n_sl = n_sl;
    l.n_el = n_el;
    return l;
}

namespace {

class RowBuilder {
public:
    explicit RowBuilder(int cols) : cols_(cols) {}

    void coeff(int row, int col, double v) {
        if (col < 0 || col >= cols_) throw std::invalid_argument("column out of range");
        if (v != 0.0) trip_.emplace_back(row, col, v);
    }
    int add_row(double rhs) {
        b_.push_back(rhs);
        return static_cast<int>(b_.size()) - 1;
    }
    // Adds count rows of 0 = 0 to keep block row counts intact while leaving
    // the corresponding values unconstrained.
    void add_vacuous(int count) {
        for (int i = 0; i < count; ++i) b_.push_back(0.0);
    }
    int rows() const { return static_cast<int>(b_.size()); }

    std::pair<SpMat, Vec> finish() {
        SpMat m(rows(), cols_);
        m.setFromTriplets(trip_.begin(), trip_.end());
        Vec b = Eigen::Map<Vec>(b_.data(), static_cast<Eigen::Index>(b_.size()));
        return {std::move(m), b};
    }

private:
    int cols_;
    std::vector<Triplet> trip_;
    std::vector<double> b_;
};

} // namespace

std::pair<SpMat, Vec> assemble_equalities(const PlaceTransitionNet& esn,
                                          const ServiceBlock& services,
                                          const std::vector<int>& durations,
                                          const BoundaryData& boundary,
                                          const InitialFinalConditions& conditions,
                                          const DecisionVectorLayout& l,
                                          std::vector<BlockCount>* blocks) {
    const int K = l.K;
    if (esn.places() != l.n_qb || esn.transitions() != l.n_e ||
        services.places() != l.n_sl || services.transitions() != l.n_el ||
        static_cast<int>(durations.size()) != l.n_e)
        throw std::invalid_argument("assemble_equalities dimension mismatch");
    for (const auto& pin : boundary.demands)
        if (pin.series.size() != K)
            throw std::invalid_argument("demand series shorter than the horizon");
    for (const auto& pin : boundary.supplies)
        if (pin.series.size() != K)
            throw std::invalid_argument("supply series shorter than the horizon");

    RowBuilder rb(l.size());
    const int B = boundary.rows_per_step();
    int n_place = 0, n_trans = 0, n_dur = 0, n_sp = 0, n_st = 0, n_syp = 0, n_sym = 0,
        n_bnd = 0;

    // Row-major access is awkward with Eigen's default column storage;
    // iterate columns and scatter into per-row triplets instead.
    auto scatter = [&](const SpMat& m, auto col_of, double sign, int base_row) {
        for (int c = 0; c < m.outerSize(); ++c)
            for (SpMat::InnerIterator it(m, c); it; ++it)
                rb.coeff(base_row + static_cast<int>(it.row()), col_of(c),
                         sign * it.value());
    };

    for (int t = 0; t < K; ++t) {
        // engineering place dynamics: Q_B[t+1] - Q_B[t] - M+ U+[t] + M- U-[t] = 0
        int base = rb.rows();
        for (int i = 0; i < l.n_qb; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.qb(t + 1, i), 1.0);
            rb.coeff(r, l.qb(t, i), -1.0);
        }
        scatter(esn.m_plus, [&](int c) { return l.up(t, c); }, -1.0, base);
        scatter(esn.m_minus, [&](int c) { return l.um(t, c); }, 1.0, base);
        n_place += l.n_qb;

        // engineering transition dynamics: Q_E[t+1] - Q_E[t] - U-[t] + U+[t] = 0
        for (int i = 0; i < l.n_e; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.qe(t + 1, i), 1.0);
            rb.coeff(r, l.qe(t, i), -1.0);
            rb.coeff(r, l.um(t, i), -1.0);
            rb.coeff(r, l.up(t, i), 1.0);
        }
        n_trans += l.n_e;

        // duration coupling, indexed by completion step: starts cannot finish
        // before they happen, and every completion equals the start kd steps
        // earlier. Exactly one row per (t, transition).
        for (int i = 0; i < l.n_e; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.up(t, i), 1.0);
            if (t >= durations[i]) rb.coeff(r, l.um(t - durations[i], i), -1.0);
        }
        n_dur += l.n_e;

        // service place dynamics
        base = rb.rows();
        for (int i = 0; i < l.n_sl; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.qsl(t + 1, i), 1.0);
            rb.coeff(r, l.qsl(t, i), -1.0);
        }
        scatter(services.m_plus, [&](int c) { return l.ulp(t, c); }, -1.0, base);
        scatter(services.m_minus, [&](int c) { return l.ulm(t, c); }, 1.0, base);
        n_sp += l.n_sl;

        // service transition dynamics
        for (int i = 0; i < l.n_el; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.qel(t + 1, i), 1.0);
            rb.coeff(r, l.qel(t, i), -1.0);
            rb.coeff(r, l.ulm(t, i), -1.0);
            rb.coeff(r, l.ulp(t, i), 1.0);
        }
        n_st += l.n_el;

        // synchronization: U_L+[t] = Lambda+ U+[t], U_L-[t] = Lambda- U-[t]
        base = rb.rows();
        for (int i = 0; i < l.n_el; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.ulp(t, i), 1.0);
        }
        scatter(services.lambda_plus, [&](int c) { return l.up(t, c); }, -1.0, base);
        n_syp += l.n_el;
        base = rb.rows();
        for (int i = 0; i < l.n_el; ++i) {
            int r = rb.add_row(0.0);
            rb.coeff(r, l.ulm(t, i), 1.0);
        }
        scatter(services.lambda_minus, [&](int c) { return l.um(t, c); }, -1.0, base);
        n_sym += l.n_el;

        // boundary pins: demands on U-, supplies on U+
        for (const auto& pin : boundary.demands) {
            int r = rb.add_row(pin.series(t));
            rb.coeff(r, l.um(t, pin.capability), 1.0);
        }
        for (const auto& pin : boundary.supplies) {
            int r = rb.add_row(pin.series(t));
            rb.coeff(r, l.up(t, pin.capability), 1.0);
        }
        n_bnd += B;
    }

    // initial conditions at t = 0
    int n_init = 0;
    for (int i = 0; i < l.n_qb; ++i) {
        int r = rb.add_row(conditions.initial_qb(i));
        rb.coeff(r, l.qb(0, i), 1.0);
    }
    for (int i = 0; i < l.n_e; ++i) {
        int r = rb.add_row(conditions.initial_qe(i));
        rb.coeff(r, l.qe(0, i), 1.0);
    }
    for (int i = 0; i < l.n_sl; ++i) {
        int r = rb.add_row(conditions.initial_qsl(i));
        rb.coeff(r, l.qsl(0, i), 1.0);
    }
    n_init = l.n_qb + l.n_e + l.n_sl;

    // final conditions at t = K; inactive entries keep their row as 0 = 0
    int n_final = 0;
    for (int i = 0; i < l.n_qb; ++i) {
        if (conditions.final_qb_active[i]) {
            int r = rb.add_row(conditions.final_qb(i));
            rb.coeff(r, l.qb(K, i), 1.0);
        } else {
            rb.add_vacuous(1);
        }
    }
    for (int i = 0; i < l.n_e; ++i) {
        if (conditions.final_qe_active[i]) {
            int r = rb.add_row(conditions.final_qe(i));
            rb.coeff(r, l.qe(K, i), 1.0);
        } else {
            rb.add_vacuous(1);
        }
    }
    for (int i = 0; i < l.n_sl; ++i) {
        if (conditions.final_qsl_active[i]) {
            int r = rb.add_row(conditions.final_qsl(i));
            rb.coeff(r, l.qsl(K, i), 1.0);
        } else {
            rb.add_vacuous(1);
        }
    }
    for (int i = 0; i < l.n_e; ++i) {
        int r = rb.add_row(0.0);
        rb.coeff(r, l.um(K, i), 1.0);
    }
    for (int i = 0; i < l.n_el; ++i) {
        int r = rb.add_row(0.0);
        rb.coeff(r, l.ulm(K, i), 1.0);
    }
    n_final = l.n_qb + l.n_e + l.n_sl + l.n_e + l.n_el;

    if (blocks) {
        blocks->clear();
        blocks->push_back({"place-dynamics", n_place, K * l.n_qb});
        blocks->push_back({"transition-dynamics", n_trans, K * l.n_e});
        blocks->push_back({"duration-coupling", n_dur, K * l.n_e});
        blocks->push_back({"service-place-dynamics", n_sp, K * l.n_sl});
        blocks->push_back({"service-transition-dynamics", n_st, K * l.n_el});
        blocks->push_back({"synchronization-plus", n_syp, K * l.n_el});
        blocks->push_back({"synchronization-minus", n_sym, K * l.n_el});
        blocks->push_back({"boundary", n_bnd, K * B});
        blocks->push_back({"initial-conditions", n_init, l.n_qb + l.n_e + l.n_sl});
        blocks->push_back(
            {"final-conditions", n_final, l.n_qb + 2 * l.n_e + l.n_sl + l.n_el});
    }
    return rb.finish();
}

std::pair<SpMat, Vec> assemble_inequalities(const CapacityData& capacity,
                                            const DecisionVectorLayout& l) {
    if (capacity.c_u.size() != l.n_e)
        throw std::invalid_argument("capacity vector does not cover all transitions");
    RowBuilder rb(l.size());
    for (int t = 0; t <= l.K; ++t)
        for (int i = 0; i < l.n_e; ++i) {
            int r = rb.add_row(capacity.c_u(i));
            rb.coeff(r, l.um(t, i), 1.0);
        }
    return rb.finish();
}

std::pair<SpMat, Vec> assemble_objective(const std::vector<double>& linear_cost,
                                         const std::vector<double>& quadratic_cost,
                                         const DecisionVectorLayout& l,
                                         double epsilon) {
    if (static_cast<int>(linear_cost.size()) != l.n_e ||
        static_cast<int>(quadratic_cost.size()) != l.n_e)
        throw std::invalid_argument("cost vectors must cover all transitions");
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    for (int i = 0; i < l.n_e; ++i)
        if (linear_cost[i] < 0.0 || quadratic_cost[i] < 0.0)
            throw std::invalid_argument("cost coefficients must be non-negative");

    Vec f = Vec::Zero(l.size());
    std::vector<Triplet> fq;
    fq.reserve(l.size());
    std::vector<double> diag(l.size(), epsilon);
    for (int t = 0; t < l.K; ++t)
        for (int i = 0; i < l.n_e; ++i) {
            f(l.um(t, i)) = linear_cost[i];
            diag[l.um(t, i)] = std::max(quadratic_cost[i], epsilon);
        }
    for (int j = 0; j < l.size(); ++j) fq.emplace_back(j, j, diag[j]);
    SpMat F(l.size(), l.size());
    F.setFromTriplets(fq.begin(), fq.end());
    return {std::move(F), std::move(f)};
}

namespace {

// A capability that pulls and pushes the same (operand, buffer) cell can hold
// stock across the horizon boundary; its buffer entry stays free at t = K.
std::set<int> hold_capable_cells(const std::vector<Capability>& caps, int buffers) {
    std::set<int> cells;
    for (const Capability& c : caps)
        for (const CapabilityFlow& p : c.pulls)
            for (const CapabilityFlow& q : c.pushes)
                if (p.operand == q.operand && p.buffer == q.buffer)
                    cells.insert(p.operand * buffers + p.buffer);
    return cells;
}

bool is_output_transition(const Capability& c) {
    return c.pushes.empty() && !c.pulls.empty();
}

} // namespace

CompiledProblem compile(const SystemModel& model, const ScenarioSpec& scenario) {
    CompiledProblem out;
    const int nl = model.operand_count();
    const int nb = model.buffer_count();
    const int ne = model.capability_count();

    out.tensors_binary = build_incidence_tensors(model.capabilities, nl, nb);
    out.tensors_refined = refine_with_device_models(out.tensors_binary, model.device_plus,
                                                    model.device_minus, model.pmap);
    ACColoredPetriNet colored;
    colored.colors = nl;
    colored.places = nb;
    colored.incidence = out.tensors_refined;
    for (const Capability& c : model.capabilities) colored.durations.push_back(c.duration);
    out.esn = accpn_to_ptn(colored);

    std::vector<ServiceNet> nets;
    std::vector<SynchronizationMatrix> syncs;
    for (const ServiceNetDecl& decl : model.service_nets) {
        nets.push_back(build_service_net(decl, ne));
        ServiceFeasibilityMatrix feas = build_feasibility(decl, ne);
        syncs.push_back(build_sync_matrices(feas, decl.operand, model.device_plus,
                                            model.device_minus, model.pmap));
    }
    out.services = concat_services(nets, syncs);

    DecisionVectorLayout l =
        layout(nl * nb, ne, out.services.places(), out.services.transitions(), scenario.K);

    out.boundary.demands = scenario.demands;
    out.boundary.supplies = scenario.supplies;

    InitialFinalConditions& ic = out.conditions;
    ic.initial_qb = scenario.zero_initial ? Vec::Zero(l.n_qb) : model.initial_stock;
    ic.initial_qe = Vec::Zero(l.n_e);
    ic.initial_qsl =
        scenario.zero_initial ? Vec::Zero(l.n_sl) : out.services.initial_marking;
    ic.final_qb = Vec::Zero(l.n_qb);
    ic.final_qe = Vec::Zero(l.n_e);
    ic.final_qsl = Vec::Zero(l.n_sl);
    std::set<int> holds = hold_capable_cells(model.capabilities, nb);
    ic.final_qb_active.assign(l.n_qb, true);
    for (int cell : holds) ic.final_qb_active[cell] = false;
    // A cell no capability touches keeps its initial stock through the whole
    // horizon. Pinning it again at t = K would repeat a row the dynamics
    // already imply, so those pins are emitted in vacuous form.
    std::vector<bool> touched(l.n_qb, false);
    for (const Capability& c : model.capabilities) {
        for (const CapabilityFlow& p : c.pulls) touched[p.operand * nb + p.buffer] = true;
        for (const CapabilityFlow& p : c.pushes) touched[p.operand * nb + p.buffer] = true;
    }
    for (int cell = 0; cell < l.n_qb; ++cell)
        if (!touched[cell] && ic.initial_qb(cell) == ic.final_qb(cell))
            ic.final_qb_active[cell] = false;
    ic.final_qe_active.assign(l.n_e, true);
    for (int i = 0; i < ne; ++i) {
        const Capability& c = model.capabilities[i];
        if (is_output_transition(c)) ic.final_qe_active[i] = false;
        // With no holding time the firing vectors cancel step by step, so the
        // end state equals the start state and the pin would be redundant.
        if (c.duration == 0 && ic.initial_qe(i) == ic.final_qe(i))
            ic.final_qe_active[i] = false;
    }
    ic.final_qsl_active.assign(l.n_sl, false);

    out.capacity.c_u = Vec(ne);
    std::vector<double> lin(ne), quad(ne);
    for (int i = 0; i < ne; ++i) {
        out.capacity.c_u(i) = model.capabilities[i].capacity;
        lin[i] = model.capabilities[i].linear_cost;
        quad[i] = model.capabilities[i].quadratic_cost;
    }
    for (const auto& [cap, add] : scenario.cost_adders) {
        if (cap < 0 || cap >= ne)
            throw std::invalid_argument("cost adder names an unknown capability");
        lin[cap] += add;
    }

    std::vector<int> durations;
    for (const Capability& c : model.capabilities) durations.push_back(c.duration);

    QPProblem& qp = out.qp;
    qp.layout = l;
    std::tie(qp.A, qp.b) = assemble_equalities(out.esn, out.services, durations,
                                               out.boundary, ic, l,
                                               &out.report.equality_blocks);
    std::tie(qp.D, qp.e) = assemble_inequalities(out.capacity, l);
    std::tie(qp.F, qp.f) = assemble_objective(lin, quad, l, scenario.epsilon);

    CompileReport& rep = out.report;
    rep.concept_rows = model.system_concept.rows;
    rep.concept_cols = model.system_concept.cols;
    rep.concept_nnz = dof(model.system_concept);
    rep.tensor_operands = nl;
    rep.tensor_buffers = nb;
    rep.tensor_capabilities = ne;
    rep.tensor_joint_nnz = out.tensors_binary.plus.nnz() + out.tensors_binary.minus.nnz();
    rep.tensor_signed_nnz = signed_nonzero_count(out.tensors_binary);
    if (rep.tensor_joint_nnz != rep.tensor_signed_nnz) {
        std::ostringstream note;
        note << "incidence fill count: " << rep.tensor_joint_nnz
             << " entries counting the positive and negative tensors separately; "
             << rep.tensor_signed_nnz
             << " under the signed difference (storage self-loops cancel). The signed "
                "count is the published figure for this network.";
        rep.incidence_note = note.str();
    }
    rep.buffer_count = nb;
    rep.capability_count = ne;
    rep.service_places = out.services.places();
    rep.service_transitions = out.services.transitions();
    rep.sigma_x = l.size();
    rep.sigma_a = static_cast<int>(qp.A.rows());
    rep.sigma_d = static_cast<int>(qp.D.rows());
    if (!scenario.supplies.empty()) {
        std::ostringstream note;
        note << "boundary block carries " << scenario.demands.size()
             << " demand and " << scenario.supplies.size()
             << " supply rows per step; the supply pins add "
             << scenario.K * static_cast<int>(scenario.supplies.size())
             << " equality rows over the horizon.";
        rep.dimension_note = note.str();
    }
    return out;
}

std::string CompileReport::to_text() const {
    std::ostringstream os;
    os << "system concept: " << concept_rows << " x " << concept_cols << ", "
       << concept_nnz << " filled elements\n";
    os << "buffers: " << buffer_count << ", capabilities: " << capability_count << "\n";
    os << "incidence tensors: " << tensor_operands << " x " << tensor_buffers << " x "
       << tensor_capabilities << ", joint fill " << tensor_joint_nnz << ", signed fill "
       << tensor_signed_nnz << "\n";
    if (!incidence_note.empty()) os << "note: " << incidence_note << "\n";
    os << "service nets: " << service_places << " places, " << service_transitions
       << " transitions\n";
    os << "decision vector: " << sigma_x << "\n";
    os << "equality rows: " << sigma_a << "\n";
    for (const BlockCount& bc : equality_blocks)
        os << "  " << bc.name << ": " << bc.rows << " (formula " << bc.formula_rows
           << (bc.rows == bc.formula_rows ? ", match" : ", MISMATCH") << ")\n";
    os << "inequality rows: " << sigma_d << "\n";
    if (!dimension_note.empty()) os << "note: " << dimension_note << "\n";
    return os.str();
}

std::string export_qp_text(const QPProblem& qp, const CompileReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "# sparse quadratic program export v1\n";
    os << "# minimize x'Fx + f'x  subject to  Ax = b, Dx <= e, x >= 0\n";
    os << "dims n " << qp.layout.size() << " a_rows " << qp.A.rows() << " d_rows "
       << qp.D.rows() << " horizon " << qp.layout.K << " per_step "
       << qp.layout.per_step() << "\n";
    for (int c = 0; c < qp.F.outerSize(); ++c)
        for (SpMat::InnerIterator it(qp.F, c); it; ++it)
            os << "F " << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    for (int i = 0; i < qp.f.size(); ++i)
        if (qp.f(i) != 0.0) os << "f " << i << ' ' << qp.f(i) << '\n';
    for (int c = 0; c < qp.A.outerSize(); ++c)
        for (SpMat::InnerIterator it(qp.A, c); it; ++it)
            os << "A " << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    for (int i = 0; i < qp.b.size(); ++i)
        if (qp.b(i) != 0.0) os << "b " << i << ' ' << qp.b(i) << '\n';
    for (int c = 0; c < qp.D.outerSize(); ++c)
        for (SpMat::InnerIterator it(qp.D, c); it; ++it)
            os << "D " << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    for (int i = 0; i < qp.e.size(); ++i)
        if (qp.e(i) != 0.0) os << "e " << i << ' ' << qp.e(i) << '\n';
    os << "# " << report.sigma_x << " variables, " << report.sigma_a << " equalities, "
       << report.sigma_d << " inequalities\n";
    return os.str();
}

} // namespace hfn
