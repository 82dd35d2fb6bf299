#include "hfn/service.hpp"

#include <sstream>

namespace hfn {

ServiceNet build_service_net(const ServiceNetDecl& decl, int capability_count) {
    (void)capability_count;
    ServiceNet net;
    net.operand = decl.operand;
    net.place_ids = decl.place_ids;
    net.transition_ids = decl.transition_ids;
    const int ns = static_cast<int>(decl.place_ids.size());
    const int ne = static_cast<int>(decl.transition_ids.size());
    std::vector<Triplet> plus, minus;
    for (int e = 0; e < ne; ++e) {
        for (int p : decl.pull_places[e]) minus.emplace_back(p, e, 1.0);
        for (int p : decl.push_places[e]) plus.emplace_back(p, e, 1.0);
    }
    net.m_plus = SpMat(ns, ne);
    net.m_minus = SpMat(ns, ne);
    net.m_plus.setFromTriplets(plus.begin(), plus.end());
    net.m_minus.setFromTriplets(minus.begin(), minus.end());
    net.initial_marking = decl.initial_marking.size() == ns ? decl.initial_marking
                                                            : Vec::Zero(ns);
    return net;
}

ServiceFeasibilityMatrix build_feasibility(const ServiceNetDecl& decl,
                                           int capability_count) {
    const int ne = static_cast<int>(decl.transition_ids.size());
    std::vector<Triplet> plus, minus;
    for (int e = 0; e < ne; ++e) {
        for (int psi : decl.realizes_plus[e]) plus.emplace_back(e, psi, 1.0);
        for (int psi : decl.realizes_minus[e]) minus.emplace_back(e, psi, 1.0);
    }
    ServiceFeasibilityMatrix f;
    f.plus = SpMat(ne, capability_count);
    f.minus = SpMat(ne, capability_count);
    f.plus.setFromTriplets(plus.begin(), plus.end());
    f.minus.setFromTriplets(minus.begin(), minus.end());
    return f;
}

SynchronizationMatrix build_sync_matrices(const ServiceFeasibilityMatrix& feas,
                                          int operand,
                                          const SpMat& device_plus,
                                          const SpMat& device_minus,
                                          const ProcessCapabilityMap& pmap) {
    auto scale = [&](const SpMat& f, const SpMat& d, const char* side) {
        SpMat out = f;
        for (int c = 0; c < out.outerSize(); ++c)
            for (SpMat::InnerIterator it(out, c); it; ++it) {
                double ratio = d.coeff(operand, pmap(static_cast<int>(it.col())));
                if (ratio == 0.0) {
                    std::ostringstream msg;
                    msg << "feasible " << side << " pair without a device ratio: operand "
                        << operand << ", capability " << it.col();
                    throw std::invalid_argument(msg.str());
                }
                it.valueRef() *= ratio;
            }
        out.prune(0.0);
        return out;
    };
    SynchronizationMatrix s;
    s.plus = scale(feas.plus, device_plus, "output");
    s.minus = scale(feas.minus, device_minus, "input");
    return s;
}

ServiceBlock concat_services(const std::vector<ServiceNet>& nets,
                             const std::vector<SynchronizationMatrix>& syncs) {
    if (nets.size() != syncs.size())
        throw std::invalid_argument("one synchronization matrix per service net required");
    ServiceBlock b;
    int total_p = 0, total_e = 0, caps = 0;
    for (const ServiceNet& n : nets) {
        b.place_offset.push_back(total_p);
        b.transition_offset.push_back(total_e);
        total_p += n.places();
        total_e += n.transitions();
    }
    if (!syncs.empty()) caps = static_cast<int>(syncs.front().plus.cols());

    std::vector<Triplet> mp, mm, lp, lm;
    b.initial_marking = Vec::Zero(total_p);
    for (size_t i = 0; i < nets.size(); ++i) {
        const ServiceNet& n = nets[i];
        const int po = b.place_offset[i];
        const int eo = b.transition_offset[i];
        for (int c = 0; c < n.m_plus.outerSize(); ++c)
            for (SpMat::InnerIterator it(n.m_plus, c); it; ++it)
                mp.emplace_back(po + static_cast<int>(it.row()), eo + c, it.value());
        for (int c = 0; c < n.m_minus.outerSize(); ++c)
            for (SpMat::InnerIterator it(n.m_minus, c); it; ++it)
                mm.emplace_back(po + static_cast<int>(it.row()), eo + c, it.value());
        for (int c = 0; c < syncs[i].plus.outerSize(); ++c)
            for (SpMat::InnerIterator it(syncs[i].plus, c); it; ++it)
                lp.emplace_back(eo + static_cast<int>(it.row()), c, it.value());
        for (int c = 0; c < syncs[i].minus.outerSize(); ++c)
            for (SpMat::InnerIterator it(syncs[i].minus, c); it; ++it)
                lm.emplace_back(eo + static_cast<int>(it.row()), c, it.value());
        b.initial_marking.segment(po, n.places()) = n.initial_marking;
        for (const std::string& id : n.place_ids) b.place_ids.push_back(id);
        for (const std::string& id : n.transition_ids) b.transition_ids.push_back(id);
    }
    b.m_plus = SpMat(total_p, total_e);
    b.m_minus = SpMat(total_p, total_e);
    b.lambda_plus = SpMat(total_e, caps);
    b.lambda_minus = SpMat(total_e, caps);
    b.m_plus.setFromTriplets(mp.begin(), mp.end());
    b.m_minus.setFromTriplets(mm.begin(), mm.end());
    b.lambda_plus.setFromTriplets(lp.begin(), lp.end());
    b.lambda_minus.setFromTriplets(lm.begin(), lm.end());
    return b;
}

Vec sync_residual_plus(const ServiceBlock& block, const Vec& u_l_plus, const Vec& u_plus) {
    return u_l_plus - block.lambda_plus * u_plus;
}

Vec sync_residual_minus(const ServiceBlock& block, const Vec& u_l_minus, const Vec& u_minus) {
    return u_l_minus - block.lambda_minus * u_minus;
}

} // namespace hfn
