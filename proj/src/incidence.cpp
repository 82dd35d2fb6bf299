#include "hfn/incidence.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace hfn {

namespace {

void sort_entries(IncidenceTensor3& t) {
    std::sort(t.entries.begin(), t.entries.end(),
              [](const IncidenceTensor3::Entry& a, const IncidenceTensor3::Entry& b) {
                  if (a.capability != b.capability) return a.capability < b.capability;
                  if (a.operand != b.operand) return a.operand < b.operand;
                  return a.buffer < b.buffer;
              });
}

void check_flow(const Capability& c, const CapabilityFlow& f, int nl, int nb) {
    if (f.operand < 0 || f.operand >= nl)
        throw std::invalid_argument("capability '" + c.id + "' flow names an undeclared operand");
    if (f.buffer < 0 || f.buffer >= nb)
        throw std::invalid_argument("capability '" + c.id + "' flow targets a non-buffer resource");
}

} // namespace

double IncidenceTensor3::at(int i, int y, int psi) const {
    for (const Entry& e : entries)
        if (e.operand == i && e.buffer == y && e.capability == psi) return e.weight;
    return 0.0;
}

SpMat matricize(const IncidenceTensor3& t) {
    SpMat m(t.operands * t.buffers, t.capabilities);
    std::vector<Triplet> trip;
    trip.reserve(t.entries.size());
    for (const auto& e : t.entries)
        trip.emplace_back(e.operand * t.buffers + e.buffer, e.capability, e.weight);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

IncidencePair build_incidence_tensors(const std::vector<Capability>& capabilities,
                                      int operand_count, int buffer_count) {
    IncidencePair pair;
    for (IncidenceTensor3* t : {&pair.plus, &pair.minus}) {
        t->operands = operand_count;
        t->buffers = buffer_count;
        t->capabilities = static_cast<int>(capabilities.size());
    }
    for (size_t psi = 0; psi < capabilities.size(); ++psi) {
        const Capability& c = capabilities[psi];
        for (const CapabilityFlow& f : c.pulls) {
            check_flow(c, f, operand_count, buffer_count);
            pair.minus.entries.push_back({f.operand, f.buffer, static_cast<int>(psi), 1.0});
        }
        for (const CapabilityFlow& f : c.pushes) {
            check_flow(c, f, operand_count, buffer_count);
            pair.plus.entries.push_back({f.operand, f.buffer, static_cast<int>(psi), 1.0});
        }
    }
    sort_entries(pair.plus);
    sort_entries(pair.minus);
    return pair;
}

IncidencePair refine_with_device_models(const IncidencePair& binary,
                                        const SpMat& device_plus,
                                        const SpMat& device_minus,
                                        const ProcessCapabilityMap& pmap) {
    IncidencePair out = binary;
    auto scale = [&](IncidenceTensor3& t, const SpMat& d, const char* side) {
        for (auto& e : t.entries) {
            double ratio = d.coeff(e.operand, pmap(e.capability));
            if (ratio == 0.0) {
                std::ostringstream msg;
                msg << "undeclared " << side << " device ratio for operand " << e.operand
                    << " of capability " << e.capability;
                throw std::invalid_argument(msg.str());
            }
            e.weight *= ratio;
        }
    };
    scale(out.plus, device_plus, "output");
    scale(out.minus, device_minus, "input");
    return out;
}

int signed_nonzero_count(const IncidencePair& pair) {
    std::map<std::tuple<int, int, int>, double> net;
    for (const auto& e : pair.plus.entries)
        net[{e.operand, e.buffer, e.capability}] += e.weight;
    for (const auto& e : pair.minus.entries)
        net[{e.operand, e.buffer, e.capability}] -= e.weight;
    int n = 0;
    for (const auto& [coord, w] : net)
        if (w != 0.0) ++n;
    return n;
}

std::string to_coordinate_text(const IncidenceTensor3& t) {
    std::ostringstream os;
    for (const auto& e : t.entries)
        os << e.operand << ' ' << e.buffer << ' ' << e.capability << ' ' << e.weight << '\n';
    return os.str();
}

} // namespace hfn
