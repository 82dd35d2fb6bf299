#include "hfn/core.hpp"

#include <algorithm>
#include <map>

namespace hfn {

int SystemModel::find_operand(const std::string& id) const {
    for (size_t i = 0; i < operands.size(); ++i)
        if (operands[i].id == id) return static_cast<int>(i);
    return -1;
}

int SystemModel::find_resource(const std::string& id) const {
    for (size_t i = 0; i < resources.size(); ++i)
        if (resources[i].id == id) return static_cast<int>(i);
    return -1;
}

int SystemModel::find_capability(const std::string& id) const {
    for (size_t i = 0; i < capabilities.size(); ++i)
        if (capabilities[i].id == id) return static_cast<int>(i);
    return -1;
}

std::vector<Capability> enumerate_capabilities(const SystemConcept& sc,
                                               std::vector<Capability> declared) {
    for (const Capability& c : declared) {
        if (c.process_row < 0 || c.process_row >= sc.rows ||
            c.resource < 0 || c.resource >= sc.cols)
            throw std::invalid_argument(
                "capability '" + c.id + "' references a process/resource outside the concept matrix");
        if (sc.a_s.coeff(c.process_row, c.resource) == 0.0)
            throw std::invalid_argument(
                "capability '" + c.id + "' has no enabling concept entry");
    }
    std::map<std::pair<int, int>, int> seen; // (resource, process_row) -> count
    for (const Capability& c : declared) {
        if (++seen[{c.resource, c.process_row}] > 1)
            throw std::invalid_argument(
                "duplicate capability at concept cell for '" + c.id + "'");
    }
    // Column-major over A_S: resource-major, process-minor. Stable and a pure
    // function of the model document.
    std::sort(declared.begin(), declared.end(),
              [](const Capability& a, const Capability& b) {
                  if (a.resource != b.resource) return a.resource < b.resource;
                  return a.process_row < b.process_row;
              });
    return declared;
}

std::vector<int> classify_buffers(const std::vector<Resource>& resources) {
    std::vector<int> out;
    for (size_t i = 0; i < resources.size(); ++i)
        if (resources[i].kind == ResourceKind::Transformation)
            out.push_back(static_cast<int>(i));
    for (size_t i = 0; i < resources.size(); ++i)
        if (resources[i].kind == ResourceKind::IndependentBuffer)
            out.push_back(static_cast<int>(i));
    return out;
}

int dof(const SystemConcept& sc) {
    int n = 0;
    for (int k = 0; k < sc.a_s.outerSize(); ++k)
        for (SpMat::InnerIterator it(sc.a_s, k); it; ++it)
            if (it.value() != 0.0) ++n;
    return n;
}

} // namespace hfn
