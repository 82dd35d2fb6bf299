#include "hfn/petri.hpp"

#include <cmath>
#include <sstream>

namespace hfn {

namespace {
constexpr double kNegTol = 1e-9;
}

void Bag::set(int color, double v) {
    if (v < 0.0) throw std::invalid_argument("bag coefficients are non-negative");
    if (v == 0.0)
        coeff_.erase(color);
    else
        coeff_[color] = v;
}

Bag& Bag::operator+=(const Bag& other) {
    for (const auto& [c, v] : other.coeff_) coeff_[c] += v;
    return *this;
}

Bag& Bag::operator-=(const Bag& other) {
    for (const auto& [c, v] : other.coeff_) {
        double next = count(c) - v;
        if (next < -kNegTol)
            throw std::invalid_argument("bag subtraction would go negative");
        set(c, next < 0.0 ? 0.0 : next);
    }
    return *this;
}

Bag Bag::scaled(double a) const {
    if (a < 0.0) throw std::invalid_argument("bag scaling factor is non-negative");
    Bag out;
    for (const auto& [c, v] : coeff_) out.set(c, v * a);
    return out;
}

double Bag::total() const {
    double t = 0.0;
    for (const auto& [c, v] : coeff_) t += v;
    return t;
}

void step_ptn(const PlaceTransitionNet& net, const Vec& u_minus, const Vec& u_plus,
              Vec& q_b, Vec& q_e) {
    if (u_minus.size() != net.transitions() || u_plus.size() != net.transitions() ||
        q_b.size() != net.places() || q_e.size() != net.transitions())
        throw std::invalid_argument("step_ptn dimension mismatch");
    q_b += net.m_plus * u_plus - net.m_minus * u_minus;
    q_e += u_minus - u_plus;
}

std::vector<DurationViolation> check_duration(const FiringSchedule& schedule,
                                              const std::vector<int>& durations) {
    std::vector<DurationViolation> out;
    const int steps = schedule.steps();
    const int n = static_cast<int>(durations.size());
    for (int psi = 0; psi < n; ++psi) {
        const int kd = durations[psi];
        for (int k = 0; k < steps; ++k) {
            double expected = (k < kd) ? 0.0 : schedule.u_minus[k - kd](psi);
            double actual = schedule.u_plus[k](psi);
            if (std::abs(actual - expected) > 1e-9)
                out.push_back({psi, k, expected, actual});
        }
    }
    return out;
}

PlaceTransitionNet accpn_to_ptn(const ACColoredPetriNet& net) {
    PlaceTransitionNet out;
    out.m_plus = matricize(net.incidence.plus);
    out.m_minus = matricize(net.incidence.minus);
    out.durations = net.durations;
    return out;
}

Vec vectorize_marking(const ACColoredPetriNet& net) {
    Vec q = Vec::Zero(static_cast<Eigen::Index>(net.colors) * net.places);
    for (int y = 0; y < net.places; ++y)
        for (const auto& [color, v] : net.place_marking[y].coefficients())
            q(color * net.places + y) = v;
    return q;
}

Trajectory simulate(const PlaceTransitionNet& net, const FiringSchedule& schedule,
                    const Vec& q_b0, const Vec& q_e0) {
    Trajectory t;
    const int steps = schedule.steps();
    t.q_b.reserve(steps + 1);
    t.q_e.reserve(steps + 1);
    t.q_b.push_back(q_b0);
    t.q_e.push_back(q_e0);
    Vec q_b = q_b0;
    Vec q_e = q_e0;
    for (int k = 0; k < steps; ++k) {
        step_ptn(net, schedule.u_minus[k], schedule.u_plus[k], q_b, q_e);
        if (!t.violation) {
            for (int i = 0; i < q_b.size(); ++i)
                if (q_b(i) < -kNegTol) {
                    t.violation = NegativityViolation{k + 1, i, q_b(i), false};
                    break;
                }
            if (!t.violation)
                for (int i = 0; i < q_e.size(); ++i)
                    if (q_e(i) < -kNegTol) {
                        t.violation = NegativityViolation{k + 1, i, q_e(i), true};
                        break;
                    }
        }
        t.q_b.push_back(q_b);
        t.q_e.push_back(q_e);
    }
    return t;
}

std::string to_dot(const PlaceTransitionNet& net,
                   const std::vector<std::string>& place_names,
                   const std::vector<std::string>& transition_names) {
    std::ostringstream os;
    os << "digraph ptn {\n  rankdir=LR;\n";
    for (int s = 0; s < net.places(); ++s)
        os << "  p" << s << " [shape=circle label=\""
           << (s < static_cast<int>(place_names.size()) ? place_names[s] : "p" + std::to_string(s))
           << "\"];\n";
    for (int e = 0; e < net.transitions(); ++e)
        os << "  t" << e << " [shape=box label=\""
           << (e < static_cast<int>(transition_names.size()) ? transition_names[e]
                                                             : "t" + std::to_string(e))
           << "\"];\n";
    for (int c = 0; c < net.m_minus.outerSize(); ++c)
        for (SpMat::InnerIterator it(net.m_minus, c); it; ++it)
            os << "  p" << it.row() << " -> t" << c << " [label=\"" << it.value() << "\"];\n";
    for (int c = 0; c < net.m_plus.outerSize(); ++c)
        for (SpMat::InnerIterator it(net.m_plus, c); it; ++it)
            os << "  t" << c << " -> p" << it.row() << " [label=\"" << it.value() << "\"];\n";
    os << "}\n";
    return os.str();
}

std::string trajectory_csv(const Trajectory& t) {
    std::ostringstream os;
    os << "step,kind,index,value\n";
    for (size_t k = 0; k < t.q_b.size(); ++k) {
        for (int i = 0; i < t.q_b[k].size(); ++i)
            os << k << ",place," << i << ',' << t.q_b[k](i) << '\n';
        for (int i = 0; i < t.q_e[k].size(); ++i)
            os << k << ",transition," << i << ',' << t.q_e[k](i) << '\n';
    }
    return os.str();
}

} // namespace hfn
