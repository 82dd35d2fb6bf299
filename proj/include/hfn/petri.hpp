// Executable place-transition and arc-constant colored Petri nets: multiset
// algebra, timed state stepping, color splitting, and trajectory simulation.
// The simulator is the verification oracle for optimized firing schedules.
#ifndef HFN_PETRI_HPP
#define HFN_PETRI_HPP

#include "hfn/core.hpp"
#include "hfn/incidence.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hfn {

// Non-negative real multiset over operand colors.
class Bag {
public:
    Bag() = default;

    double count(int color) const {
        auto it = coeff_.find(color);
        return it == coeff_.end() ? 0.0 : it->second;
    }
    void set(int color, double v);
    Bag& operator+=(const Bag& other);
    // Subtraction clamps at zero only through validity: subtracting more than
    // present throws, matching the non-negative marking invariant.
    Bag& operator-=(const Bag& other);
    Bag scaled(double a) const;
    double total() const;
    bool empty() const { return coeff_.empty(); }
    const std::map<int, double>& coefficients() const { return coeff_; }

private:
    std::map<int, double> coeff_;
};

// Place-transition net with continuous marking and per-transition durations.
struct PlaceTransitionNet {
    SpMat m_plus;  // places x transitions
    SpMat m_minus; // places x transitions
    std::vector<int> durations; // per transition

    int places() const { return static_cast<int>(m_plus.rows()); }
    int transitions() const { return static_cast<int>(m_plus.cols()); }
};

// Arc-constant colored net view: places are buffers, transitions are
// capabilities, arcs carry constant operand multisets (the refined tensors).
struct ACColoredPetriNet {
    int colors = 0;
    int places = 0;
    IncidencePair incidence; // refined tensors, plus = output arcs
    std::vector<int> durations;
    std::vector<Bag> place_marking;     // per place
    std::vector<double> transition_marking; // scalar tokens in transit
};

// Continuous firing amounts per step; k is 0-based over the horizon.
struct FiringSchedule {
    std::vector<Vec> u_minus; // starts, one vector per step
    std::vector<Vec> u_plus;  // completions

    int steps() const { return static_cast<int>(u_minus.size()); }
};

struct DurationViolation {
    int transition;
    int step; // 0-based step of the mismatched completion
    double expected;
    double actual;
};

struct NegativityViolation {
    // trajectory index of the first negative state; the update of step k
    // produces state k + 1, so this equals the 1-based day that overdrew
    int step;
    int index; // place (or transition) index
    double value;
    bool in_transition; // true when the violation is in Q_E
};

struct Trajectory {
    std::vector<Vec> q_b; // place markings, steps 0..K
    std::vector<Vec> q_e; // transition markings
    std::optional<NegativityViolation> violation; // first one found, if any
};

// One step of the timed state equations:
//   Q_B' = Q_B + M+ U+ - M- U-
//   Q_E' = Q_E + U- - U+
// Dimension mismatches throw; negativity is reported by the caller-facing
// simulate(), which uses this internally.
void step_ptn(const PlaceTransitionNet& net, const Vec& u_minus, const Vec& u_plus,
              Vec& q_b, Vec& q_e);

// Duration couplings U+[k + kd] == U-[k] for k + kd < steps, tolerance 1e-9.
// Also reports completions in the warm-up window (U+[k] for k < kd must be
// zero: nothing can finish that never started inside the horizon).
std::vector<DurationViolation> check_duration(const FiringSchedule& schedule,
                                              const std::vector<int>& durations);

// Color splitting: places become (color, place) pairs in operand-major order,
// transitions are retained, incidence matrices are the matricized tensors,
// and the marking vector is the vectorized bags.
PlaceTransitionNet accpn_to_ptn(const ACColoredPetriNet& net);
Vec vectorize_marking(const ACColoredPetriNet& net);

// Repeated stepping from (q_b0, q_e0) over the schedule. The trajectory has
// steps() + 1 entries; the first negativity (below -1e-9) is recorded and the
// simulation still runs to completion so callers can inspect the full path.
Trajectory simulate(const PlaceTransitionNet& net, const FiringSchedule& schedule,
                    const Vec& q_b0, const Vec& q_e0);

// DOT export for documentation.
std::string to_dot(const PlaceTransitionNet& net,
                   const std::vector<std::string>& place_names,
                   const std::vector<std::string>& transition_names);

// CSV export: step, kind (place/transition), index, value.
std::string trajectory_csv(const Trajectory& t);

} // namespace hfn

#endif
