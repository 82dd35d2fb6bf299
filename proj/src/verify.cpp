#include "hfn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hfn/petri.hpp"
#include "hfn/service.hpp"

namespace hfn {

bool VerificationReport::ok(double tol) const {
    return equality_residual <= tol && inequality_violation <= tol &&
           nonnegativity_violation <= tol && duration_mismatch <= tol &&
           sync_mismatch <= tol && replay_state_error <= tol &&
           replay_service_error <= tol;
}

std::string VerificationReport::to_text() const {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific;
    os << "equality residual        " << equality_residual << "\n";
    os << "inequality violation     " << inequality_violation << "\n";
    os << "nonnegativity violation  " << nonnegativity_violation << "\n";
    os << "duration mismatch        " << duration_mismatch << "\n";
    os << "synchronization mismatch " << sync_mismatch << "\n";
    os << "state replay error       " << replay_state_error << "\n";
    os << "service replay error     " << replay_service_error << "\n";
    return os.str();
}

namespace {

double pos_max(const Vec& v) {
    double m = 0.0;
    for (int i = 0; i < v.size(); ++i) m = std::max(m, v(i));
    return m;
}

Vec segment(const Vec& x, int offset, int count) { return x.segment(offset, count); }

} // namespace

VerificationReport verify(const Vec& x, const CompiledProblem& problem) {
    const DecisionVectorLayout& l = problem.qp.layout;
    const int K = l.K;
    VerificationReport rep;

    // Residuals are relative to the data scale so the same tolerance works
    // for networks measured in tonnes and networks measured in kilotonnes.
    const double scale_b = 1.0 + problem.qp.b.lpNorm<Eigen::Infinity>();
    const double scale_e = 1.0 + problem.qp.e.lpNorm<Eigen::Infinity>();
    const double scale_x = 1.0 + x.lpNorm<Eigen::Infinity>();

    rep.equality_residual =
        (problem.qp.A * x - problem.qp.b).lpNorm<Eigen::Infinity>() / scale_b;
    rep.inequality_violation = pos_max(problem.qp.D * x - problem.qp.e) / scale_e;
    rep.nonnegativity_violation = pos_max(-x) / scale_x;

    std::vector<int> durations = problem.esn.durations;
    for (int t = 0; t < K; ++t)
        for (int i = 0; i < l.n_e; ++i) {
            double expected =
                t >= durations[i] ? x(l.um(t - durations[i], i)) : 0.0;
            rep.duration_mismatch =
                std::max(rep.duration_mismatch, std::abs(x(l.up(t, i)) - expected));
        }
    rep.duration_mismatch /= scale_x;

    // synchronization is enforced for the horizon steps, not the final index
    for (int t = 0; t < K; ++t) {
        Vec ulp = segment(x, l.ulp(t, 0), l.n_el);
        Vec ulm = segment(x, l.ulm(t, 0), l.n_el);
        Vec up = segment(x, l.up(t, 0), l.n_e);
        Vec um = segment(x, l.um(t, 0), l.n_e);
        rep.sync_mismatch =
            std::max(rep.sync_mismatch, sync_residual_plus(problem.services, ulp, up)
                                            .lpNorm<Eigen::Infinity>());
        rep.sync_mismatch =
            std::max(rep.sync_mismatch, sync_residual_minus(problem.services, ulm, um)
                                            .lpNorm<Eigen::Infinity>());
    }
    rep.sync_mismatch /= scale_x;

    // replay the engineering states from the solution's own firings
    {
        FiringSchedule sched;
        for (int t = 0; t < K; ++t) {
            sched.u_minus.push_back(segment(x, l.um(t, 0), l.n_e));
            sched.u_plus.push_back(segment(x, l.up(t, 0), l.n_e));
        }
        Vec qb = segment(x, l.qb(0, 0), l.n_qb);
        Vec qe = segment(x, l.qe(0, 0), l.n_e);
        for (int t = 0; t < K; ++t) {
            step_ptn(problem.esn, sched.u_minus[t], sched.u_plus[t], qb, qe);
            rep.replay_state_error = std::max(
                rep.replay_state_error,
                (qb - segment(x, l.qb(t + 1, 0), l.n_qb)).lpNorm<Eigen::Infinity>());
            rep.replay_state_error = std::max(
                rep.replay_state_error,
                (qe - segment(x, l.qe(t + 1, 0), l.n_e)).lpNorm<Eigen::Infinity>());
        }
        rep.replay_state_error /= scale_x;
    }

    // same replay for the service block
    {
        PlaceTransitionNet net;
        net.m_plus = problem.services.m_plus;
        net.m_minus = problem.services.m_minus;
        net.durations.assign(l.n_el, 0);
        Vec qsl = segment(x, l.qsl(0, 0), l.n_sl);
        Vec qel = segment(x, l.qel(0, 0), l.n_el);
        for (int t = 0; t < K; ++t) {
            Vec ulm = segment(x, l.ulm(t, 0), l.n_el);
            Vec ulp = segment(x, l.ulp(t, 0), l.n_el);
            step_ptn(net, ulm, ulp, qsl, qel);
            rep.replay_service_error = std::max(
                rep.replay_service_error,
                (qsl - segment(x, l.qsl(t + 1, 0), l.n_sl)).lpNorm<Eigen::Infinity>());
            rep.replay_service_error = std::max(
                rep.replay_service_error,
                (qel - segment(x, l.qel(t + 1, 0), l.n_el)).lpNorm<Eigen::Infinity>());
        }
        rep.replay_service_error /= scale_x;
    }
    return rep;
}

} // namespace hfn
