#include "hfn/solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hfn {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::MaxIterations: return "max-iterations";
        case SolveStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

namespace {

struct Scaling {
    Vec col;    // column scale, applied to all variables
    Vec row_a;  // equality row scale
    Vec row_d;  // inequality row scale
    double gamma = 1.0;  // cost scale
};

// Ruiz equilibration of the stacked constraint matrix [A; D]. Modifies the
// scaled copies in place and returns the accumulated scale factors.
Scaling ruiz_equilibrate(SpMat& a, SpMat& d, int passes) {
    const int n = static_cast<int>(a.cols());
    const int ma = static_cast<int>(a.rows());
    const int md = static_cast<int>(d.rows());
    Scaling s;
    s.col = Vec::Ones(n);
    s.row_a = Vec::Ones(ma);
    s.row_d = Vec::Ones(md);
    auto inv_sqrt = [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; };
    for (int pass = 0; pass < passes; ++pass) {
        Vec ra = Vec::Zero(ma), rd = Vec::Zero(md), cn = Vec::Zero(n);
        for (int c = 0; c < a.outerSize(); ++c)
            for (SpMat::InnerIterator it(a, c); it; ++it) {
                double v = std::abs(it.value());
                ra(it.row()) = std::max(ra(it.row()), v);
                cn(c) = std::max(cn(c), v);
            }
        for (int c = 0; c < d.outerSize(); ++c)
            for (SpMat::InnerIterator it(d, c); it; ++it) {
                double v = std::abs(it.value());
                rd(it.row()) = std::max(rd(it.row()), v);
                cn(c) = std::max(cn(c), v);
            }
        Vec sa = ra.unaryExpr(inv_sqrt);
        Vec sd = rd.unaryExpr(inv_sqrt);
        Vec sc = cn.unaryExpr(inv_sqrt);
        for (int c = 0; c < a.outerSize(); ++c)
            for (SpMat::InnerIterator it(a, c); it; ++it)
                it.valueRef() *= sa(it.row()) * sc(c);
        for (int c = 0; c < d.outerSize(); ++c)
            for (SpMat::InnerIterator it(d, c); it; ++it)
                it.valueRef() *= sd(it.row()) * sc(c);
        s.row_a.array() *= sa.array();
        s.row_d.array() *= sd.array();
        s.col.array() *= sc.array();
    }
    return s;
}

double pos_part_max(const Vec& v) {
    double m = 0.0;
    for (int i = 0; i < v.size(); ++i) m = std::max(m, v(i));
    return m;
}

// Longest step in [0, 1] keeping v + alpha * dv strictly positive is handled
// by the caller via the boundary fraction; this returns the full ratio.
double max_step(const Vec& v, const Vec& dv) {
    double alpha = 1.0;
    for (int i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    return alpha;
}

struct OriginalScore {
    double eq = 0.0;
    double ineq = 0.0;
    double neg = 0.0;
    double worst() const { return std::max({eq, ineq, neg}); }
};

OriginalScore score_original(const QPProblem& qp, const Vec& x) {
    OriginalScore s;
    if (qp.A.rows() > 0) s.eq = (qp.A * x - qp.b).lpNorm<Eigen::Infinity>();
    if (qp.D.rows() > 0) s.ineq = pos_part_max(qp.D * x - qp.e);
    s.neg = pos_part_max(-x);
    return s;
}

} // namespace

Solution solve(const QPProblem& qp, const SolverSettings& settings) {
    const int n = static_cast<int>(qp.f.size());
    const int ma = static_cast<int>(qp.A.rows());
    const int md = static_cast<int>(qp.D.rows());
    if (qp.F.rows() != n || qp.F.cols() != n || qp.A.cols() != n ||
        (md > 0 && qp.D.cols() != n) || qp.b.size() != ma || qp.e.size() != md)
        throw std::invalid_argument("solve: inconsistent problem dimensions");
    if (n == 0) throw std::invalid_argument("solve: empty problem");

    // Scale the data. All iterations run on the scaled problem; the reported
    // solution and objective are mapped back to the original data.
    SpMat as = qp.A, ds = qp.D;
    Scaling sc = ruiz_equilibrate(as, ds, 15);
    Vec bs = sc.row_a.asDiagonal() * qp.b;
    Vec es = sc.row_d.asDiagonal() * qp.e;
    // Global primal magnitude: bring the right-hand sides to unit size so the
    // iterates stay near 1 and the complementarity products stay comparable.
    const double beta =
        std::max({1.0, bs.size() ? bs.lpNorm<Eigen::Infinity>() : 0.0,
                  es.size() ? es.lpNorm<Eigen::Infinity>() : 0.0});
    bs /= beta;
    es /= beta;
    SpMat fs = qp.F;
    for (int c = 0; c < fs.outerSize(); ++c)
        for (SpMat::InnerIterator it(fs, c); it; ++it)
            it.valueRef() *= beta * beta * sc.col(it.row()) * sc.col(c);
    Vec fls = beta * (sc.col.asDiagonal() * qp.f);
    double fmax = 0.0;
    for (int c = 0; c < fs.outerSize(); ++c)
        for (SpMat::InnerIterator it(fs, c); it; ++it)
            fmax = std::max(fmax, std::abs(it.value()));
    sc.gamma = 1.0 / std::max({1.0, fls.lpNorm<Eigen::Infinity>(), fmax});
    fs *= sc.gamma;
    fls *= sc.gamma;

    // Constant lower-triangle skeleton of the KKT matrix
    //   [ H    .        .          ]      H = 2F + X^-1 Z + dp I
    //   [ A   -d I      .          ]
    //   [ D    .       -(W^-1 S + d I) ]
    const int dim = n + ma + md;
    std::vector<Triplet> skeleton;
    skeleton.reserve(fs.nonZeros() + as.nonZeros() + ds.nonZeros() + dim);
    for (int c = 0; c < fs.outerSize(); ++c)
        for (SpMat::InnerIterator it(fs, c); it; ++it)
            if (it.row() >= c) skeleton.emplace_back(it.row(), c, 2.0 * it.value());
    for (int c = 0; c < as.outerSize(); ++c)
        for (SpMat::InnerIterator it(as, c); it; ++it)
            skeleton.emplace_back(n + static_cast<int>(it.row()), c, it.value());
    for (int c = 0; c < ds.outerSize(); ++c)
        for (SpMat::InnerIterator it(ds, c); it; ++it)
            skeleton.emplace_back(n + ma + static_cast<int>(it.row()), c, it.value());

    double delta = settings.regularization;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    bool analyzed = false;
    SpMat kkt(dim, dim);

    auto factorize = [&](const Vec& x, const Vec& z, const Vec& s, const Vec& w,
                         double dp) -> bool {
        std::vector<Triplet> trip = skeleton;
        for (int i = 0; i < n; ++i) trip.emplace_back(i, i, z(i) / x(i) + dp);
        for (int i = 0; i < ma; ++i) trip.emplace_back(n + i, n + i, -delta);
        for (int i = 0; i < md; ++i)
            trip.emplace_back(n + ma + i, n + ma + i, -(s(i) / w(i) + delta));
        kkt.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            ldlt.analyzePattern(kkt);
            analyzed = true;
        }
        ldlt.factorize(kkt);
        return ldlt.info() == Eigen::Success;
    };

    // Solve against the factorization, then refine toward the system the
    // regularization only approximates: the residual is evaluated with the
    // delta terms backed out again, so each correction pushes the direction
    // toward the true Newton system and the perturbation never surfaces in
    // the outer residuals. Redundant equality rows leave delta as the only
    // pivot on their subspace; their direction component stays at harmless
    // roundoff-over-delta size because consistent rows put nothing there.
    auto solve_kkt = [&](const Vec& rhs) -> Vec {
        Vec dir = ldlt.solve(rhs);
        const double base = 1.0 + rhs.lpNorm<Eigen::Infinity>();
        double rn = 0.0;
        for (int pass = 0; pass < 4; ++pass) {
            Vec res = rhs - kkt.selfadjointView<Eigen::Lower>() * dir;
            res.head(n) += delta * dir.head(n);
            res.segment(n, ma) -= delta * dir.segment(n, ma);
            if (md > 0) res.tail(md) -= delta * dir.tail(md);
            rn = res.lpNorm<Eigen::Infinity>();
            if (rn <= 1e-13 * base) break;
            dir += ldlt.solve(res);
        }
        return dir;
    };

    Vec x = Vec::Ones(n), z = Vec::Ones(n);
    Vec y = Vec::Zero(ma);
    Vec s = Vec::Ones(md), w = Vec::Ones(md);

    // Starting point in the least-squares style: one solve with the unit
    // scaling matrix places the iterate near the constraint manifold, then
    // both pairs are shifted into the positive orthant. Multi-period
    // equality chains are badly conditioned along their slow modes, and a
    // start that already satisfies them keeps the first Newton directions
    // small enough to take useful steps.
    if (factorize(x, z, s, w, delta)) {
        Vec rhs0(dim);
        rhs0.head(n) = -fls;
        rhs0.segment(n, ma) = bs;
        if (md > 0) rhs0.tail(md) = es;
        Vec sol0 = solve_kkt(rhs0);
        Vec xt = sol0.head(n);
        Vec zt = -xt;
        auto shift_pair = [](Vec& a, Vec& bvec) {
            double da = std::max(-1.5 * a.minCoeff(), 0.0);
            double db = std::max(-1.5 * bvec.minCoeff(), 0.0);
            a.array() += da;
            bvec.array() += db;
            double dot = a.dot(bvec);
            double sa = bvec.sum(), sb = a.sum();
            double ea = sa > 0 ? 0.5 * dot / sa : 1.0;
            double eb = sb > 0 ? 0.5 * dot / sb : 1.0;
            a.array() += ea > 0 ? ea : 1.0;
            bvec.array() += eb > 0 ? eb : 1.0;
        };
        shift_pair(xt, zt);
        bool usable = xt.allFinite() && zt.allFinite() && xt.minCoeff() > 0.0 &&
                      zt.minCoeff() > 0.0;
        Vec st, wt;
        if (md > 0) {
            st = es - ds * sol0.head(n);
            wt = -sol0.tail(md);
            shift_pair(st, wt);
            usable = usable && st.allFinite() && wt.allFinite() &&
                     st.minCoeff() > 0.0 && wt.minCoeff() > 0.0;
        }
        if (usable) {
            x = xt;
            z = zt;
            y = sol0.segment(n, ma);
            if (md > 0) {
                s = st;
                w = wt;
            }
        }
    }

    Solution out;
    out.x = Vec::Zero(n);
    double mu = 1.0, rp = 0.0, rd = 0.0;
    bool converged = false;
    int iter = 0;

    // Best iterate so far, by the worst of the three convergence measures.
    // A tolerance below what the regularization floor supports would
    // otherwise iterate until the complementarity products underflow, the
    // scaling matrix breaks down, and the last iterate is garbage. Keeping
    // the best point makes the unconverged answer still usable, and the
    // stall counter stops the loop once meaningful progress has ended.
    double best_merit = std::numeric_limits<double>::infinity();
    Vec best_x = x, best_z = z, best_s = s, best_w = w;
    double best_mu = mu, best_rd = rd;
    int stalled = 0;

    const double bnorm = 1.0 + std::max(bs.size() ? bs.lpNorm<Eigen::Infinity>() : 0.0,
                                        es.size() ? es.lpNorm<Eigen::Infinity>() : 0.0);
    const double fnorm = 1.0 + fls.lpNorm<Eigen::Infinity>();

    for (; iter < settings.max_iter; ++iter) {
        Vec rdv = 2.0 * (fs * x) + fls + as.transpose() * y - z;
        if (md > 0) rdv += ds.transpose() * w;
        Vec rpa = as * x - bs;
        Vec ri = md > 0 ? Vec(ds * x + s - es) : Vec();
        mu = (x.dot(z) + (md > 0 ? s.dot(w) : 0.0)) / double(n + md);
        rp = rpa.size() ? rpa.lpNorm<Eigen::Infinity>() : 0.0;
        if (md > 0) rp = std::max(rp, ri.lpNorm<Eigen::Infinity>());
        rp /= bnorm;
        rd = rdv.lpNorm<Eigen::Infinity>() / fnorm;

        if (settings.verbose)
            std::fprintf(stderr, "iter %3d  mu %9.2e  rp %9.2e  rd %9.2e  delta %7.1e\n",
                         iter, mu, rp, rd, delta);

        const double merit = std::max({mu, rp, rd});
        if (merit < 0.99 * best_merit) {
            best_merit = merit;
            best_x = x;
            best_z = z;
            best_s = s;
            best_w = w;
            best_mu = mu;
            best_rd = rd;
            stalled = 0;
        } else if (++stalled >= 15) {
            out.note = "progress stalled before the requested tolerance; "
                       "returning the best iterate";
            break;
        }

        if (mu <= settings.tol && rp <= settings.tol && rd <= settings.tol) {
            converged = true;
            break;
        }
        if (!std::isfinite(mu) || !std::isfinite(rp) || !std::isfinite(rd) ||
            x.lpNorm<Eigen::Infinity>() > 1e14 || z.lpNorm<Eigen::Infinity>() > 1e14) {
            out.status = SolveStatus::Infeasible;
            out.note = "iterates diverged";
            break;
        }
        if (mu <= 1e-12 && rp > 100.0 * settings.tol) {
            out.status = SolveStatus::Infeasible;
            out.note = "complementarity vanished with a stalled primal residual";
            break;
        }

        bool ok = false;
        for (int attempt = 0; attempt < 6 && !ok; ++attempt) {
            ok = factorize(x, z, s, w, delta);
            if (!ok) delta *= 100.0;
        }
        if (!ok) {
            out.status = SolveStatus::MaxIterations;
            out.note = "KKT factorization failed";
            break;
        }

        // predictor
        Vec rcx = -(x.array() * z.array()).matrix();
        Vec rcs = md > 0 ? Vec(-(s.array() * w.array()).matrix()) : Vec();
        Vec rhs(dim);
        rhs.head(n) = -rdv + (rcx.array() / x.array()).matrix();
        rhs.segment(n, ma) = -rpa;
        if (md > 0) rhs.tail(md) = -ri - (rcs.array() / w.array()).matrix();
        Vec dir = solve_kkt(rhs);
        Vec dx = dir.head(n);
        Vec dw = md > 0 ? Vec(dir.tail(md)) : Vec();
        Vec dz = ((rcx - (z.array() * dx.array()).matrix()).array() / x.array()).matrix();
        Vec dsv = md > 0
                      ? Vec(((rcs - (s.array() * dw.array()).matrix()).array() / w.array())
                                .matrix())
                      : Vec();

        double ap = max_step(x, dx);
        if (md > 0) ap = std::min(ap, max_step(s, dsv));
        double ad = max_step(z, dz);
        if (md > 0) ad = std::min(ad, max_step(w, dw));
        double mu_aff = ((x + ap * dx).dot(z + ad * dz) +
                         (md > 0 ? (s + ap * dsv).dot(w + ad * dw) : 0.0)) /
                        double(n + md);
        double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

        // corrector reuses the factorization with an updated right side
        rcx = (sigma * mu - (x.array() * z.array()) - (dx.array() * dz.array()))
                  .matrix();
        if (md > 0)
            rcs = (sigma * mu - (s.array() * w.array()) - (dsv.array() * dw.array()))
                      .matrix();
        rhs.head(n) = -rdv + (rcx.array() / x.array()).matrix();
        rhs.segment(n, ma) = -rpa;
        if (md > 0) rhs.tail(md) = -ri - (rcs.array() / w.array()).matrix();
        dir = solve_kkt(rhs);
        dx = dir.head(n);
        Vec dy = dir.segment(n, ma);
        if (md > 0) dw = dir.tail(md);
        dz = ((rcx - (z.array() * dx.array()).matrix()).array() / x.array()).matrix();
        if (md > 0)
            dsv = ((rcs - (s.array() * dw.array()).matrix()).array() / w.array())
                      .matrix();

        const double fraction = 0.995;
        ap = std::min(1.0, fraction * max_step(x, dx));
        if (md > 0) ap = std::min(ap, fraction * max_step(s, dsv));
        ad = std::min(1.0, fraction * max_step(z, dz));
        if (md > 0) ad = std::min(ad, fraction * max_step(w, dw));

        x += ap * dx;
        z += ad * dz;
        y += ad * dy;
        if (md > 0) {
            s += ap * dsv;
            w += ad * dw;
        }
    }

    out.iterations = iter;
    // An unconverged exit hands back the best iterate instead of the last
    // one; the two coincide on a converged exit because every measure is at
    // its minimum there.
    const bool use_best = !converged && std::isfinite(best_merit);
    const Vec& fx = use_best ? best_x : x;
    const Vec& fz = use_best ? best_z : z;
    const Vec& fsl = use_best ? best_s : s;
    const Vec& fw = use_best ? best_w : w;
    out.gap = use_best ? best_mu : mu;
    out.dual_residual = use_best ? best_rd : rd;
    if (converged) out.status = SolveStatus::Optimal;
    else if (out.note.empty() && out.status == SolveStatus::MaxIterations)
        out.note = "iteration limit reached";

    Vec x_orig = beta * (sc.col.asDiagonal() * fx);

    // Active-set polish: pin variables and inequality rows that the interior
    // point drove to their bounds, then solve the equality-constrained
    // problem with two iterative refinement passes. Accepted only when it
    // improves the residuals on the original data. Also applied to an
    // unconverged exit whose best iterate got close enough for the bound
    // split to be trustworthy.
    const double polish_merit = use_best ? best_merit : std::max({mu, rp, rd});
    if (settings.polish && (converged || polish_merit <= 1e-6)) {
        std::vector<int> free_idx;
        free_idx.reserve(n);
        std::vector<int> pos_of(n, -1);
        for (int i = 0; i < n; ++i)
            if (fx(i) >= fz(i)) {
                pos_of[i] = static_cast<int>(free_idx.size());
                free_idx.push_back(i);
            }
        std::vector<int> act;
        for (int j = 0; j < md; ++j)
            if (fsl(j) < fw(j)) act.push_back(j);

        const int nf = static_cast<int>(free_idx.size());
        const int mrows = ma + static_cast<int>(act.size());
        const int pdim = nf + mrows;
        std::vector<Triplet> trip;
        for (int c = 0; c < fs.outerSize(); ++c)
            for (SpMat::InnerIterator it(fs, c); it; ++it) {
                int rI = pos_of[static_cast<int>(it.row())], cI = pos_of[c];
                if (rI >= 0 && cI >= 0 && rI >= cI)
                    trip.emplace_back(rI, cI, 2.0 * it.value());
            }
        double dp = settings.regularization;
        for (int i = 0; i < nf; ++i) trip.emplace_back(i, i, dp);
        for (int c = 0; c < as.outerSize(); ++c)
            for (SpMat::InnerIterator it(as, c); it; ++it)
                if (pos_of[c] >= 0)
                    trip.emplace_back(nf + static_cast<int>(it.row()), pos_of[c],
                                      it.value());
        std::vector<int> row_of_d(md, -1);
        for (int k = 0; k < static_cast<int>(act.size()); ++k)
            row_of_d[act[k]] = nf + ma + k;
        for (int c = 0; c < ds.outerSize(); ++c)
            for (SpMat::InnerIterator it(ds, c); it; ++it)
                if (row_of_d[it.row()] >= 0 && pos_of[c] >= 0)
                    trip.emplace_back(row_of_d[it.row()], pos_of[c], it.value());
        for (int i = 0; i < mrows; ++i) trip.emplace_back(nf + i, nf + i, -dp);

        SpMat kp(pdim, pdim);
        kp.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLDLT<SpMat, Eigen::Lower> pf;
        pf.compute(kp);
        if (pf.info() == Eigen::Success) {
            Vec fhat(nf);
            for (int i = 0; i < nf; ++i) fhat(i) = fls(free_idx[i]);
            Vec bhat(mrows);
            bhat.head(ma) = bs;
            for (int k = 0; k < static_cast<int>(act.size()); ++k)
                bhat(ma + k) = es(act[k]);

            // gather the free columns of the scaled constraints and costs
            auto residual = [&](const Vec& xf, const Vec& lam) {
                Vec full = Vec::Zero(n);
                for (int i = 0; i < nf; ++i) full(free_idx[i]) = xf(i);
                Vec grad = 2.0 * (fs * full) + fls;
                Vec r(pdim);
                Vec atl = as.transpose() * lam.head(ma);
                Vec dtl = Vec::Zero(n);
                if (!act.empty()) {
                    Vec lam_d = Vec::Zero(md);
                    for (int k = 0; k < static_cast<int>(act.size()); ++k)
                        lam_d(act[k]) = lam(ma + k);
                    dtl = ds.transpose() * lam_d;
                }
                for (int i = 0; i < nf; ++i)
                    r(i) = -grad(free_idx[i]) - atl(free_idx[i]) - dtl(free_idx[i]);
                Vec ax = as * full;
                for (int i = 0; i < ma; ++i) r(nf + i) = bs(i) - ax(i);
                if (!act.empty()) {
                    Vec dxv = ds * full;
                    for (int k = 0; k < static_cast<int>(act.size()); ++k)
                        r(nf + ma + k) = es(act[k]) - dxv(act[k]);
                }
                return r;
            };

            Vec rhs0(pdim);
            rhs0.head(nf) = -fhat;
            rhs0.tail(mrows) = bhat;
            Vec sol = pf.solve(rhs0);
            Vec xf = sol.head(nf), lam = sol.tail(mrows);
            for (int pass = 0; pass < 2; ++pass) {
                Vec corr = pf.solve(residual(xf, lam));
                xf += corr.head(nf);
                lam += corr.tail(mrows);
            }
            Vec cand = Vec::Zero(n);
            bool sane = true;
            for (int i = 0; i < nf; ++i) {
                double v = xf(i);
                if (v < -1e-7) sane = false;
                cand(free_idx[i]) = std::max(v, 0.0);
            }
            if (sane) {
                Vec cand_orig = beta * (sc.col.asDiagonal() * cand);
                // Scores below the data's rounding floor are ties; without
                // the floor a hyper-converged iterate could veto a candidate
                // over noise-level feasibility while the candidate centers
                // the ridge-only coordinates far better.
                const double floor_ =
                    1e-12 *
                    (1.0 + std::max(qp.b.size() ? qp.b.lpNorm<Eigen::Infinity>() : 0.0,
                                    qp.e.size() ? qp.e.lpNorm<Eigen::Infinity>() : 0.0));
                if (std::max(score_original(qp, cand_orig).worst(), floor_) <=
                    std::max(score_original(qp, x_orig).worst(), floor_)) {
                    x_orig = cand_orig;
                    out.polished = true;
                }
            }
        }
    }

    out.x = x_orig;
    out.objective = x_orig.dot(qp.F * x_orig) + qp.f.dot(x_orig);
    out.primal_residual = ma > 0 ? (qp.A * x_orig - qp.b).lpNorm<Eigen::Infinity>() : 0.0;
    return out;
}

} // namespace hfn
