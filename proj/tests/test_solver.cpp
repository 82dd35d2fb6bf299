#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "dense_oracle.hpp"
#include "hfn/model_io.hpp"
#include "hfn/qp.hpp"
#include "hfn/solver.hpp"
#include "hfn/verify.hpp"
#include "toy_model.hpp"

using namespace hfn;

namespace {

const SystemModel& fixture() {
    static ParsedModel pm = load_model(std::string(HFN_FIXTURE_DIR) + "/h2ng.model");
    REQUIRE(pm.ok());
    return *pm.model;
}

ScenarioSpec fixture_scenario(const std::string& name) {
    ParsedScenario ps =
        load_scenario(std::string(HFN_FIXTURE_DIR) + "/" + name, fixture());
    REQUIRE(ps.ok());
    return *ps.scenario;
}

double total_start(const Solution& sol, const DecisionVectorLayout& l, int cap) {
    double total = 0.0;
    for (int t = 0; t < l.K; ++t) total += sol.x(l.um(t, cap));
    return total;
}

} // namespace

TEST_CASE("interior point matches the dense reference on the small program") {
    toy::Toy t = toy::build();
    QPProblem qp = t.assemble();

    Vec x_ref = toy::dense_bound_qp(qp);
    // the reference must land on the hand-derived optimum
    Vec x_hand = toy::expected_optimum(t.layout);
    REQUIRE((x_ref - x_hand).lpNorm<Eigen::Infinity>() < 1e-9);
    // the capacity rows stay slack, so leaving D out of the reference is sound
    REQUIRE((qp.D * x_ref - qp.e).maxCoeff() < -1.0);

    Solution sol = solve(qp);
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(sol.polished);
    CHECK((sol.x - x_ref).lpNorm<Eigen::Infinity>() < 1e-8);
    double obj_ref = x_ref.dot(Vec(qp.F * x_ref)) + qp.f.dot(x_ref);
    CHECK(sol.objective == doctest::Approx(obj_ref).epsilon(1e-8));
}

TEST_CASE("an unreachable tolerance still returns the best point found") {
    // variant pool that keeps the borrowed tokens: the in-service marking's
    // ridge minimum turns negative, its bound binds at the ridge scale, and
    // the dual residual floors near the regularization level, far above the
    // requested tolerance
    toy::Toy t = toy::build();
    t.services.lambda_plus.setZero();
    t.services.lambda_plus.coeffRef(0, toy::kMove) = 1.0;
    t.conditions.final_qsl = Vec::Constant(1, 2.0);
    QPProblem qp = t.assemble();

    SolverSettings st;
    st.tol = 1e-10;
    Solution sol = solve(qp, st);
    // the run must refuse to certify, name the reason, and still hand back
    // its best iterate instead of whatever the stalled loop ended on
    CHECK(sol.status == SolveStatus::MaxIterations);
    CHECK(!sol.note.empty());
    CHECK(sol.primal_residual < 1e-8);
    CHECK(sol.x.minCoeff() > -1e-8);
    const DecisionVectorLayout& l = t.layout;
    CHECK(sol.x(l.um(0, toy::kMove)) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(sol.x(l.um(0, toy::kConsume)) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(sol.objective == doctest::Approx(9.09).epsilon(1e-6));
}

TEST_CASE("solution reports carry the exit state") {
    toy::Toy t = toy::build();
    QPProblem qp = t.assemble();
    Solution sol = solve(qp);
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(sol.iterations > 0);
    CHECK(sol.primal_residual < 1e-6);
    CHECK(sol.x.minCoeff() >= 0.0);
    CHECK(std::string(to_string(SolveStatus::Optimal)) == "optimal");
}

TEST_CASE("contradictory pins never come back optimal") {
    toy::Toy t = toy::build();
    // a second demand pin on the same capability and step, different value
    BoundaryData::Pin clash;
    clash.capability = toy::kConsume;
    clash.series = Vec::Constant(1, 4.0);
    t.boundary.demands.push_back(clash);
    QPProblem qp = t.assemble();
    Solution sol = solve(qp);
    CHECK(sol.status != SolveStatus::Optimal);
}

TEST_CASE("zero demand solves to the zero flow") {
    CompiledProblem p = compile(fixture(), fixture_scenario("zero_demand.scn"));
    Solution sol = solve(p.qp);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.objective) <= 1.0);
    CHECK(sol.x.lpNorm<Eigen::Infinity>() <= 1e-2);
    VerificationReport rep = verify(sol.x, p);
    CHECK(rep.ok(1e-6));
}

TEST_CASE("raising one import price moves the cost by exactly its usage band") {
    const SystemModel& m = fixture();
    ScenarioSpec s1 = fixture_scenario("scenario1.scn");
    CompiledProblem base = compile(m, s1);
    Solution bs = solve(base.qp);
    REQUIRE(bs.status == SolveStatus::Optimal);

    int ng = m.find_capability("imp_ng_n6");
    REQUIRE(ng >= 0);
    double used_base = total_start(bs, base.qp.layout, ng);
    REQUIRE(used_base > 100.0); // the gas import is a main supply path

    SystemModel bumped = m;
    bumped.capabilities[ng].linear_cost += 10.0;
    CompiledProblem pert = compile(bumped, s1);
    Solution ps = solve(pert.qp);
    REQUIRE(ps.status == SolveStatus::Optimal);
    double used_pert = total_start(ps, pert.qp.layout, ng);

    // each optimum is feasible in the other program, which sandwiches the
    // perturbed cost between the bump evaluated at either usage
    const double slack = 50.0; // solver tolerance on objectives of this size
    CHECK(ps.objective >= bs.objective + 10.0 * used_pert - slack);
    CHECK(ps.objective <= bs.objective + 10.0 * used_base + slack);
    CHECK(ps.objective > bs.objective + 1000.0);
}
