#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hfn/model_io.hpp"
#include "hfn/petri.hpp"
#include "hfn/qp.hpp"

using namespace hfn;

namespace {

PlaceTransitionNet net_from(int places, int transitions,
                            const std::vector<Triplet>& minus,
                            const std::vector<Triplet>& plus) {
    PlaceTransitionNet net;
    net.m_minus.resize(places, transitions);
    net.m_minus.setFromTriplets(minus.begin(), minus.end());
    net.m_plus.resize(places, transitions);
    net.m_plus.setFromTriplets(plus.begin(), plus.end());
    net.durations.assign(transitions, 0);
    return net;
}

// Random sparse net + vectors for the property suites. Sizes stay small so a
// thousand cases run fast; the stepping rule is dimension-independent.
struct RandomCase {
    PlaceTransitionNet net;
    Vec q_b, q_e, u1_minus, u1_plus, u2_minus, u2_plus;
};

RandomCase random_case(std::mt19937& rng) {
    std::uniform_int_distribution<int> size_dist(1, 6);
    std::uniform_real_distribution<double> weight(0.1, 3.0);
    std::uniform_real_distribution<double> amount(0.0, 2.0);
    std::bernoulli_distribution arc(0.4);

    RandomCase c;
    int p = size_dist(rng), t = size_dist(rng);
    std::vector<Triplet> minus, plus;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < t; ++j) {
            if (arc(rng)) minus.emplace_back(i, j, weight(rng));
            if (arc(rng)) plus.emplace_back(i, j, weight(rng));
        }
    c.net = net_from(p, t, minus, plus);
    auto rand_vec = [&](int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = amount(rng);
        return v;
    };
    c.q_b = rand_vec(p).array() + 10.0; // headroom so markings stay valid
    c.q_e = rand_vec(t).array() + 10.0;
    c.u1_minus = rand_vec(t);
    c.u1_plus = rand_vec(t);
    c.u2_minus = rand_vec(t);
    c.u2_plus = rand_vec(t);
    return c;
}

} // namespace

TEST_CASE("bags behave like non-negative multisets") {
    Bag a;
    a.set(0, 2.0);
    a.set(3, 1.5);
    CHECK(a.count(0) == 2.0);
    CHECK(a.count(1) == 0.0);
    CHECK(a.total() == doctest::Approx(3.5));

    Bag b;
    b.set(0, 0.5);
    a -= b;
    CHECK(a.count(0) == doctest::Approx(1.5));
    a += b;
    CHECK(a.count(0) == doctest::Approx(2.0));

    Bag big;
    big.set(3, 99.0);
    CHECK_THROWS(a -= big);

    Bag half = a.scaled(0.5);
    CHECK(half.count(0) == doctest::Approx(1.0));
    CHECK(half.count(3) == doctest::Approx(0.75));
}

TEST_CASE("one step moves tokens between places and transitions") {
    SUBCASE("a started firing parks its token inside the transition") {
        PlaceTransitionNet net = net_from(1, 1, {{0, 0, 1.0}}, {{0, 0, 1.0}});
        Vec qb(1), qe(1);
        qb << 1.0;
        qe << 0.0;
        Vec um(1), up(1);
        um << 1.0;
        up << 0.0;
        step_ptn(net, um, up, qb, qe);
        CHECK(qb(0) == doctest::Approx(0.0));
        CHECK(qe(0) == doctest::Approx(1.0));
    }
    SUBCASE("zero firings leave the marking untouched") {
        PlaceTransitionNet net = net_from(2, 1, {{0, 0, 1.0}}, {{1, 0, 1.0}});
        Vec qb(2), qe(1);
        qb << 3.0, 4.0;
        qe << 0.5;
        step_ptn(net, Vec::Zero(1), Vec::Zero(1), qb, qe);
        CHECK(qb(0) == 3.0);
        CHECK(qb(1) == 4.0);
        CHECK(qe(0) == 0.5);
    }
    SUBCASE("half a token moves through a two-place chain") {
        PlaceTransitionNet net = net_from(2, 1, {{0, 0, 1.0}}, {{1, 0, 1.0}});
        Vec qb(2), qe(1);
        qb << 1.0, 0.0;
        qe << 0.0;
        Vec u(1);
        u << 0.5;
        step_ptn(net, u, u, qb, qe);
        CHECK(qb(0) == doctest::Approx(0.5));
        CHECK(qb(1) == doctest::Approx(0.5));
        CHECK(qe(0) == doctest::Approx(0.0));
    }
    SUBCASE("dimension mismatches throw") {
        PlaceTransitionNet net = net_from(1, 1, {}, {});
        Vec qb(1), qe(1);
        qb << 0.0;
        qe << 0.0;
        CHECK_THROWS(step_ptn(net, Vec::Zero(2), Vec::Zero(1), qb, qe));
    }
}

TEST_CASE("duration checking pairs completions with shifted starts") {
    auto schedule = [](std::vector<std::vector<double>> um,
                       std::vector<std::vector<double>> up) {
        FiringSchedule s;
        for (auto& v : um) s.u_minus.push_back(Eigen::Map<Vec>(v.data(), v.size()));
        for (auto& v : up) s.u_plus.push_back(Eigen::Map<Vec>(v.data(), v.size()));
        return s;
    };
    SUBCASE("instant transitions with equal vectors are clean") {
        auto s = schedule({{1.0}, {2.0}}, {{1.0}, {2.0}});
        CHECK(check_duration(s, {0}).empty());
    }
    SUBCASE("a one-step duration shifts the match") {
        auto s = schedule({{2.0}, {0.0}}, {{0.0}, {2.0}});
        CHECK(check_duration(s, {1}).empty());
    }
    SUBCASE("a dropped completion is reported where it should have landed") {
        auto s = schedule({{1.0}, {0.0}, {0.0}}, {{0.0}, {0.0}, {0.0}});
        auto v = check_duration(s, {2});
        REQUIRE(v.size() == 1);
        CHECK(v[0].transition == 0);
        CHECK(v[0].step == 2); // start at 0 plus two holding steps
        CHECK(v[0].expected == doctest::Approx(1.0));
        CHECK(v[0].actual == doctest::Approx(0.0));
    }
    SUBCASE("completions inside the warm-up window are impossible") {
        auto s = schedule({{0.0}, {0.0}}, {{1.0}, {0.0}});
        CHECK_FALSE(check_duration(s, {1}).empty());
    }
}

TEST_CASE("color splitting keeps transitions and splits places per color") {
    SUBCASE("a single color net is isomorphic to its input") {
        ACColoredPetriNet net;
        net.colors = 1;
        net.places = 2;
        net.incidence.minus.operands = net.incidence.plus.operands = 1;
        net.incidence.minus.buffers = net.incidence.plus.buffers = 2;
        net.incidence.minus.capabilities = net.incidence.plus.capabilities = 1;
        net.incidence.minus.entries.push_back({0, 0, 0, 1.0});
        net.incidence.plus.entries.push_back({0, 1, 0, 1.0});
        net.durations = {3};
        net.place_marking.resize(2);
        net.place_marking[0].set(0, 2.0);
        net.transition_marking = {0.25};
        PlaceTransitionNet pn = accpn_to_ptn(net);
        CHECK(pn.places() == 2);
        CHECK(pn.transitions() == 1);
        CHECK(pn.m_minus.coeff(0, 0) == 1.0);
        CHECK(pn.m_plus.coeff(1, 0) == 1.0);
        CHECK(pn.durations == std::vector<int>{3});
        Vec q = vectorize_marking(net);
        CHECK(q(0) == 2.0);
        CHECK(q(1) == 0.0);
    }
    SUBCASE("two colors on one place split into two rows") {
        ACColoredPetriNet net;
        net.colors = 2;
        net.places = 1;
        net.incidence.minus.operands = net.incidence.plus.operands = 2;
        net.incidence.minus.buffers = net.incidence.plus.buffers = 1;
        net.incidence.minus.capabilities = net.incidence.plus.capabilities = 1;
        net.incidence.minus.entries.push_back({0, 0, 0, 1.0}); // consumes color 0
        net.durations = {0};
        net.place_marking.resize(1);
        net.transition_marking = {0.0};
        PlaceTransitionNet pn = accpn_to_ptn(net);
        CHECK(pn.places() == 2);
        CHECK(pn.m_minus.coeff(0, 0) == 1.0);
        CHECK(pn.m_minus.coeff(1, 0) == 0.0);
        CHECK(pn.m_plus.nonZeros() == 0);
    }
}

TEST_CASE("simulation replays a schedule and flags overdraws") {
    PlaceTransitionNet net = net_from(2, 1, {{0, 0, 1.0}}, {{1, 0, 1.0}});
    SUBCASE("the zero schedule holds the marking constant") {
        FiringSchedule s;
        s.u_minus = {Vec::Zero(1), Vec::Zero(1)};
        s.u_plus = {Vec::Zero(1), Vec::Zero(1)};
        Vec qb(2);
        qb << 1.5, 0.5;
        Trajectory t = simulate(net, s, qb, Vec::Zero(1));
        REQUIRE(t.q_b.size() == 3);
        CHECK_FALSE(t.violation.has_value());
        for (const Vec& q : t.q_b) CHECK((q - qb).lpNorm<Eigen::Infinity>() == 0.0);
    }
    SUBCASE("overdrawing a place is reported at the failing step") {
        FiringSchedule s;
        Vec u(1);
        u << 2.0;
        s.u_minus = {u};
        s.u_plus = {u};
        Trajectory t = simulate(net, s, Vec::Ones(2), Vec::Zero(1));
        REQUIRE(t.violation.has_value());
        CHECK(t.violation->step == 1); // the post-state of the first update
        CHECK(t.violation->index == 0);
        CHECK_FALSE(t.violation->in_transition);
        CHECK(t.violation->value == doctest::Approx(-1.0));
    }
}

TEST_CASE("stepping is linear in the firing vectors (1200 random cases)") {
    std::mt19937 rng(987654321u);
    std::uniform_real_distribution<double> coeff(0.0, 2.0);
    for (int trial = 0; trial < 1200; ++trial) {
        RandomCase c = random_case(rng);
        double a = coeff(rng), b = coeff(rng);

        Vec qb1 = c.q_b, qe1 = c.q_e;
        step_ptn(c.net, c.u1_minus, c.u1_plus, qb1, qe1);
        Vec qb2 = c.q_b, qe2 = c.q_e;
        step_ptn(c.net, c.u2_minus, c.u2_plus, qb2, qe2);

        Vec qb3 = c.q_b, qe3 = c.q_e;
        step_ptn(c.net, a * c.u1_minus + b * c.u2_minus,
                 a * c.u1_plus + b * c.u2_plus, qb3, qe3);

        Vec qb_lin = c.q_b + a * (qb1 - c.q_b) + b * (qb2 - c.q_b);
        Vec qe_lin = c.q_e + a * (qe1 - c.q_e) + b * (qe2 - c.q_e);
        REQUIRE((qb3 - qb_lin).lpNorm<Eigen::Infinity>() < 1e-12);
        REQUIRE((qe3 - qe_lin).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("stepping conserves tokens against the arc weights (1200 random cases)") {
    std::mt19937 rng(246813579u);
    for (int trial = 0; trial < 1200; ++trial) {
        RandomCase c = random_case(rng);
        Vec qb = c.q_b, qe = c.q_e;
        step_ptn(c.net, c.u1_minus, c.u1_plus, qb, qe);

        // place-side change equals weighted inflow minus weighted outflow
        double delta_b = (qb - c.q_b).sum();
        Vec col_plus = Vec(c.net.m_plus.transpose() * Vec::Ones(c.net.places()));
        Vec col_minus = Vec(c.net.m_minus.transpose() * Vec::Ones(c.net.places()));
        double expected = col_plus.dot(c.u1_plus) - col_minus.dot(c.u1_minus);
        REQUIRE(delta_b == doctest::Approx(expected).epsilon(1e-12));

        // transition-side change equals starts minus completions
        double delta_e = (qe - c.q_e).sum();
        REQUIRE(delta_e ==
                doctest::Approx(c.u1_minus.sum() - c.u1_plus.sum()).epsilon(1e-12));
    }
}

TEST_CASE("fixture network splits into the expected flat net") {
    static ParsedModel pm = load_model(std::string(HFN_FIXTURE_DIR) + "/h2ng.model");
    REQUIRE(pm.ok());
    const SystemModel& m = *pm.model;
    IncidencePair binary =
        build_incidence_tensors(m.capabilities, m.operand_count(), m.buffer_count());
    IncidencePair fine =
        refine_with_device_models(binary, m.device_plus, m.device_minus, m.pmap);

    ACColoredPetriNet cn;
    cn.colors = m.operand_count();
    cn.places = m.buffer_count();
    cn.incidence = fine;
    cn.durations.resize(m.capability_count());
    for (int i = 0; i < m.capability_count(); ++i)
        cn.durations[i] = m.capabilities[i].duration;
    cn.place_marking.resize(cn.places);
    cn.transition_marking.assign(m.capability_count(), 0.0);

    PlaceTransitionNet pn = accpn_to_ptn(cn);
    CHECK(pn.places() == 80);
    CHECK(pn.transitions() == 61);
    CHECK(static_cast<int>(pn.m_plus.nonZeros() + pn.m_minus.nonZeros()) == 122);
    // splitting preserves total arc weight
    double tensor_weight = 0.0;
    for (const auto& e : fine.plus.entries) tensor_weight += e.weight;
    for (const auto& e : fine.minus.entries) tensor_weight += e.weight;
    double matrix_weight = pn.m_plus.sum() + pn.m_minus.sum();
    CHECK(matrix_weight == doctest::Approx(tensor_weight).epsilon(1e-12));
}

TEST_CASE("exports produce readable artifacts") {
    PlaceTransitionNet net = net_from(2, 1, {{0, 0, 1.0}}, {{1, 0, 1.0}});
    std::string dot = to_dot(net, {"src", "dst"}, {"move"});
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("src") != std::string::npos);
    CHECK(dot.find("move") != std::string::npos);

    FiringSchedule s;
    Vec u(1);
    u << 1.0;
    s.u_minus = {u};
    s.u_plus = {u};
    Trajectory t = simulate(net, s, Vec::Ones(2), Vec::Zero(1));
    std::string csv = trajectory_csv(t);
    CHECK(csv.find("step") != std::string::npos);
    CHECK(csv.find("place") != std::string::npos);
}
