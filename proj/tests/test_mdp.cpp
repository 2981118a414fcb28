#include "fixtures.hpp"

#include "revar/mdp.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

using namespace revar;

namespace {

bool has_kind(const ValidationReport& report, ViolationKind kind) {
    return std::any_of(report.begin(), report.end(),
                       [&](const Violation& v) { return v.kind == kind; });
}

// Expected return by enumerating every (action, successor) path.
double enumerate_value(const MdpSpec& m, const TargetPolicy& pi, std::size_t s) {
    double v = 0.0;
    for (std::size_t a = 0; a < m.action_count; ++a) {
        double future = 0.0;
        for (const auto& next : m.successors(s, a)) {
            future += next.prob * enumerate_value(m, pi, next.state);
        }
        v += pi(s, a) * (m.reward_mean(s, a) + m.gamma * future);
    }
    return v;
}

} // namespace

TEST_CASE("validate accepts a well-formed two-level tree") {
    const auto env = fixtures::three_state_tree();
    CHECK(validate(env.mdp).empty());
    CHECK(validate(env.mdp, env.policy).empty());
}

TEST_CASE("validate reports a row summing to 0.9 with the offending pair") {
    auto env = fixtures::stochastic_tree(0.5, {{1, 1}, {1, 1}, {1, 1}, {1, 1}},
                                         {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    env.mdp.transitions[0][1].prob = 0.4;
    const auto report = validate(env.mdp);
    REQUIRE(report.size() == 1);
    CHECK(report[0].kind == ViolationKind::RowSum);
    CHECK(report[0].message.find("(s=0, a=0)") != std::string::npos);
}

TEST_CASE("validate flags gridworld labeled as a tree") {
    auto env = build_gridworld();
    CHECK(validate(env.mdp, env.policy).empty());
    env.mdp.structure = StructureKind::Tree;
    CHECK(has_kind(validate(env.mdp), ViolationKind::MultipleParents));

    // Independent scan: some state has two distinct (s, a) parents.
    std::map<std::size_t, int> parents;
    for (std::size_t s = 0; s < env.mdp.state_count(); ++s) {
        for (std::size_t a = 0; a < env.mdp.action_count; ++a) {
            for (const auto& n : env.mdp.successors(s, a)) {
                if (n.prob > 0.0) ++parents[n.state];
            }
        }
    }
    CHECK(std::any_of(parents.begin(), parents.end(), [](const auto& kv) { return kv.second > 1; }));
}

TEST_CASE("validate reports structural violations") {
    SUBCASE("negative probability") {
        auto env = fixtures::stochastic_tree(0.5, {{1, 1}, {1, 1}, {1, 1}, {1, 1}},
                                             {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
        env.mdp.transitions[0] = {{1, 1.5}, {2, -0.5}};
        CHECK(has_kind(validate(env.mdp), ViolationKind::NegativeProbability));
    }
    SUBCASE("leaf with outgoing transitions") {
        auto env = fixtures::three_state_tree();
        env.mdp.transitions[2] = {{1, 1.0}};
        CHECK(has_kind(validate(env.mdp), ViolationKind::LeafTransition));
    }
    SUBCASE("negative variance") {
        auto env = fixtures::three_state_tree();
        env.mdp.reward_var(1, 0) = -1.0;
        CHECK(has_kind(validate(env.mdp), ViolationKind::NegativeVariance));
    }
    SUBCASE("non-finite mean") {
        auto env = fixtures::three_state_tree();
        env.mdp.reward_mean(1, 0) = std::nan("");
        CHECK(has_kind(validate(env.mdp), ViolationKind::NonFinite));
    }
    SUBCASE("two roots") {
        auto env = fixtures::three_state_tree();
        env.mdp.states[1] = {1, 1};
        CHECK_FALSE(validate(env.mdp).empty());
    }
    SUBCASE("orphan state") {
        auto env = fixtures::three_state_tree();
        env.mdp.transitions[1] = {{1, 1.0}};
        CHECK(has_kind(validate(env.mdp), ViolationKind::Orphan));
    }
    SUBCASE("policy row") {
        auto env = fixtures::three_state_tree();
        env.policy.pi(0, 0) = 0.6;
        CHECK(validate(env.mdp).empty());
        CHECK(has_kind(validate(env.mdp, env.policy), ViolationKind::PolicyRow));
    }
    SUBCASE("dimension") {
        auto env = fixtures::three_state_tree();
        env.mdp.reward_var = SaTable(2, 2);
        CHECK(has_kind(validate(env.mdp), ViolationKind::Dimension));
    }
}

TEST_CASE("value_exact examples") {
    SUBCASE("weighted mean of a bandit") {
        const auto env = fixtures::bandit({0.5, 0.5}, {1, 1}, {2, 4});
        CHECK(value_exact(env.mdp, env.policy).root_value == doctest::Approx(3.0));
    }
    SUBCASE("unit means, two levels") {
        for (double p : {0.0, 0.3, 1.0}) {
            auto env = fixtures::two_level({{{1, 1}, {1, 1}, {1, 1}},
                                            {{p, 1 - p}, {0.2, 0.8}, {0.9, 0.1}},
                                            {{1, 1}, {1, 1}, {1, 1}},
                                            1.0});
            CHECK(value_exact(env.mdp, env.policy).root_value == doctest::Approx(2.0));
        }
    }
    SUBCASE("zero means") {
        const auto env = fixtures::three_state_tree();
        CHECK(value_exact(env.mdp, env.policy).root_value == 0.0);
    }
    SUBCASE("dimension mismatch") {
        auto env = fixtures::three_state_tree();
        env.policy.pi = SaTable(2, 2);
        CHECK_THROWS_AS(value_exact(env.mdp, env.policy), std::invalid_argument);
    }
}

TEST_CASE("value_exact matches path enumeration") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const auto env = fixtures::random_tree(3 + rep % 2, 2 + rep % 2, rng);
        const double expected = enumerate_value(env.mdp, env.policy, 0);
        CHECK(value_exact(env.mdp, env.policy).root_value == doctest::Approx(expected).epsilon(1e-12));
    }
    const auto grid = build_gridworld(0.2, 8);
    CHECK(value_exact(grid.mdp, grid.policy).root_value ==
          doctest::Approx(enumerate_value(grid.mdp, grid.policy, 0)).epsilon(1e-12));
    const auto dag = fixtures::small_dag();
    CHECK(value_exact(dag.mdp, dag.policy).root_value ==
          doctest::Approx(enumerate_value(dag.mdp, dag.policy, 0)).epsilon(1e-12));
}

TEST_CASE("value_exact is linear in the means and reduces at gamma 0") {
    std::mt19937_64 rng(5);
    auto env = fixtures::random_tree(4, 2, rng);
    const auto base = value_exact(env.mdp, env.policy);
    auto doubled = env;
    for (auto& x : doubled.mdp.reward_mean.data()) x *= 2.0;
    const auto twice = value_exact(doubled.mdp, doubled.policy);
    for (std::size_t s = 0; s < base.state_values.size(); ++s) {
        CHECK(twice.state_values[s] == doctest::Approx(2.0 * base.state_values[s]).epsilon(1e-12));
    }

    env.mdp.gamma = 0.0;
    double immediate = 0.0;
    for (std::size_t a = 0; a < env.mdp.action_count; ++a) {
        immediate += env.policy(0, a) * env.mdp.reward_mean(0, a);
    }
    CHECK(value_exact(env.mdp, env.policy).root_value == doctest::Approx(immediate).epsilon(1e-14));
}

TEST_CASE("build_tree4 shape") {
    const auto env = build_tree4();
    const auto& m = env.mdp;
    CHECK(m.state_count() == 15);
    CHECK(m.structure == StructureKind::Tree);
    CHECK(m.gamma == 1.0);
    for (int level = 1; level <= 4; ++level) {
        CHECK(states_at_level(m, level).size() == (std::size_t{1} << (level - 1)));
    }
    for (const auto& row : m.transitions) {
        for (const auto& n : row) CHECK((n.prob == 0.0 || n.prob == 1.0));
    }
    for (std::size_t s = 0; s < 15; ++s) {
        CHECK(env.policy(s, 0) == 0.95);
        CHECK(env.policy(s, 1) == 0.05);
        CHECK(m.reward_var(s, 0) == 0.01);
        CHECK(m.reward_var(s, 1) == 20.0);
    }
    CHECK(validate(m, env.policy).empty());
    CHECK(build_tree4() == env);
}

TEST_CASE("build_gridworld shape") {
    const auto env = build_gridworld(0.1, 8);
    const auto& m = env.mdp;
    CHECK(m.structure == StructureKind::Dag);
    CHECK(m.horizon == 8);
    CHECK(m.state_count() <= 8 * 16 + 1);
    for (std::size_t s = 0; s < m.state_count(); ++s) {
        const auto row = env.policy.row(s);
        CHECK(std::vector<double>(row.begin(), row.end()) ==
              std::vector<double>{0.05, 0.45, 0.45, 0.05});
    }
    CHECK(validate(m, env.policy).empty());

    const auto det = build_gridworld(0.0, 8);
    for (std::size_t s = 0; s < det.mdp.state_count(); ++s) {
        if (det.mdp.is_leaf(s)) continue;
        for (std::size_t a = 0; a < 4; ++a) {
            const auto row = det.mdp.successors(s, a);
            REQUIRE(row.size() == 1);
            CHECK(row[0].prob == 1.0);
        }
    }

    CHECK_THROWS_AS(build_gridworld(0.1, 6), std::invalid_argument);
    CHECK_THROWS_AS(build_gridworld(1.0, 8), std::invalid_argument);
    CHECK_THROWS_AS(build_gridworld(-0.1, 8), std::invalid_argument);
}

TEST_CASE("gridworld horizon 8 fails the single-parent check") {
    for (int horizon : {8, 9, 10}) {
        auto env = build_gridworld(0.1, horizon);
        env.mdp.structure = StructureKind::Tree;
        CHECK(has_kind(validate(env.mdp), ViolationKind::MultipleParents));
    }
}

TEST_CASE("discounted reach") {
    auto env = fixtures::stochastic_tree(0.25, {{1, 1}, {1, 1}, {1, 1}, {1, 1}},
                                         {{0.4, 0.6}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    env.mdp.gamma = 0.5;
    const auto reach = discounted_reach(env.mdp, env.policy);
    CHECK(reach[0] == 1.0);
    CHECK(reach[1] == doctest::Approx(0.5 * 0.4 * 0.25));
    CHECK(reach[2] == doctest::Approx(0.5 * 0.4 * 0.75));
    CHECK(reach[3] == doctest::Approx(0.5 * 0.6));
}
