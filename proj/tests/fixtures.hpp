#pragma once

#include "revar/mdp.hpp"

#include <random>
#include <vector>

namespace fixtures {

using revar::Environment;
using revar::SaTable;
using revar::StructureKind;

// Single-level MDP with one state: a bandit.
inline Environment bandit(const std::vector<double>& pi, const std::vector<double>& var,
                          const std::vector<double>& mean = {}) {
    Environment env;
    auto& m = env.mdp;
    const std::size_t A = pi.size();
    m.states = {{1, 0}};
    m.action_count = A;
    m.horizon = 1;
    m.transitions.assign(A, {});
    m.reward_mean = SaTable(1, A);
    m.reward_var = SaTable(1, A);
    env.policy.pi = SaTable(1, A);
    for (std::size_t a = 0; a < A; ++a) {
        m.reward_var(0, a) = var[a];
        m.reward_mean(0, a) = mean.empty() ? 0.0 : mean[a];
        env.policy.pi(0, a) = pi[a];
    }
    return env;
}

// Two-level tree: root with A actions, action a leads to child 1 + a
// deterministically. Every state shares the A-action layout.
struct TwoLevel {
    std::vector<std::vector<double>> var;  // per state (root first), per action
    std::vector<std::vector<double>> pi;
    std::vector<std::vector<double>> mean; // optional
    double gamma = 1.0;
};

inline Environment two_level(const TwoLevel& spec) {
    Environment env;
    auto& m = env.mdp;
    const std::size_t A = spec.var.front().size();
    const std::size_t S = 1 + A;
    m.action_count = A;
    m.horizon = 2;
    m.gamma = spec.gamma;
    m.states.push_back({1, 0});
    for (std::size_t a = 0; a < A; ++a) m.states.push_back({2, static_cast<int>(a)});
    m.transitions.assign(S * A, {});
    for (std::size_t a = 0; a < A; ++a) m.transitions[a] = {{1 + a, 1.0}};
    m.reward_mean = SaTable(S, A);
    m.reward_var = SaTable(S, A);
    env.policy.pi = SaTable(S, A);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            m.reward_var(s, a) = spec.var[s][a];
            env.policy.pi(s, a) = spec.pi[s][a];
            if (!spec.mean.empty()) m.reward_mean(s, a) = spec.mean[s][a];
        }
    }
    return env;
}

// The three-state, two-action tree with root variances (400, 600), left
// child variances (400, 400), right child variances (4, 4), uniform policy.
inline Environment three_state_tree() {
    return two_level({{{400, 600}, {400, 400}, {4, 4}},
                      {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}},
                      {},
                      1.0});
}

// Two-level tree where root action 0 splits into two children with
// probabilities p and 1 - p, and root action 1 leads to a third child.
inline Environment stochastic_tree(double p, const std::vector<std::vector<double>>& var,
                                   const std::vector<std::vector<double>>& pi) {
    Environment env;
    auto& m = env.mdp;
    m.action_count = 2;
    m.horizon = 2;
    m.states = {{1, 0}, {2, 0}, {2, 1}, {2, 2}};
    m.transitions.assign(8, {});
    m.transitions[0] = {{1, p}, {2, 1.0 - p}};
    m.transitions[1] = {{3, 1.0}};
    m.reward_mean = SaTable(4, 2);
    m.reward_var = SaTable(4, 2);
    env.policy.pi = SaTable(4, 2);
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t a = 0; a < 2; ++a) {
            m.reward_var(s, a) = var[s][a];
            env.policy.pi(s, a) = pi[s][a];
        }
    }
    return env;
}

// Two-level tree with arbitrary root transition rows over the leaves
// 1 .. S-1. Rows of var and pi are per state, root first.
inline Environment two_level_rows(const std::vector<std::vector<revar::Successor>>& root_rows,
                                  const std::vector<std::vector<double>>& var,
                                  const std::vector<std::vector<double>>& pi, double gamma = 1.0) {
    Environment env;
    auto& m = env.mdp;
    const std::size_t A = root_rows.size();
    const std::size_t S = var.size();
    m.action_count = A;
    m.horizon = 2;
    m.gamma = gamma;
    m.states.push_back({1, 0});
    for (std::size_t j = 1; j < S; ++j) m.states.push_back({2, static_cast<int>(j - 1)});
    m.transitions.assign(S * A, {});
    for (std::size_t a = 0; a < A; ++a) m.transitions[a] = root_rows[a];
    m.reward_mean = SaTable(S, A);
    m.reward_var = SaTable(S, A);
    env.policy.pi = SaTable(S, A);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            m.reward_var(s, a) = var[s][a];
            env.policy.pi(s, a) = pi[s][a];
        }
    }
    return env;
}

// Three-level, two-action DAG: root -> {1, 2}; both level-2 states can
// reach both level-3 states {3, 4}.
inline Environment small_dag() {
    Environment env;
    auto& m = env.mdp;
    m.structure = StructureKind::Dag;
    m.action_count = 2;
    m.horizon = 3;
    m.states = {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}};
    m.transitions.assign(10, {});
    m.transitions[0] = {{1, 1.0}};
    m.transitions[1] = {{2, 1.0}};
    m.transitions[2] = {{3, 0.7}, {4, 0.3}};
    m.transitions[3] = {{4, 1.0}};
    m.transitions[4] = {{3, 0.2}, {4, 0.8}};
    m.transitions[5] = {{3, 1.0}};
    m.reward_mean = SaTable(5, 2);
    m.reward_var = SaTable(5, 2);
    env.policy.pi = SaTable(5, 2);
    const double var[5][2] = {{1.0, 4.0}, {2.0, 0.5}, {9.0, 1.0}, {1.0, 16.0}, {0.25, 4.0}};
    const double pi[5][2] = {{0.3, 0.7}, {0.5, 0.5}, {0.8, 0.2}, {0.6, 0.4}, {0.1, 0.9}};
    for (std::size_t s = 0; s < 5; ++s) {
        for (std::size_t a = 0; a < 2; ++a) {
            m.reward_var(s, a) = var[s][a];
            m.reward_mean(s, a) = 0.5 * static_cast<double>(s) - static_cast<double>(a);
            env.policy.pi(s, a) = pi[s][a];
        }
    }
    return env;
}

inline std::vector<double> dirichlet(std::size_t n, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    std::vector<double> x(n);
    double total = 0.0;
    for (auto& v : x) total += (v = g(rng));
    for (auto& v : x) v /= total;
    return x;
}

// Random two-level tree with A in {2, 3} actions, up to 4 leaves; some
// root actions may branch stochastically into two leaves.
inline Environment random_two_level(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> actions_dist(2, 3);
    std::uniform_real_distribution<double> var_dist(0.1, 100.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t A = static_cast<std::size_t>(actions_dist(rng));

    Environment env;
    auto& m = env.mdp;
    m.action_count = A;
    m.horizon = 2;
    m.gamma = unit(rng) < 0.5 ? 0.5 : 1.0;
    m.states.push_back({1, 0});
    std::vector<std::vector<revar::Successor>> root_rows(A);
    std::size_t leaves = 0;
    for (std::size_t a = 0; a < A; ++a) {
        const std::size_t remaining_actions = A - a - 1;
        const bool branch = leaves + 2 + remaining_actions <= 4 && unit(rng) < 0.5;
        if (branch) {
            const double p = 0.1 + 0.8 * unit(rng);
            root_rows[a] = {{1 + leaves, p}, {2 + leaves, 1.0 - p}};
            leaves += 2;
        } else {
            root_rows[a] = {{1 + leaves, 1.0}};
            leaves += 1;
        }
    }
    const std::size_t S = 1 + leaves;
    for (std::size_t j = 0; j < leaves; ++j) m.states.push_back({2, static_cast<int>(j)});
    m.transitions.assign(S * A, {});
    for (std::size_t a = 0; a < A; ++a) m.transitions[a] = root_rows[a];
    m.reward_mean = SaTable(S, A);
    m.reward_var = SaTable(S, A);
    env.policy.pi = SaTable(S, A);
    for (std::size_t s = 0; s < S; ++s) {
        const auto row = dirichlet(A, rng);
        for (std::size_t a = 0; a < A; ++a) {
            m.reward_var(s, a) = var_dist(rng);
            env.policy.pi(s, a) = row[a];
        }
    }
    return env;
}

// Random complete tree of the given depth with A actions and deterministic
// transitions (heap layout: child of (s, a) is s * A + a + 1).
inline Environment random_tree(int depth, std::size_t A, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> var_dist(0.0, 10.0);
    std::normal_distribution<double> normal;
    Environment env;
    auto& m = env.mdp;
    m.action_count = A;
    m.horizon = depth;
    m.gamma = 0.9;
    std::size_t level_size = 1;
    for (int level = 1; level <= depth; ++level) {
        for (std::size_t i = 0; i < level_size; ++i) m.states.push_back({level, static_cast<int>(i)});
        level_size *= A;
    }
    const std::size_t S = m.states.size();
    m.transitions.assign(S * A, {});
    for (std::size_t s = 0; s < S; ++s) {
        if (m.is_leaf(s)) continue;
        for (std::size_t a = 0; a < A; ++a) m.transitions[s * A + a] = {{s * A + a + 1, 1.0}};
    }
    m.reward_mean = SaTable(S, A);
    m.reward_var = SaTable(S, A);
    env.policy.pi = SaTable(S, A);
    for (std::size_t s = 0; s < S; ++s) {
        const auto row = dirichlet(A, rng);
        for (std::size_t a = 0; a < A; ++a) {
            m.reward_var(s, a) = var_dist(rng);
            m.reward_mean(s, a) = normal(rng);
            env.policy.pi(s, a) = row[a];
        }
    }
    return env;
}

} // namespace fixtures
