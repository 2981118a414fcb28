#include "revar/mdp.hpp"

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace revar {

namespace {

constexpr double kRowTolerance = 1e-12;

std::string sa_label(std::size_t s, std::size_t a) {
    std::ostringstream out;
    out << "(s=" << s << ", a=" << a << ")";
    return out.str();
}

} // namespace

std::string to_string(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::Dimension: return "dimension";
    case ViolationKind::Ordering: return "ordering";
    case ViolationKind::RootCount: return "root count";
    case ViolationKind::RowSum: return "row sum";
    case ViolationKind::NegativeProbability: return "negative probability";
    case ViolationKind::LevelSkip: return "level skip";
    case ViolationKind::LeafTransition: return "leaf transition";
    case ViolationKind::MultipleParents: return "multiple parents";
    case ViolationKind::Orphan: return "orphan";
    case ViolationKind::NegativeVariance: return "negative variance";
    case ViolationKind::NonFinite: return "non-finite";
    case ViolationKind::PolicyRow: return "policy row";
    }
    return "unknown";
}

std::vector<std::size_t> parent_counts(const MdpSpec& mdp) {
    std::vector<std::size_t> parents(mdp.state_count(), 0);
    for (const auto& row : mdp.transitions) {
        for (const auto& next : row) {
            if (next.prob > 0.0 && next.state < parents.size()) ++parents[next.state];
        }
    }
    return parents;
}

ValidationReport validate(const MdpSpec& mdp) {
    ValidationReport report;
    auto add = [&](ViolationKind kind, std::string message) {
        report.push_back({kind, std::move(message)});
    };

    const std::size_t S = mdp.state_count();
    const std::size_t A = mdp.action_count;
    if (S == 0 || A == 0 || mdp.horizon < 1) {
        add(ViolationKind::Dimension, "empty state set, zero actions or horizon < 1");
        return report;
    }
    if (mdp.transitions.size() != S * A || mdp.reward_mean.states() != S ||
        mdp.reward_mean.actions() != A || mdp.reward_var.states() != S ||
        mdp.reward_var.actions() != A) {
        add(ViolationKind::Dimension, "transition or reward tables do not match S x A");
        return report;
    }
    if (!(mdp.gamma >= 0.0 && mdp.gamma <= 1.0)) {
        add(ViolationKind::NonFinite, "gamma must lie in [0, 1]");
    }

    // Level-major ordering with contiguous indices per level.
    std::size_t root_count = 0;
    int expected_level = 1;
    int expected_index = 0;
    for (std::size_t s = 0; s < S; ++s) {
        const StateId id = mdp.states[s];
        if (id.level < 1 || id.level > mdp.horizon) {
            add(ViolationKind::Ordering,
                "state " + std::to_string(s) + " has level outside [1, L]");
            continue;
        }
        if (id.level == 1) ++root_count;
        if (id.level == expected_level + 1) {
            expected_level = id.level;
            expected_index = 0;
        }
        if (id.level != expected_level || id.index != expected_index) {
            add(ViolationKind::Ordering, "state " + std::to_string(s) +
                                             " breaks level-major ordering");
            expected_level = id.level;
        }
        expected_index = id.index + 1;
    }
    if (root_count != 1 || mdp.states[0].level != 1) {
        add(ViolationKind::RootCount, "level 1 must contain exactly one state, stored first");
    }

    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            const double mean = mdp.reward_mean(s, a);
            const double var = mdp.reward_var(s, a);
            if (!std::isfinite(mean) || !std::isfinite(var)) {
                add(ViolationKind::NonFinite, "reward moments not finite at " + sa_label(s, a));
            } else if (var < 0.0) {
                add(ViolationKind::NegativeVariance, "negative reward variance at " + sa_label(s, a));
            }

            const auto row = mdp.successors(s, a);
            if (mdp.is_leaf(s)) {
                if (!row.empty()) {
                    add(ViolationKind::LeafTransition,
                        "leaf state has outgoing transitions at " + sa_label(s, a));
                }
                continue;
            }
            double total = 0.0;
            for (const auto& next : row) {
                if (next.state >= S) {
                    add(ViolationKind::Dimension, "successor out of range at " + sa_label(s, a));
                    continue;
                }
                if (!std::isfinite(next.prob)) {
                    add(ViolationKind::NonFinite, "non-finite probability at " + sa_label(s, a));
                    continue;
                }
                if (next.prob < 0.0) {
                    add(ViolationKind::NegativeProbability,
                        "negative probability at " + sa_label(s, a));
                }
                if (next.prob != 0.0 && mdp.level(next.state) != mdp.level(s) + 1) {
                    add(ViolationKind::LevelSkip, "transition from " + sa_label(s, a) +
                                                      " does not go to the next level");
                }
                total += next.prob;
            }
            if (std::abs(total - 1.0) > kRowTolerance) {
                std::ostringstream msg;
                msg << "transition row " << sa_label(s, a) << " sums to " << total;
                add(ViolationKind::RowSum, msg.str());
            }
        }
    }

    if (mdp.structure == StructureKind::Tree) {
        const auto parents = parent_counts(mdp);
        for (std::size_t s = 1; s < S; ++s) {
            if (parents[s] > 1) {
                add(ViolationKind::MultipleParents,
                    "state " + std::to_string(s) + " has " + std::to_string(parents[s]) +
                        " parent (state, action) pairs");
            } else if (parents[s] == 0) {
                add(ViolationKind::Orphan, "state " + std::to_string(s) + " has no parent");
            }
        }
    }
    return report;
}

ValidationReport validate(const MdpSpec& mdp, const TargetPolicy& policy) {
    ValidationReport report = validate(mdp);
    if (policy.pi.states() != mdp.state_count() || policy.pi.actions() != mdp.action_count) {
        report.push_back({ViolationKind::Dimension, "policy table does not match S x A"});
        return report;
    }
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        double total = 0.0;
        bool negative = false;
        for (double p : policy.row(s)) {
            if (!std::isfinite(p) || p < 0.0) negative = true;
            total += p;
        }
        if (negative || std::abs(total - 1.0) > kRowTolerance) {
            std::ostringstream msg;
            msg << "policy row of state " << s << " is not a distribution (sum " << total << ")";
            report.push_back({ViolationKind::PolicyRow, msg.str()});
        }
    }
    return report;
}

ValueReport value_exact(const MdpSpec& mdp, const TargetPolicy& policy) {
    const std::size_t S = mdp.state_count();
    const std::size_t A = mdp.action_count;
    if (policy.pi.states() != S || policy.pi.actions() != A) {
        throw std::invalid_argument("value_exact: policy dimensions do not match the MDP");
    }
    ValueReport out;
    out.state_values.assign(S, 0.0);
    // Level-major storage: successors always have larger flat ids.
    for (std::size_t s = S; s-- > 0;) {
        double v = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
            const double p = policy(s, a);
            if (p == 0.0) continue;
            double future = 0.0;
            for (const auto& next : mdp.successors(s, a)) {
                future += next.prob * out.state_values[next.state];
            }
            v += p * (mdp.reward_mean(s, a) + mdp.gamma * future);
        }
        out.state_values[s] = v;
    }
    out.root_value = out.state_values[0];
    return out;
}

std::vector<std::size_t> states_at_level(const MdpSpec& mdp, int level) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        if (mdp.level(s) == level) out.push_back(s);
    }
    return out;
}

std::vector<double> discounted_reach(const MdpSpec& mdp, const TargetPolicy& policy) {
    std::vector<double> reach(mdp.state_count(), 0.0);
    reach[0] = 1.0;
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        if (reach[s] == 0.0) continue;
        for (std::size_t a = 0; a < mdp.action_count; ++a) {
            const double w = reach[s] * policy(s, a) * mdp.gamma;
            if (w == 0.0) continue;
            for (const auto& next : mdp.successors(s, a)) reach[next.state] += w * next.prob;
        }
    }
    return reach;
}

Environment build_tree4() {
    constexpr int kLevels = 4;
    constexpr std::size_t kActions = 2;
    constexpr std::array<double, kActions> kVar{0.01, 20.0};
    constexpr std::array<double, kActions> kPi{0.95, 0.05};

    Environment env;
    MdpSpec& mdp = env.mdp;
    mdp.action_count = kActions;
    mdp.horizon = kLevels;
    mdp.gamma = 1.0;
    mdp.structure = StructureKind::Tree;
    for (int level = 1; level <= kLevels; ++level) {
        for (int i = 0; i < (1 << (level - 1)); ++i) mdp.states.push_back({level, i});
    }
    const std::size_t S = mdp.states.size();
    mdp.transitions.assign(S * kActions, {});
    mdp.reward_mean = SaTable(S, kActions);
    mdp.reward_var = SaTable(S, kActions);
    env.policy.pi = SaTable(S, kActions);

    Rng rng(kBenchmarkMeanSeed);
    std::normal_distribution<double> standard_normal;
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < kActions; ++a) {
            mdp.reward_mean(s, a) = standard_normal(rng);
            mdp.reward_var(s, a) = kVar[a];
            env.policy.pi(s, a) = kPi[a];
            // Heap layout: children of flat id s are 2s+1 and 2s+2.
            if (!mdp.is_leaf(s)) mdp.transitions[mdp.sa(s, a)] = {{2 * s + 1 + a, 1.0}};
        }
    }
    return env;
}

Environment build_gridworld(double noise, int horizon) {
    if (horizon < 7) {
        throw std::invalid_argument("build_gridworld: horizon must be at least 7");
    }
    if (!(noise >= 0.0 && noise < 1.0)) {
        throw std::invalid_argument("build_gridworld: noise must lie in [0, 1)");
    }
    constexpr std::size_t kActions = 4; // L, R, D, U
    static constexpr std::array<int, kActions> kDRow{0, 0, 1, -1};
    static constexpr std::array<int, kActions> kDCol{-1, 1, 0, 0};
    constexpr std::array<double, kActions> kPi{0.05, 0.45, 0.45, 0.05};
    constexpr std::array<double, kActions> kVar{20.0, 0.01, 0.01, 20.0};
    constexpr int kCells = kGridSide * kGridSide;
    constexpr int kStart = 0;
    constexpr int kGoal = kCells - 1;

    auto move = [](int cell, std::size_t dir) {
        const int row = cell / kGridSide + kDRow[dir];
        const int col = cell % kGridSide + kDCol[dir];
        if (row < 0 || row >= kGridSide || col < 0 || col >= kGridSide) return cell;
        return row * kGridSide + col;
    };

    // Means depend on the physical cell only, so they repeat across timesteps.
    Rng rng(kBenchmarkMeanSeed);
    std::normal_distribution<double> standard_normal;
    SaTable cell_mean(kCells, kActions);
    for (int c = 0; c < kCells; ++c) {
        for (std::size_t a = 0; a < kActions; ++a) cell_mean(c, a) = standard_normal(rng);
    }

    // Forward enumeration of reachable (timestep, cell) pairs.
    std::vector<std::map<int, std::size_t>> level_cells(horizon + 1);
    std::vector<int> cell_of;
    Environment env;
    MdpSpec& mdp = env.mdp;
    mdp.action_count = kActions;
    mdp.horizon = horizon;
    mdp.gamma = 1.0;
    mdp.structure = StructureKind::Dag;

    level_cells[1][kStart] = 0;
    std::vector<std::map<int, double>> rows;
    for (int t = 1; t <= horizon; ++t) {
        // Assign flat ids for this level in cell order.
        int index = 0;
        for (auto& [cell, id] : level_cells[t]) {
            id = mdp.states.size();
            mdp.states.push_back({t, index++});
            cell_of.push_back(cell);
        }
        if (t == horizon) break;
        for (auto& [cell, id] : level_cells[t]) {
            for (std::size_t a = 0; a < kActions; ++a) {
                std::map<int, double> row;
                if (cell == kGoal) {
                    row[kGoal] = 1.0;
                } else {
                    for (std::size_t dir = 0; dir < kActions; ++dir) {
                        const double p = dir == a ? 1.0 - noise : noise / 3.0;
                        if (p > 0.0) row[move(cell, dir)] += p;
                    }
                }
                for (const auto& [next, p] : row) level_cells[t + 1].emplace(next, 0);
                rows.push_back(std::move(row));
            }
        }
    }

    const std::size_t S = mdp.states.size();
    mdp.transitions.assign(S * kActions, {});
    mdp.reward_mean = SaTable(S, kActions);
    mdp.reward_var = SaTable(S, kActions);
    env.policy.pi = SaTable(S, kActions);
    std::size_t row_index = 0;
    for (std::size_t s = 0; s < S; ++s) {
        const int cell = cell_of[s];
        const int t = mdp.states[s].level;
        for (std::size_t a = 0; a < kActions; ++a) {
            env.policy.pi(s, a) = kPi[a];
            if (cell != kGoal) {
                mdp.reward_mean(s, a) = cell_mean(cell, a);
                mdp.reward_var(s, a) = kVar[a];
            }
            if (t == horizon) continue;
            auto& out = mdp.transitions[mdp.sa(s, a)];
            for (const auto& [next_cell, p] : rows[row_index++]) {
                out.push_back({level_cells[t + 1].at(next_cell), p});
            }
        }
    }
    return env;
}

} // namespace revar
