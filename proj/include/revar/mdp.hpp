#pragma once

#include "revar/table.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace revar {

/// Position of a state in the layered MDP: level in [1, L] and index within the level.
struct StateId {
    int level = 1;
    int index = 0;

    auto operator<=>(const StateId&) const = default;
};

enum class StructureKind { Tree, Dag };

/// Reward noise family. TruncatedGaussian clips draws at mu +- 6 sigma and
/// does not correct the variance.
enum class RewardDist { Gaussian, TruncatedGaussian };

struct Successor {
    std::size_t state = 0;
    double prob = 0.0;

    bool operator==(const Successor&) const = default;
};

/// Sparse transition rows, one per (state, action) pair in row-major order.
using TransitionTable = std::vector<std::vector<Successor>>;

/// Layered finite-horizon MDP.
///
/// States are stored level-major: the root is state 0, then every level-2
/// state, and so on. Backward recursions rely on this ordering, and
/// validate() reports specs that break it. Leaf states (level == horizon)
/// have empty transition rows.
struct MdpSpec {
    std::vector<StateId> states;
    std::size_t action_count = 1;
    TransitionTable transitions;
    SaTable reward_mean;
    SaTable reward_var;
    RewardDist reward_dist = RewardDist::Gaussian;
    double gamma = 1.0;
    int horizon = 1;
    StructureKind structure = StructureKind::Tree;

    std::size_t state_count() const { return states.size(); }
    std::size_t sa(std::size_t s, std::size_t a) const { return s * action_count + a; }
    std::span<const Successor> successors(std::size_t s, std::size_t a) const {
        return transitions[sa(s, a)];
    }
    int level(std::size_t s) const { return states[s].level; }
    bool is_leaf(std::size_t s) const { return states[s].level == horizon; }

    bool operator==(const MdpSpec&) const = default;
};

/// The fixed evaluation policy pi(a|s).
struct TargetPolicy {
    SaTable pi;

    double operator()(std::size_t s, std::size_t a) const { return pi(s, a); }
    std::span<const double> row(std::size_t s) const { return pi.row(s); }

    bool operator==(const TargetPolicy&) const = default;
};

/// An MDP paired with the policy to evaluate on it.
struct Environment {
    MdpSpec mdp;
    TargetPolicy policy;

    bool operator==(const Environment&) const = default;
};

enum class ViolationKind {
    Dimension,
    Ordering,
    RootCount,
    RowSum,
    NegativeProbability,
    LevelSkip,
    LeafTransition,
    MultipleParents,
    Orphan,
    NegativeVariance,
    NonFinite,
    PolicyRow,
};

std::string to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Checks every structural invariant of the spec. An empty report means valid.
ValidationReport validate(const MdpSpec& mdp);

/// validate(mdp) plus the policy's shape and row sums.
ValidationReport validate(const MdpSpec& mdp, const TargetPolicy& policy);

/// Number of (state, action) pairs with positive probability of reaching each state.
std::vector<std::size_t> parent_counts(const MdpSpec& mdp);

struct ValueReport {
    std::vector<double> state_values;
    double root_value = 0.0;
};

/// Exact v^pi by backward recursion over levels. Throws std::invalid_argument
/// when the policy's dimensions do not match the MDP.
ValueReport value_exact(const MdpSpec& mdp, const TargetPolicy& policy);

/// Flat ids of the states at `level`, in index order.
std::vector<std::size_t> states_at_level(const MdpSpec& mdp, int level);

/// Probability of reaching each state under `policy`, discounted by gamma^(level-1).
/// This is the weight of each state's mean-reward estimate in the root estimate.
std::vector<double> discounted_reach(const MdpSpec& mdp, const TargetPolicy& policy);

/// Seed for the standard-normal reward means of the built-in benchmarks.
inline constexpr std::uint64_t kBenchmarkMeanSeed = 20220517;

/// 4-level deterministic binary tree (15 states). Action 0 has variance 0.01
/// and target probability 0.95; action 1 has variance 20 and probability 0.05.
Environment build_tree4();

/// 4x4 gridworld with (timestep, cell) states. Actions are L, R, D, U in that
/// order. The intended move succeeds with probability 1 - noise, otherwise one
/// of the other three directions is taken uniformly. Reaching the bottom-right
/// cell absorbs the episode there with zero reward. Throws std::invalid_argument
/// when horizon < 7 or noise is outside [0, 1).
Environment build_gridworld(double noise = 0.1, int horizon = 8);

inline constexpr int kGridSide = 4;

} // namespace revar
