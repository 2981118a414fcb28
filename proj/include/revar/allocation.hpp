#pragma once

#include "revar/mdp.hpp"

#include <span>
#include <vector>

namespace revar {

/// Sampling proportions b(a|s) with the normalization factors B(s) that
/// produced them. `weight` holds the un-normalized per-action weights
/// sqrt(pi^2 (sigma^2 + gamma^2 sum_s' P B^2(s'))), whose row sum is B(s).
struct AllocationTable {
    SaTable b;
    SaTable weight;
    std::vector<double> bigB;
};

/// Weights below this are flushed to exact zero before normalizing.
inline constexpr double kWeightFloor = 1e-15;

/// Normalizes `weights` into proportions. When every weight is zero the
/// result is uniform over the support of `pi_row`. Throws
/// std::invalid_argument if a weight is negative or not finite.
std::vector<double> normalize_weights(std::span<const double> weights,
                                      std::span<const double> pi_row);

/// Variance-optimal bandit proportions b(a) proportional to pi(a) sigma(a).
/// Throws std::invalid_argument on a negative sigma or mismatched lengths.
std::vector<double> bandit_allocation(std::span<const double> pi_row,
                                      std::span<const double> sigma_row);

/// Per-state standard deviations sqrt(reward_var).
SaTable true_sigma(const MdpSpec& mdp);

/// Oracle allocation on a tree: one bottom-up pass computing B from the
/// leaves, then rows normalized from the per-action weights. Throws
/// std::invalid_argument if any state has more than one parent pair.
AllocationTable tree_oracle_allocation(const MdpSpec& mdp, const TargetPolicy& policy);

/// Bottom-up tree pass with the given sigma and transition estimates
/// (same layout as mdp.transitions). Does not check the tree structure.
AllocationTable tree_allocation(const MdpSpec& mdp, const TargetPolicy& policy,
                                const SaTable& sigma, const TransitionTable& transitions);

/// Normalization factors B_0 by backward sweeps over the whole state set,
/// B_L = 0 and B_t'(s) = sum_a sqrt(pi^2 (sigma^2 + gamma^2 sum P B_{t'+1}(s')^2))
/// for t' = L-1 .. 0. Works with true or estimated sigma and transitions;
/// `transitions` must have the same layout as mdp.transitions.
std::vector<double> dag_B_iteration(const MdpSpec& mdp, const TargetPolicy& policy,
                                    const SaTable& sigma, const TransitionTable& transitions);

/// dag_B_iteration followed by per-state normalization of the weights.
AllocationTable dag_allocation(const MdpSpec& mdp, const TargetPolicy& policy,
                               const SaTable& sigma, const TransitionTable& transitions);

/// Oracle allocation for either structure from the true sigma and P.
AllocationTable oracle_allocation(const MdpSpec& mdp, const TargetPolicy& policy);

/// MSE of the known-model certainty-equivalence estimate when every state s
/// has been visited state_counts[s] times and actions follow alloc.b:
///
///   sum_{s,a} rho(s)^2 pi(a|s)^2 sigma^2(s,a) / (b(a|s) T(s))
///
/// with rho the gamma-discounted reach probability under pi. On a tree with
/// counts split according to the oracle proportions this equals
/// B(root)^2 / T(root). States with zero reach drop out. Throws
/// std::domain_error when a reachable state has a zero count, or when an
/// action with a nonzero variance term has b = 0.
double oracle_loss(const MdpSpec& mdp, const TargetPolicy& policy, const AllocationTable& alloc,
                   std::span<const double> state_counts);

/// The recursive upper bound U(s) = B(s)^2/T(s) + gamma^2 sum_a pi^2 sum_s' P U(s'),
/// evaluated at the root. It dominates oracle_loss and coincides with it
/// when L = 1.
double oracle_loss_bound(const MdpSpec& mdp, const TargetPolicy& policy,
                         const AllocationTable& alloc, std::span<const double> state_counts);

/// Variance objective of a depth <= 2 tree as a function of the proportions:
/// sum_a pi^2 sigma^2 / b(a|root)
///   + sum_a sum_j sum_a' gamma^2 pi^2(a|root) P(j|root,a) pi^2(a'|j) sigma^2(j,a')
///                        / (b(a|root) b(a'|j)).
double tree2_objective(const MdpSpec& mdp, const TargetPolicy& policy, const SaTable& b);

/// Numerical minimizer of tree2_objective over the product of simplices by
/// pairwise-exchange coordinate descent with golden-section line searches.
/// Independent of the closed form; meant as a test oracle for small trees
/// (depth <= 2, at most 3 actions, at most 4 leaves). Only `b` is filled.
/// Throws std::invalid_argument on larger instances and std::runtime_error
/// when the iteration budget runs out.
AllocationTable brute_force_allocation(const MdpSpec& mdp, const TargetPolicy& policy);

} // namespace revar
