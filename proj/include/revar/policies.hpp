#pragma once

#include "revar/allocation.hpp"
#include "revar/estimation.hpp"
#include "revar/mdp.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>

namespace revar {

/// A data-collection strategy. Instances carry per-trial state and are
/// owned by one trial.
class BehaviorPolicy {
public:
    virtual ~BehaviorPolicy() = default;

    /// Action to take in `state`; `stats` already contains every step
    /// recorded so far, including earlier steps of the current episode.
    virtual std::size_t select(std::size_t state, const VisitStats& stats, Rng& rng) = 0;

    /// Called once after each episode has been recorded.
    virtual void end_of_episode(const VisitStats& /*stats*/) {}
};

struct RevarConfig {
    double c = 1.0;
    double delta = 1.0;
    /// Total sample budget n = K L, fixed before the first episode.
    std::uint64_t total_budget_n = 1;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct CbVarConfig {
    double eta = 1.0;
    std::uint64_t total_budget_n = 1;

    void validate() const;
};

/// Samples an action from pi_row.
std::size_t onpolicy_select(std::span<const double> pi_row, Rng& rng);

/// Deterministic tracking rule argmax_a b(a)/T(a). Any action with b > 0 and
/// T = 0 wins first (lowest index); ties go to the lowest index; actions
/// with b = 0 are never returned. Throws std::invalid_argument if every b is 0.
std::size_t tracking_select(std::span<const double> b_row,
                            std::span<const std::uint64_t> counts_row);

/// Bandit baseline driven by an empirical-Bernstein bonus computed from the
/// current state's statistics only. Unsampled actions first, ties to the
/// lowest index.
std::size_t cbvar_select(std::size_t state, const VisitStats& stats, const TargetPolicy& policy,
                         const CbVarConfig& cfg);

/// log(S A n (n+1) / delta), the confidence term shared by ReVar and CB-Var.
double confidence_log(std::size_t states, std::size_t actions, std::uint64_t n, double delta);

// The factories below keep references to `mdp` and `policy`; both must
// outlive the returned object.

std::unique_ptr<BehaviorPolicy> make_onpolicy(const TargetPolicy& policy);

/// Tracks a precomputed allocation table.
std::unique_ptr<BehaviorPolicy> make_tracking_policy(AllocationTable table);

/// Tracks the oracle allocation computed from the true sigma and P
/// (tree pass for Tree specs, B-sweeps for Dag specs).
std::unique_ptr<BehaviorPolicy> oracle_policy(const MdpSpec& mdp, const TargetPolicy& policy);

/// ReVar. Uses only the layer structure and transition supports of `mdp`;
/// reward tables and true transition probabilities are never read.
std::unique_ptr<BehaviorPolicy> revar_policy(const MdpSpec& mdp, const TargetPolicy& policy,
                                             const RevarConfig& cfg);

std::unique_ptr<BehaviorPolicy> cbvar_policy(const TargetPolicy& policy, const CbVarConfig& cfg);

/// ReVar's current proportions, exposed for inspection and tests.
class RevarPolicy final : public BehaviorPolicy {
public:
    RevarPolicy(const MdpSpec& mdp, const TargetPolicy& policy, const RevarConfig& cfg);

    std::size_t select(std::size_t state, const VisitStats& stats, Rng& rng) override;
    void end_of_episode(const VisitStats& stats) override;

    const SaTable& proportions() const { return b_; }
    const SaTable& sigma_upper() const { return sigma_upper_; }
    const std::vector<double>& bigB() const { return bigB_; }

    /// Refreshes the proportions from given sigma upper bounds and
    /// transition estimates (same layout as mdp.transitions).
    void refresh(const SaTable& sigma_upper, const TransitionTable& transitions);

private:
    const MdpSpec& mdp_;
    const TargetPolicy& policy_;
    RevarConfig cfg_;
    double log_term_;
    SaTable b_;
    SaTable sigma_upper_;
    SaTable weight_;
    std::vector<double> bigB_;
    TransitionTable p_hat_;
};

} // namespace revar
