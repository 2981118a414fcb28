#pragma once

#include "revar/mdp.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace revar {

struct Step {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;

    bool operator==(const Step&) const = default;
};

/// One episode, root to leaf; step i is taken at level i + 1.
using Trajectory = std::vector<Step>;

/// Sufficient statistics of a dataset of trajectories: visit counts,
/// transition counts and the first two reward moments per (state, action).
///
/// Transition counts are stored aligned with the true support of
/// P(. | s, a), which is copied from the MDP at construction. Only the
/// support is retained; the stats never read the MDP's reward tables.
class VisitStats {
public:
    explicit VisitStats(const MdpSpec& mdp);

    /// Adds one observed reward for (s, a).
    void record_step(std::size_t s, std::size_t a, double reward);
    /// Adds one observed transition. Throws std::invalid_argument when
    /// `next` is outside the support of P(. | s, a).
    void record_transition(std::size_t s, std::size_t a, std::size_t next);
    /// Records a whole trajectory. Throws std::invalid_argument on a level
    /// mismatch or a transition outside the support.
    void record(const Trajectory& traj);

    std::size_t state_count() const { return levels_.size(); }
    std::size_t action_count() const { return actions_; }

    std::uint64_t count(std::size_t s, std::size_t a) const { return count_sa_[s * actions_ + a]; }
    std::uint64_t state_visits(std::size_t s) const;
    std::span<const std::uint64_t> counts_row(std::size_t s) const {
        return {count_sa_.data() + s * actions_, actions_};
    }
    double sum_reward(std::size_t s, std::size_t a) const { return sum_r_[s * actions_ + a]; }
    double sum_sq_reward(std::size_t s, std::size_t a) const { return sum_r2_[s * actions_ + a]; }

    /// States with positive true probability after (s, a).
    std::span<const std::size_t> support(std::size_t s, std::size_t a) const;
    /// T(s, a, s') for each s' in support(s, a), in the same order.
    std::span<const std::uint64_t> transition_counts(std::size_t s, std::size_t a) const;
    std::uint64_t transition_count(std::size_t s, std::size_t a, std::size_t next) const;

    bool operator==(const VisitStats&) const = default;

private:
    std::size_t support_slot(std::size_t s, std::size_t a, std::size_t next) const;

    std::size_t actions_ = 0;
    std::vector<int> levels_;
    int horizon_ = 1;
    std::vector<std::uint64_t> count_sa_;
    std::vector<double> sum_r_;
    std::vector<double> sum_r2_;
    std::vector<std::size_t> support_offset_; // size S*A + 1
    std::vector<std::size_t> support_state_;
    std::vector<std::uint64_t> count_sas_;
};

/// Empirical mean reward, or 0 for an unvisited pair.
double plugin_mean(const VisitStats& stats, std::size_t s, std::size_t a);

/// Population (uncorrected) reward variance clamped at 0; 0 for an unvisited pair.
double plugin_variance(const VisitStats& stats, std::size_t s, std::size_t a);

/// Square root of plugin_variance.
double plugin_sigma(const VisitStats& stats, std::size_t s, std::size_t a);

/// T(s,a,s')/T(s,a); uniform over the true support when (s, a) is unvisited.
double plugin_transition(const VisitStats& stats, std::size_t s, std::size_t a, std::size_t next);

enum class EstimationMode { EmpiricalModel, KnownModel };

struct EstimateReport {
    double y_root = 0.0;
    std::vector<double> y_state;
    /// Every (s, a) with pi(a|s) > 0 has been visited at least once.
    bool fully_covered = false;
};

/// Certainty-equivalence estimate of v(pi). EmpiricalModel uses the
/// empirical transition frequencies, KnownModel the MDP's true P.
EstimateReport certainty_equivalence(const VisitStats& stats, const MdpSpec& mdp,
                                     const TargetPolicy& policy, EstimationMode mode);

} // namespace revar
