#include "revar/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace revar {

VisitStats::VisitStats(const MdpSpec& mdp)
    : actions_(mdp.action_count),
      horizon_(mdp.horizon),
      count_sa_(mdp.state_count() * mdp.action_count, 0),
      sum_r_(count_sa_.size(), 0.0),
      sum_r2_(count_sa_.size(), 0.0) {
    levels_.reserve(mdp.state_count());
    for (const auto& id : mdp.states) levels_.push_back(id.level);
    support_offset_.reserve(count_sa_.size() + 1);
    support_offset_.push_back(0);
    for (const auto& row : mdp.transitions) {
        for (const auto& next : row) {
            if (next.prob > 0.0) support_state_.push_back(next.state);
        }
        support_offset_.push_back(support_state_.size());
    }
    count_sas_.assign(support_state_.size(), 0);
}

void VisitStats::record_step(std::size_t s, std::size_t a, double reward) {
    const std::size_t i = s * actions_ + a;
    ++count_sa_[i];
    sum_r_[i] += reward;
    sum_r2_[i] += reward * reward;
}

std::size_t VisitStats::support_slot(std::size_t s, std::size_t a, std::size_t next) const {
    const std::size_t i = s * actions_ + a;
    for (std::size_t k = support_offset_[i]; k < support_offset_[i + 1]; ++k) {
        if (support_state_[k] == next) return k;
    }
    return support_state_.size();
}

void VisitStats::record_transition(std::size_t s, std::size_t a, std::size_t next) {
    const std::size_t slot = support_slot(s, a, next);
    if (slot == support_state_.size()) {
        throw std::invalid_argument("VisitStats: transition outside the support of P(.|s,a)");
    }
    ++count_sas_[slot];
}

void VisitStats::record(const Trajectory& traj) {
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const Step& step = traj[t];
        if (step.state >= levels_.size() || step.action >= actions_ ||
            levels_[step.state] != static_cast<int>(t) + 1) {
            throw std::invalid_argument("VisitStats::record: trajectory level mismatch at step " +
                                        std::to_string(t));
        }
    }
    if (!traj.empty() && levels_[traj.back().state] != horizon_) {
        throw std::invalid_argument("VisitStats::record: trajectory does not end at a leaf");
    }
    for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
        if (support_slot(traj[t].state, traj[t].action, traj[t + 1].state) ==
            support_state_.size()) {
            throw std::invalid_argument("VisitStats::record: transition outside the support");
        }
    }
    for (std::size_t t = 0; t < traj.size(); ++t) {
        record_step(traj[t].state, traj[t].action, traj[t].reward);
        if (t + 1 < traj.size()) record_transition(traj[t].state, traj[t].action, traj[t + 1].state);
    }
}

std::uint64_t VisitStats::state_visits(std::size_t s) const {
    std::uint64_t total = 0;
    for (auto c : counts_row(s)) total += c;
    return total;
}

std::span<const std::size_t> VisitStats::support(std::size_t s, std::size_t a) const {
    const std::size_t i = s * actions_ + a;
    return {support_state_.data() + support_offset_[i], support_offset_[i + 1] - support_offset_[i]};
}

std::span<const std::uint64_t> VisitStats::transition_counts(std::size_t s, std::size_t a) const {
    const std::size_t i = s * actions_ + a;
    return {count_sas_.data() + support_offset_[i], support_offset_[i + 1] - support_offset_[i]};
}

std::uint64_t VisitStats::transition_count(std::size_t s, std::size_t a, std::size_t next) const {
    const std::size_t slot = support_slot(s, a, next);
    return slot == support_state_.size() ? 0 : count_sas_[slot];
}

double plugin_mean(const VisitStats& stats, std::size_t s, std::size_t a) {
    const auto n = stats.count(s, a);
    return n == 0 ? 0.0 : stats.sum_reward(s, a) / static_cast<double>(n);
}

double plugin_variance(const VisitStats& stats, std::size_t s, std::size_t a) {
    const auto n = stats.count(s, a);
    if (n == 0) return 0.0;
    const double mean = stats.sum_reward(s, a) / static_cast<double>(n);
    return std::max(0.0, stats.sum_sq_reward(s, a) / static_cast<double>(n) - mean * mean);
}

double plugin_sigma(const VisitStats& stats, std::size_t s, std::size_t a) {
    return std::sqrt(plugin_variance(stats, s, a));
}

double plugin_transition(const VisitStats& stats, std::size_t s, std::size_t a, std::size_t next) {
    const auto support = stats.support(s, a);
    if (std::find(support.begin(), support.end(), next) == support.end()) return 0.0;
    const auto n = stats.count(s, a);
    if (n == 0) return 1.0 / static_cast<double>(support.size());
    return static_cast<double>(stats.transition_count(s, a, next)) / static_cast<double>(n);
}

EstimateReport certainty_equivalence(const VisitStats& stats, const MdpSpec& mdp,
                                     const TargetPolicy& policy, EstimationMode mode) {
    const std::size_t S = mdp.state_count();
    const std::size_t A = mdp.action_count;
    EstimateReport out;
    out.y_state.assign(S, 0.0);
    out.fully_covered = true;
    for (std::size_t s = S; s-- > 0;) {
        double y = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
            const double p = policy(s, a);
            if (p == 0.0) continue;
            const auto n = stats.count(s, a);
            if (n == 0) out.fully_covered = false;
            double future = 0.0;
            if (mode == EstimationMode::KnownModel) {
                for (const auto& next : mdp.successors(s, a)) {
                    future += next.prob * out.y_state[next.state];
                }
            } else {
                const auto support = stats.support(s, a);
                const auto counts = stats.transition_counts(s, a);
                if (n == 0) {
                    const double uniform = 1.0 / static_cast<double>(support.size());
                    for (std::size_t k = 0; k < support.size(); ++k) {
                        future += uniform * out.y_state[support[k]];
                    }
                } else {
                    for (std::size_t k = 0; k < support.size(); ++k) {
                        future += static_cast<double>(counts[k]) / static_cast<double>(n) *
                                  out.y_state[support[k]];
                    }
                }
            }
            y += p * (plugin_mean(stats, s, a) + mdp.gamma * future);
        }
        out.y_state[s] = y;
    }
    out.y_root = out.y_state[0];
    return out;
}

} // namespace revar
