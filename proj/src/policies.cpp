#include "revar/policies.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace revar {

void RevarConfig::validate() const {
    if (!std::isfinite(c) || c < 0.0) throw std::invalid_argument("ReVar: c must be finite and >= 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("ReVar: delta must lie in (0, 1]");
    if (total_budget_n < 1) throw std::invalid_argument("ReVar: total budget n must be >= 1");
}

void CbVarConfig::validate() const {
    if (!std::isfinite(eta) || eta <= 0.0) throw std::invalid_argument("CB-Var: eta must be > 0");
    if (total_budget_n < 1) throw std::invalid_argument("CB-Var: total budget n must be >= 1");
}

double confidence_log(std::size_t states, std::size_t actions, std::uint64_t n, double delta) {
    const double nn = static_cast<double>(n);
    return std::log(static_cast<double>(states) * static_cast<double>(actions) * nn * (nn + 1.0) /
                    delta);
}

std::size_t onpolicy_select(std::span<const double> pi_row, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t a = 0; a < pi_row.size(); ++a) {
        if (pi_row[a] <= 0.0) continue;
        last_positive = a;
        cumulative += pi_row[a];
        if (u < cumulative) return a;
    }
    return last_positive;
}

std::size_t tracking_select(std::span<const double> b_row,
                            std::span<const std::uint64_t> counts_row) {
    std::size_t best = b_row.size();
    double best_ratio = -1.0;
    for (std::size_t a = 0; a < b_row.size(); ++a) {
        if (b_row[a] <= 0.0) continue;
        if (counts_row[a] == 0) return a;
        const double ratio = b_row[a] / static_cast<double>(counts_row[a]);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = a;
        }
    }
    if (best == b_row.size()) throw std::invalid_argument("tracking_select: every proportion is zero");
    return best;
}

std::size_t cbvar_select(std::size_t state, const VisitStats& stats, const TargetPolicy& policy,
                         const CbVarConfig& cfg) {
    const auto counts = stats.counts_row(state);
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] == 0) return a;
    }
    const double log_term =
        confidence_log(stats.state_count(), stats.action_count(), cfg.total_budget_n, 1.0);
    const double scale = 2.0 * cfg.eta + 4.0 * cfg.eta * cfg.eta;
    std::size_t best = 0;
    double best_bonus = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < counts.size(); ++a) {
        const double n = static_cast<double>(counts[a]);
        const double variance = plugin_variance(stats, state, a);
        const double bonus = scale * std::sqrt(2.0 * policy(state, a) * variance * log_term / n) +
                             7.0 * log_term / (3.0 * n);
        if (bonus > best_bonus) {
            best_bonus = bonus;
            best = a;
        }
    }
    return best;
}

namespace {

class OnPolicy final : public BehaviorPolicy {
public:
    explicit OnPolicy(const TargetPolicy& policy) : policy_(policy) {}

    std::size_t select(std::size_t state, const VisitStats&, Rng& rng) override {
        return onpolicy_select(policy_.row(state), rng);
    }

private:
    const TargetPolicy& policy_;
};

class TrackingPolicy final : public BehaviorPolicy {
public:
    explicit TrackingPolicy(AllocationTable table) : table_(std::move(table)) {}

    std::size_t select(std::size_t state, const VisitStats& stats, Rng&) override {
        return tracking_select(table_.b.row(state), stats.counts_row(state));
    }

private:
    AllocationTable table_;
};

class CbVarPolicy final : public BehaviorPolicy {
public:
    CbVarPolicy(const TargetPolicy& policy, const CbVarConfig& cfg) : policy_(policy), cfg_(cfg) {
        cfg_.validate();
    }

    std::size_t select(std::size_t state, const VisitStats& stats, Rng&) override {
        return cbvar_select(state, stats, policy_, cfg_);
    }

private:
    const TargetPolicy& policy_;
    CbVarConfig cfg_;
};

} // namespace

RevarPolicy::RevarPolicy(const MdpSpec& mdp, const TargetPolicy& policy, const RevarConfig& cfg)
    : mdp_(mdp),
      policy_(policy),
      cfg_(cfg),
      log_term_(0.0),
      b_(mdp.state_count(), mdp.action_count, 1.0 / static_cast<double>(mdp.action_count)),
      sigma_upper_(mdp.state_count(), mdp.action_count),
      p_hat_(mdp.transitions) {
    cfg_.validate();
    log_term_ = confidence_log(mdp.state_count(), mdp.action_count, cfg_.total_budget_n, cfg_.delta);
}

std::size_t RevarPolicy::select(std::size_t state, const VisitStats& stats, Rng&) {
    const auto counts = stats.counts_row(state);
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] == 0) return a;
    }
    return tracking_select(b_.row(state), counts);
}

void RevarPolicy::end_of_episode(const VisitStats& stats) {
    const double bonus_scale = 2.0 * cfg_.c * std::sqrt(log_term_);
    for (std::size_t s = 0; s < mdp_.state_count(); ++s) {
        for (std::size_t a = 0; a < mdp_.action_count; ++a) {
            const auto n = stats.count(s, a);
            // An unvisited pair is bounded as if it had one sample with zero spread.
            const double visits = n == 0 ? 1.0 : static_cast<double>(n);
            sigma_upper_(s, a) = plugin_sigma(stats, s, a) + bonus_scale / std::sqrt(visits);
            for (auto& next : p_hat_[mdp_.sa(s, a)]) {
                next.prob = plugin_transition(stats, s, a, next.state);
            }
        }
    }
    refresh(sigma_upper_, p_hat_);
}

void RevarPolicy::refresh(const SaTable& sigma_upper, const TransitionTable& transitions) {
    AllocationTable table = mdp_.structure == StructureKind::Tree
                                ? tree_allocation(mdp_, policy_, sigma_upper, transitions)
                                : dag_allocation(mdp_, policy_, sigma_upper, transitions);
    b_ = std::move(table.b);
    weight_ = std::move(table.weight);
    bigB_ = std::move(table.bigB);
}

std::unique_ptr<BehaviorPolicy> make_onpolicy(const TargetPolicy& policy) {
    return std::make_unique<OnPolicy>(policy);
}

std::unique_ptr<BehaviorPolicy> make_tracking_policy(AllocationTable table) {
    return std::make_unique<TrackingPolicy>(std::move(table));
}

std::unique_ptr<BehaviorPolicy> oracle_policy(const MdpSpec& mdp, const TargetPolicy& policy) {
    return make_tracking_policy(oracle_allocation(mdp, policy));
}

std::unique_ptr<BehaviorPolicy> revar_policy(const MdpSpec& mdp, const TargetPolicy& policy,
                                             const RevarConfig& cfg) {
    return std::make_unique<RevarPolicy>(mdp, policy, cfg);
}

std::unique_ptr<BehaviorPolicy> cbvar_policy(const TargetPolicy& policy, const CbVarConfig& cfg) {
    return std::make_unique<CbVarPolicy>(policy, cfg);
}

} // namespace revar
