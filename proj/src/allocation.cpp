#include "revar/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace revar {

namespace {

// Fills `weights` for state s from the B values of its successors and
// returns their sum. Shared by the tree pass and the DAG sweeps so both
// produce bit-identical numbers on tree inputs.
template <class BOf>
double state_weights(const MdpSpec& mdp, const TargetPolicy& policy, const SaTable& sigma,
                     const TransitionTable& transitions, std::size_t s, BOf&& b_of,
                     std::span<double> weights) {
    const double gamma2 = mdp.gamma * mdp.gamma;
    double total = 0.0;
    for (std::size_t a = 0; a < mdp.action_count; ++a) {
        double downstream = 0.0;
        for (const auto& next : transitions[mdp.sa(s, a)]) {
            const double B = b_of(next.state);
            downstream += next.prob * B * B;
        }
        const double p = policy(s, a);
        const double sd = sigma(s, a);
        const double w = std::sqrt(p * p * (sd * sd + gamma2 * downstream));
        weights[a] = w;
        total += w;
    }
    return total;
}

AllocationTable normalize_table(const MdpSpec& mdp, const TargetPolicy& policy, SaTable weight,
                                std::vector<double> bigB) {
    AllocationTable out;
    out.b = SaTable(mdp.state_count(), mdp.action_count);
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        const auto row = normalize_weights(weight.row(s), policy.row(s));
        std::copy(row.begin(), row.end(), out.b.row(s).begin());
    }
    out.weight = std::move(weight);
    out.bigB = std::move(bigB);
    return out;
}

} // namespace

std::vector<double> normalize_weights(std::span<const double> weights,
                                      std::span<const double> pi_row) {
    std::vector<double> out(weights.begin(), weights.end());
    double total = 0.0;
    for (double& w : out) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("normalize_weights: weights must be finite and >= 0");
        }
        if (w < kWeightFloor) w = 0.0;
        total += w;
    }
    if (total > 0.0) {
        for (double& w : out) w /= total;
        return out;
    }
    std::size_t support = 0;
    for (std::size_t a = 0; a < out.size(); ++a) support += (a < pi_row.size() && pi_row[a] > 0.0);
    for (std::size_t a = 0; a < out.size(); ++a) {
        if (support == 0) {
            out[a] = 1.0 / static_cast<double>(out.size());
        } else {
            out[a] = (a < pi_row.size() && pi_row[a] > 0.0) ? 1.0 / static_cast<double>(support) : 0.0;
        }
    }
    return out;
}

std::vector<double> bandit_allocation(std::span<const double> pi_row,
                                      std::span<const double> sigma_row) {
    if (pi_row.size() != sigma_row.size()) {
        throw std::invalid_argument("bandit_allocation: pi and sigma lengths differ");
    }
    std::vector<double> weights(pi_row.size());
    for (std::size_t a = 0; a < pi_row.size(); ++a) {
        if (sigma_row[a] < 0.0) throw std::invalid_argument("bandit_allocation: negative sigma");
        weights[a] = pi_row[a] * sigma_row[a];
    }
    return normalize_weights(weights, pi_row);
}

SaTable true_sigma(const MdpSpec& mdp) {
    SaTable sigma(mdp.state_count(), mdp.action_count);
    for (std::size_t i = 0; i < sigma.data().size(); ++i) {
        sigma.data()[i] = std::sqrt(mdp.reward_var.data()[i]);
    }
    return sigma;
}

AllocationTable tree_oracle_allocation(const MdpSpec& mdp, const TargetPolicy& policy) {
    const auto parents = parent_counts(mdp);
    if (std::any_of(parents.begin(), parents.end(), [](std::size_t p) { return p > 1; })) {
        throw std::invalid_argument(
            "tree_oracle_allocation: a state has multiple parents; use dag_allocation");
    }
    return tree_allocation(mdp, policy, true_sigma(mdp), mdp.transitions);
}

AllocationTable tree_allocation(const MdpSpec& mdp, const TargetPolicy& policy,
                                const SaTable& sigma, const TransitionTable& transitions) {
    const std::size_t S = mdp.state_count();
    SaTable weight(S, mdp.action_count);
    std::vector<double> bigB(S, 0.0);
    // Level-major storage: every successor has a larger flat id.
    for (std::size_t s = S; s-- > 0;) {
        bigB[s] = state_weights(mdp, policy, sigma, transitions, s,
                                [&](std::size_t next) { return bigB[next]; }, weight.row(s));
    }
    return normalize_table(mdp, policy, std::move(weight), std::move(bigB));
}

std::vector<double> dag_B_iteration(const MdpSpec& mdp, const TargetPolicy& policy,
                                    const SaTable& sigma, const TransitionTable& transitions) {
    const std::size_t S = mdp.state_count();
    const auto L = static_cast<std::size_t>(mdp.horizon);
    // B[t] for t = 0 .. L; B[L] stays zero.
    std::vector<std::vector<double>> B(L + 1, std::vector<double>(S, 0.0));
    std::vector<double> scratch(mdp.action_count);
    for (std::size_t t = L; t-- > 0;) {
        const auto& later = B[t + 1];
        for (std::size_t s = 0; s < S; ++s) {
            B[t][s] = state_weights(mdp, policy, sigma, transitions, s,
                                    [&](std::size_t next) { return later[next]; }, scratch);
        }
    }
    return std::move(B[0]);
}

AllocationTable dag_allocation(const MdpSpec& mdp, const TargetPolicy& policy,
                               const SaTable& sigma, const TransitionTable& transitions) {
    std::vector<double> B0 = dag_B_iteration(mdp, policy, sigma, transitions);
    SaTable weight(mdp.state_count(), mdp.action_count);
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        state_weights(mdp, policy, sigma, transitions, s,
                      [&](std::size_t next) { return B0[next]; }, weight.row(s));
    }
    return normalize_table(mdp, policy, std::move(weight), std::move(B0));
}

AllocationTable oracle_allocation(const MdpSpec& mdp, const TargetPolicy& policy) {
    if (mdp.structure == StructureKind::Tree) return tree_oracle_allocation(mdp, policy);
    return dag_allocation(mdp, policy, true_sigma(mdp), mdp.transitions);
}

double oracle_loss(const MdpSpec& mdp, const TargetPolicy& policy, const AllocationTable& alloc,
                   std::span<const double> state_counts) {
    if (state_counts.size() != mdp.state_count()) {
        throw std::invalid_argument("oracle_loss: one count per state required");
    }
    const auto reach = discounted_reach(mdp, policy);
    double loss = 0.0;
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        if (reach[s] == 0.0) continue;
        if (!(state_counts[s] > 0.0)) {
            throw std::domain_error("oracle_loss: zero count for reachable state " +
                                    std::to_string(s));
        }
        for (std::size_t a = 0; a < mdp.action_count; ++a) {
            const double p = policy(s, a);
            const double numerator = reach[s] * reach[s] * p * p * mdp.reward_var(s, a);
            if (numerator == 0.0) continue;
            const double b = alloc.b(s, a);
            if (!(b > 0.0)) {
                throw std::domain_error("oracle_loss: zero proportion for a sampled-variance action");
            }
            loss += numerator / (b * state_counts[s]);
        }
    }
    return loss;
}

double oracle_loss_bound(const MdpSpec& mdp, const TargetPolicy& policy,
                         const AllocationTable& alloc, std::span<const double> state_counts) {
    if (state_counts.size() != mdp.state_count()) {
        throw std::invalid_argument("oracle_loss_bound: one count per state required");
    }
    const auto reach = discounted_reach(mdp, policy);
    const double gamma2 = mdp.gamma * mdp.gamma;
    std::vector<double> bound(mdp.state_count(), 0.0);
    for (std::size_t s = mdp.state_count(); s-- > 0;) {
        if (reach[s] == 0.0) continue;
        if (!(state_counts[s] > 0.0)) {
            throw std::domain_error("oracle_loss_bound: zero count for reachable state " +
                                    std::to_string(s));
        }
        double u = alloc.bigB[s] * alloc.bigB[s] / state_counts[s];
        for (std::size_t a = 0; a < mdp.action_count; ++a) {
            const double p = policy(s, a);
            for (const auto& next : mdp.successors(s, a)) {
                u += gamma2 * p * p * next.prob * bound[next.state];
            }
        }
        bound[s] = u;
    }
    return bound[0];
}

double tree2_objective(const MdpSpec& mdp, const TargetPolicy& policy, const SaTable& b) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    auto ratio = [&](double numerator, double denominator) {
        if (numerator == 0.0) return 0.0;
        return denominator > 0.0 ? numerator / denominator : kInf;
    };
    const double gamma2 = mdp.gamma * mdp.gamma;
    double total = 0.0;
    for (std::size_t a = 0; a < mdp.action_count; ++a) {
        const double p = policy(0, a);
        total += ratio(p * p * mdp.reward_var(0, a), b(0, a));
        for (const auto& child : mdp.successors(0, a)) {
            for (std::size_t a2 = 0; a2 < mdp.action_count; ++a2) {
                const double q = policy(child.state, a2);
                const double numerator =
                    gamma2 * p * p * child.prob * q * q * mdp.reward_var(child.state, a2);
                total += ratio(numerator, b(0, a) * b(child.state, a2));
            }
        }
    }
    return total;
}

AllocationTable brute_force_allocation(const MdpSpec& mdp, const TargetPolicy& policy) {
    const std::size_t A = mdp.action_count;
    const auto parents = parent_counts(mdp);
    const auto leaves = states_at_level(mdp, mdp.horizon);
    if (mdp.horizon > 2 || A > 3 || (mdp.horizon == 2 && leaves.size() > 4) ||
        std::any_of(parents.begin(), parents.end(), [](std::size_t p) { return p > 1; })) {
        throw std::invalid_argument(
            "brute_force_allocation: needs a tree of depth <= 2, <= 3 actions, <= 4 leaves");
    }

    AllocationTable out;
    out.b = SaTable(mdp.state_count(), A, 1.0 / static_cast<double>(A));

    // Golden-section search for the mass t moved from action j to action i,
    // t in [-b_i, b_j]. The objective is convex along this segment.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto line_search = [&](std::size_t s, std::size_t i, std::size_t j) {
        const double bi = out.b(s, i);
        const double bj = out.b(s, j);
        auto f = [&](double t) {
            out.b(s, i) = bi + t;
            out.b(s, j) = bj - t;
            return tree2_objective(mdp, policy, out.b);
        };
        double lo = -bi;
        double hi = bj;
        double x1 = hi - inv_phi * (hi - lo);
        double x2 = lo + inv_phi * (hi - lo);
        double f1 = f(x1);
        double f2 = f(x2);
        while (hi - lo > 1e-14) {
            if (f1 <= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = f(x2);
            }
        }
        double best = 0.5 * (lo + hi);
        // Near the optimum the objective is flat to rounding; only accept a
        // move that improves it by more than that.
        const double f_best = f(best);
        const double f_zero = f(0.0);
        if (!(f_best < f_zero - 1e-13 * std::abs(f_zero))) best = 0.0;
        out.b(s, i) = bi + best;
        out.b(s, j) = bj - best;
        return std::abs(best);
    };

    std::vector<std::size_t> blocks{0};
    if (mdp.horizon == 2) blocks.insert(blocks.end(), leaves.begin(), leaves.end());

    constexpr int kMaxSweeps = 20000;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double largest_move = 0.0;
        for (std::size_t s : blocks) {
            for (std::size_t i = 0; i < A; ++i) {
                for (std::size_t j = i + 1; j < A; ++j) {
                    largest_move = std::max(largest_move, line_search(s, i, j));
                }
            }
        }
        if (largest_move < 1e-10) {
            for (std::size_t s : blocks) {
                const auto row = normalize_weights(out.b.row(s), policy.row(s));
                std::copy(row.begin(), row.end(), out.b.row(s).begin());
            }
            return out;
        }
    }
    throw std::runtime_error("brute_force_allocation: no convergence within the sweep budget");
}

} // namespace revar
