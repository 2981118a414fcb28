#include "revar/experiments.hpp"

#include "revar/allocation.hpp"
#include "revar/serialization.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace revar {

double draw_reward(double mu, double var, RewardDist dist, Rng& rng) {
    if (var <= 0.0) return mu;
    const double sd = std::sqrt(var);
    std::normal_distribution<double> noise(mu, sd);
    const double r = noise(rng);
    if (dist == RewardDist::TruncatedGaussian) return std::clamp(r, mu - 6.0 * sd, mu + 6.0 * sd);
    return r;
}

namespace {

std::size_t sample_successor(std::span<const Successor> row, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cumulative = 0.0;
    std::size_t chosen = row.front().state;
    for (const auto& next : row) {
        if (next.prob <= 0.0) continue;
        chosen = next.state;
        cumulative += next.prob;
        if (u < cumulative) break;
    }
    return chosen;
}

} // namespace

Trajectory run_episode(const MdpSpec& mdp, BehaviorPolicy& policy, VisitStats& stats, Rng& rng) {
    Trajectory traj;
    traj.reserve(static_cast<std::size_t>(mdp.horizon));
    std::size_t s = 0;
    while (true) {
        const std::size_t a = policy.select(s, stats, rng);
        const double r = draw_reward(mdp.reward_mean(s, a), mdp.reward_var(s, a), mdp.reward_dist, rng);
        stats.record_step(s, a, r);
        traj.push_back({s, a, r});
        if (mdp.is_leaf(s)) break;
        const std::size_t next = sample_successor(mdp.successors(s, a), rng);
        stats.record_transition(s, a, next);
        s = next;
    }
    policy.end_of_episode(stats);
    return traj;
}

Environment make_environment(const EnvironmentSpec& spec) {
    switch (spec.kind) {
    case EnvironmentKind::Tree4: return build_tree4();
    case EnvironmentKind::Gridworld: return build_gridworld(spec.noise, spec.horizon);
    case EnvironmentKind::Custom:
        if (spec.path.empty()) throw std::invalid_argument("custom environment needs a path");
        return load_environment_file(spec.path);
    }
    throw std::invalid_argument("unknown environment kind");
}

std::string to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::OnPolicy: return "OnPolicy";
    case PolicyKind::Oracle: return "Oracle";
    case PolicyKind::Revar: return "ReVar";
    case PolicyKind::CbVar: return "CB-Var";
    }
    return "?";
}

std::string to_string(EstimationMode mode) {
    return mode == EstimationMode::KnownModel ? "known_model" : "empirical_model";
}

void ExperimentConfig::validate() const {
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (policies.empty()) throw std::invalid_argument("at least one policy is required");
    for (std::size_t i = 0; i < eval_points.size(); ++i) {
        if (eval_points[i] < 1 || eval_points[i] > episodes) {
            throw std::invalid_argument("eval_points must lie in [1, episodes]");
        }
        if (i > 0 && eval_points[i] <= eval_points[i - 1]) {
            throw std::invalid_argument("eval_points must be strictly increasing");
        }
    }
    if (environment.kind == EnvironmentKind::Gridworld &&
        (environment.horizon < 7 || !(environment.noise >= 0.0 && environment.noise < 1.0))) {
        throw std::invalid_argument("gridworld needs horizon >= 7 and noise in [0, 1)");
    }
    for (const auto& p : policies) {
        if (p.kind == PolicyKind::Revar) p.revar.validate();
        if (p.kind == PolicyKind::CbVar) p.cbvar.validate();
    }
}

std::vector<std::uint64_t> default_eval_points(std::uint64_t episodes) {
    std::vector<std::uint64_t> points;
    for (std::uint64_t k = 1; k < episodes; k *= 2) points.push_back(k);
    points.push_back(episodes);
    return points;
}

EstimationMode default_estimation(PolicyKind kind, StructureKind structure) {
    return kind == PolicyKind::Oracle && structure == StructureKind::Tree
               ? EstimationMode::KnownModel
               : EstimationMode::EmpiricalModel;
}

std::vector<PolicySpec> default_policies() {
    std::vector<PolicySpec> out(4);
    out[0].kind = PolicyKind::OnPolicy;
    out[1].kind = PolicyKind::Oracle;
    out[2].kind = PolicyKind::Revar;
    out[3].kind = PolicyKind::CbVar;
    for (auto& p : out) p.label = to_string(p.kind);
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t kind_tag(PolicyKind kind) {
    // FNV-1a of the kind name, stable across platforms.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : to_string(kind)) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct TrialOutput {
    std::vector<double> sq_errors;
    std::vector<double> oracle_loss;
};

class Runner {
public:
    Runner(const ExperimentConfig& cfg, const Environment& env, std::vector<std::uint64_t> points)
        : cfg_(cfg), env_(env), points_(std::move(points)) {
        truth_ = value_exact(env_.mdp, env_.policy).root_value;
        oracle_ = oracle_allocation(env_.mdp, env_.policy);
        const auto n = cfg_.episodes * static_cast<std::uint64_t>(env_.mdp.horizon);
        for (const auto& p : cfg_.policies) {
            PolicySpec spec = p;
            spec.revar.total_budget_n = n;
            spec.cbvar.total_budget_n = n;
            if (spec.label.empty()) spec.label = to_string(spec.kind);
            specs_.push_back(std::move(spec));
            modes_.push_back(
                p.estimation.value_or(default_estimation(p.kind, env_.mdp.structure)));
        }
        const auto it = std::find_if(specs_.begin(), specs_.end(),
                                     [](const PolicySpec& p) { return p.kind == PolicyKind::Oracle; });
        reference_ = it == specs_.end() ? specs_.size()
                                        : static_cast<std::size_t>(it - specs_.begin());
    }

    double truth() const { return truth_; }
    const std::vector<PolicySpec>& specs() const { return specs_; }
    const std::vector<EstimationMode>& modes() const { return modes_; }

    // Runs every policy for one trial. The last entry holds the oracle loss
    // of the paired oracle run.
    std::vector<TrialOutput> run_trial(std::uint64_t trial) const {
        std::vector<TrialOutput> out(specs_.size());
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            out[i] = run_policy(specs_[i], modes_[i], trial, i == reference_);
        }
        if (reference_ == specs_.size()) {
            PolicySpec oracle;
            oracle.kind = PolicyKind::Oracle;
            out.push_back(run_policy(oracle, EstimationMode::KnownModel, trial, true));
        } else {
            out.push_back(out[reference_]);
        }
        return out;
    }

private:
    std::unique_ptr<BehaviorPolicy> make_policy(const PolicySpec& spec) const {
        switch (spec.kind) {
        case PolicyKind::OnPolicy: return make_onpolicy(env_.policy);
        case PolicyKind::Oracle: return make_tracking_policy(oracle_);
        case PolicyKind::Revar: return revar_policy(env_.mdp, env_.policy, spec.revar);
        case PolicyKind::CbVar: return cbvar_policy(env_.policy, spec.cbvar);
        }
        throw std::invalid_argument("unknown policy kind");
    }

    TrialOutput run_policy(const PolicySpec& spec, EstimationMode mode, std::uint64_t trial,
                           bool track_loss) const {
        TrialOutput out;
        Rng rng(stream_seed(cfg_.base_seed, trial, spec.kind));
        VisitStats stats(env_.mdp);
        auto policy = make_policy(spec);
        std::size_t next_point = 0;
        std::vector<double> counts(env_.mdp.state_count());
        for (std::uint64_t k = 1; k <= cfg_.episodes && next_point < points_.size(); ++k) {
            run_episode(env_.mdp, *policy, stats, rng);
            if (k != points_[next_point]) continue;
            ++next_point;
            const auto est = certainty_equivalence(stats, env_.mdp, env_.policy, mode);
            const double err = est.y_root - truth_;
            out.sq_errors.push_back(err * err);
            if (!track_loss) continue;
            for (std::size_t s = 0; s < counts.size(); ++s) {
                counts[s] = static_cast<double>(stats.state_visits(s));
            }
            try {
                out.oracle_loss.push_back(oracle_loss(env_.mdp, env_.policy, oracle_, counts));
            } catch (const std::domain_error&) {
                out.oracle_loss.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        return out;
    }

    const ExperimentConfig& cfg_;
    const Environment& env_;
    std::vector<std::uint64_t> points_;
    double truth_ = 0.0;
    AllocationTable oracle_;
    std::vector<PolicySpec> specs_;
    std::vector<EstimationMode> modes_;
    std::size_t reference_ = 0;
};

} // namespace

std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t trial, PolicyKind kind) {
    return splitmix64(splitmix64(splitmix64(base_seed) ^ trial) ^ kind_tag(kind));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    return run_experiment(cfg, make_environment(cfg.environment));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Environment& base_env) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();

    ExperimentResult result;
    result.config = cfg;
    result.environment = base_env;
    if (cfg.reward_dist) result.environment.mdp.reward_dist = *cfg.reward_dist;
    require_valid(validate(result.environment.mdp, result.environment.policy), "environment");
    result.eval_points = cfg.eval_points.empty() ? default_eval_points(cfg.episodes) : cfg.eval_points;

    const Runner runner(cfg, result.environment, result.eval_points);
    result.true_value = runner.truth();

    const std::size_t M = static_cast<std::size_t>(cfg.trials);
    std::vector<std::vector<TrialOutput>> outputs(M);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    const unsigned workers = std::max(
        1U, std::min<unsigned>(cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads,
                               static_cast<unsigned>(M)));
    {
        std::vector<std::jthread> pool;
        std::mutex failure_mutex;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t m = next++; m < M && !failed; m = next++) {
                    try {
                        outputs[m] = runner.run_trial(m);
                    } catch (...) {
                        const std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);

    const std::size_t E = result.eval_points.size();
    const std::size_t P = runner.specs().size();
    result.oracle_loss_mean.assign(E, 0.0);
    for (std::size_t e = 0; e < E; ++e) {
        double total = 0.0;
        for (std::size_t m = 0; m < M; ++m) total += outputs[m][P].oracle_loss[e];
        result.oracle_loss_mean[e] = total / static_cast<double>(M);
    }
    for (std::size_t i = 0; i < P; ++i) {
        PolicyCurve curve;
        curve.spec = runner.specs()[i];
        curve.estimation = runner.modes()[i];
        for (std::size_t m = 0; m < M; ++m) {
            curve.trial_sq_errors.push_back(outputs[m][i].sq_errors);
            curve.seeds.push_back(stream_seed(cfg.base_seed, m, curve.spec.kind));
        }
        for (std::size_t e = 0; e < E; ++e) {
            double sum = 0.0;
            for (std::size_t m = 0; m < M; ++m) sum += curve.trial_sq_errors[m][e];
            const double mean = sum / static_cast<double>(M);
            double ss = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
                const double d = curve.trial_sq_errors[m][e] - mean;
                ss += d * d;
            }
            CurvePoint point;
            point.episode = result.eval_points[e];
            point.mse_mean = mean;
            point.mse_stderr =
                M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
            point.regret_mean = mean - result.oracle_loss_mean[e];
            curve.points.push_back(point);
        }
        result.curves.push_back(std::move(curve));
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::string ablation_label(double c) {
    std::ostringstream out;
    out << "ReVar(c=" << c << ")";
    return out.str();
}

std::vector<ExperimentResult> run_ablation(const std::vector<double>& c_values,
                                           const ExperimentConfig& base_cfg) {
    const bool has_revar =
        std::any_of(base_cfg.policies.begin(), base_cfg.policies.end(),
                    [](const PolicySpec& p) { return p.kind == PolicyKind::Revar; });
    if (!has_revar) throw std::invalid_argument("run_ablation: the config has no ReVar policy");
    base_cfg.validate();
    return run_ablation(c_values, base_cfg, make_environment(base_cfg.environment));
}

std::vector<ExperimentResult> run_ablation(const std::vector<double>& c_values,
                                           const ExperimentConfig& base_cfg,
                                           const Environment& env) {
    const bool has_revar =
        std::any_of(base_cfg.policies.begin(), base_cfg.policies.end(),
                    [](const PolicySpec& p) { return p.kind == PolicyKind::Revar; });
    if (!has_revar) throw std::invalid_argument("run_ablation: the config has no ReVar policy");
    std::vector<ExperimentResult> results;
    for (const double c : c_values) {
        ExperimentConfig cfg = base_cfg;
        for (auto& p : cfg.policies) {
            if (p.kind != PolicyKind::Revar) continue;
            p.revar.c = c;
            p.label = ablation_label(c);
        }
        results.push_back(run_experiment(cfg, env));
    }
    return results;
}

} // namespace revar
