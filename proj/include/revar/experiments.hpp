#pragma once

#include "revar/estimation.hpp"
#include "revar/mdp.hpp"
#include "revar/policies.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace revar {

/// Plays one episode from the root. Each step asks `policy` for an action,
/// draws the reward from `reward_dist`, records it in `stats` before the
/// next selection, and samples the successor. end_of_episode is called
/// once the whole trajectory is recorded.
Trajectory run_episode(const MdpSpec& mdp, BehaviorPolicy& policy, VisitStats& stats, Rng& rng);

/// Draws one reward with mean `mu` and variance `var`.
double draw_reward(double mu, double var, RewardDist dist, Rng& rng);

enum class EnvironmentKind { Tree4, Gridworld, Custom };

struct EnvironmentSpec {
    EnvironmentKind kind = EnvironmentKind::Tree4;
    double noise = 0.1;
    int horizon = 8;
    std::string path;

    bool operator==(const EnvironmentSpec&) const = default;
};

/// Builds or loads the environment described by `spec`.
Environment make_environment(const EnvironmentSpec& spec);

enum class PolicyKind { OnPolicy, Oracle, Revar, CbVar };

std::string to_string(PolicyKind kind);
std::string to_string(EstimationMode mode);

struct PolicySpec {
    PolicyKind kind = PolicyKind::OnPolicy;
    RevarConfig revar;
    CbVarConfig cbvar;
    /// Unset means the default for the environment's structure.
    std::optional<EstimationMode> estimation;
    /// Column label in the results; defaults to the kind name.
    std::string label;
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    std::vector<PolicySpec> policies;
    std::uint64_t episodes = 10000;
    std::uint64_t trials = 100;
    std::uint64_t base_seed = 0;
    /// Episode counts at which MSE is recorded; empty means default_eval_points.
    std::vector<std::uint64_t> eval_points;
    /// Overrides the environment's reward distribution when set.
    std::optional<RewardDist> reward_dist;
    /// Worker threads; 0 picks the hardware concurrency.
    unsigned threads = 0;

    /// Throws std::invalid_argument describing the first bad field.
    void validate() const;
};

/// Powers of two up to K, followed by K itself.
std::vector<std::uint64_t> default_eval_points(std::uint64_t episodes);

/// KnownModel for the Oracle on tree environments, EmpiricalModel otherwise.
EstimationMode default_estimation(PolicyKind kind, StructureKind structure);

/// The four policies of the main comparison with default settings.
std::vector<PolicySpec> default_policies();

/// Seed of the RNG stream for one (base seed, trial, policy kind).
/// The stream depends on the kind, not the label or list position.
std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t trial, PolicyKind kind);

struct CurvePoint {
    std::uint64_t episode = 0;
    double mse_mean = 0.0;
    double mse_stderr = 0.0;
    /// mse_mean minus the mean oracle loss at the paired oracle's realized
    /// counts. NaN when that loss is undefined in any trial.
    double regret_mean = 0.0;
};

struct PolicyCurve {
    PolicySpec spec;
    EstimationMode estimation = EstimationMode::EmpiricalModel;
    std::vector<CurvePoint> points;
    /// Squared error per trial and eval point.
    std::vector<std::vector<double>> trial_sq_errors;
    std::vector<std::uint64_t> seeds;
};

struct ExperimentResult {
    ExperimentConfig config;
    Environment environment;
    double true_value = 0.0;
    std::vector<std::uint64_t> eval_points;
    /// Mean oracle loss per eval point (NaN where undefined).
    std::vector<double> oracle_loss_mean;
    std::vector<PolicyCurve> curves;
    double wall_seconds = 0.0;
};

/// Runs every policy for M trials of K episodes. Throws std::invalid_argument
/// when the config is invalid.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Same as above on an already built environment; cfg.environment is only echoed.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Environment& env);

inline const std::vector<double> kDefaultAblationGrid{0.0, 0.1, 1.0, 10.0};

/// One experiment per value of c. The ReVar entries of base_cfg get the new
/// c and a "ReVar(c=...)" label; everything else is held fixed. Throws
/// std::invalid_argument when base_cfg has no ReVar policy.
std::vector<ExperimentResult> run_ablation(const std::vector<double>& c_values,
                                           const ExperimentConfig& base_cfg);
std::vector<ExperimentResult> run_ablation(const std::vector<double>& c_values,
                                           const ExperimentConfig& base_cfg,
                                           const Environment& env);

/// "ReVar(c=1)" style label.
std::string ablation_label(double c);

} // namespace revar
