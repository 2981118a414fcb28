#pragma once

#include "revar/experiments.hpp"
#include "revar/serialization.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace revar {

enum class Subcommand { Run, Ablate, Allocate, Validate };

struct CliInvocation {
    Subcommand subcommand = Subcommand::Run;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::filesystem::path output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> csv_path;
    std::optional<std::filesystem::path> json_path;
    std::vector<double> c_values = kDefaultAblationGrid;
};

/// Raised by parse_cli. exit_code is 0 for --help, nonzero for errors;
/// what() holds the text to print.
class CliExit : public std::runtime_error {
public:
    CliExit(int code, const std::string& text) : std::runtime_error(text), exit_code(code) {}
    int exit_code;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "REVAR_OUTPUT_DIR";

/// Keys accepted by --set.
const std::vector<std::string>& override_keys();

/// Parses the command line (without the program name). Unknown flags,
/// a missing --config and malformed or unknown overrides raise CliExit.
CliInvocation parse_cli(const std::vector<std::string>& args);

/// An experiment config together with its resolved environment.
struct LoadedConfig {
    ExperimentConfig config;
    Environment environment;
};

/// Loads `name_or_path`: the built-in names "tree4" and "gridworld", a
/// config document, or a bare environment document (run with the default
/// policies). Overrides are applied before validation. Throws ParseError
/// with a field or line/column diagnostic on malformed input and with the
/// list of violations when the environment is invalid.
LoadedConfig load_config(const std::string& name_or_path,
                         const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Builds a config from an already parsed document; `base_dir` resolves
/// relative environment paths.
LoadedConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Normalized JSON form of a config; config_from_json reads it back.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

nlohmann::json allocation_to_json(const MdpSpec& mdp, const AllocationTable& table);

/// CSV with columns policy,episode,mse_mean,mse_stderr,regret_mean.
void write_csv(std::ostream& out, const std::vector<ExperimentResult>& results);

/// Full metadata: effective config, environment, seeds, curves and wall time.
nlohmann::json result_to_json(const ExperimentResult& result);

/// Runs the tool; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace revar
