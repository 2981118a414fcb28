#pragma once

#include "revar/mdp.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace revar {

/// Raised for malformed documents. The message names the offending field
/// and, for syntax errors, the line and column.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string to_string(StructureKind kind);
std::string to_string(RewardDist dist);
StructureKind structure_from_string(const std::string& text);
RewardDist reward_dist_from_string(const std::string& text);

/// JSON form of an environment:
///
///   { "structure": "tree"|"dag", "gamma", "horizon", "action_count",
///     "reward_dist": "gaussian"|"truncated_gaussian",
///     "levels": [[level, index], ...],
///     "transitions": [[s, a, s', p], ...],
///     "reward_mean": [[...], ...], "reward_var": [[...], ...],
///     "policy": [[...], ...] }
nlohmann::json to_json(const Environment& env);

/// Inverse of to_json. Throws ParseError on missing or mistyped fields.
/// Does not run validate().
Environment environment_from_json(const nlohmann::json& doc);

/// Serializes with doubles printed in shortest round-trip form.
std::string dump_environment(const Environment& env, int indent = 2);

/// Reads a JSON document, reporting syntax errors with line and column.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Parses JSON text; `origin` prefixes error messages.
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);

/// Loads an environment file and validates it. Throws ParseError listing
/// every violation when the environment is invalid.
Environment load_environment_file(const std::filesystem::path& path);

/// Throws ParseError listing every violation when the report is non-empty.
void require_valid(const ValidationReport& report, const std::string& origin);

} // namespace revar
