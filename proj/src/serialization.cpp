#include "revar/serialization.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace revar {

using nlohmann::json;

std::string to_string(StructureKind kind) {
    return kind == StructureKind::Tree ? "tree" : "dag";
}

std::string to_string(RewardDist dist) {
    return dist == RewardDist::Gaussian ? "gaussian" : "truncated_gaussian";
}

StructureKind structure_from_string(const std::string& text) {
    if (text == "tree") return StructureKind::Tree;
    if (text == "dag") return StructureKind::Dag;
    throw ParseError("structure: expected \"tree\" or \"dag\", got \"" + text + "\"");
}

RewardDist reward_dist_from_string(const std::string& text) {
    if (text == "gaussian") return RewardDist::Gaussian;
    if (text == "truncated_gaussian") return RewardDist::TruncatedGaussian;
    throw ParseError("reward_dist: expected \"gaussian\" or \"truncated_gaussian\", got \"" + text +
                     "\"");
}

namespace {

json table_to_json(const SaTable& table) {
    json rows = json::array();
    for (std::size_t s = 0; s < table.states(); ++s) {
        const auto row = table.row(s);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return rows;
}

const json& field(const json& doc, const char* name) {
    const auto it = doc.find(name);
    if (it == doc.end()) throw ParseError(std::string("missing field \"") + name + "\"");
    return *it;
}

template <class T>
T get_as(const json& value, const std::string& where) {
    try {
        return value.get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
}

SaTable table_from_json(const json& doc, const char* name, std::size_t states,
                        std::size_t actions) {
    const json& rows = field(doc, name);
    if (!rows.is_array() || rows.size() != states) {
        throw ParseError(std::string(name) + ": expected " + std::to_string(states) + " rows");
    }
    SaTable table(states, actions);
    for (std::size_t s = 0; s < states; ++s) {
        const auto where = std::string(name) + "[" + std::to_string(s) + "]";
        const auto row = get_as<std::vector<double>>(rows[s], where);
        if (row.size() != actions) {
            throw ParseError(where + ": expected " + std::to_string(actions) + " entries");
        }
        std::copy(row.begin(), row.end(), table.row(s).begin());
    }
    return table;
}

} // namespace

json to_json(const Environment& env) {
    const MdpSpec& mdp = env.mdp;
    json doc;
    doc["structure"] = to_string(mdp.structure);
    doc["gamma"] = mdp.gamma;
    doc["horizon"] = mdp.horizon;
    doc["action_count"] = mdp.action_count;
    doc["reward_dist"] = to_string(mdp.reward_dist);
    json levels = json::array();
    for (const auto& id : mdp.states) levels.push_back({id.level, id.index});
    doc["levels"] = std::move(levels);
    json transitions = json::array();
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        for (std::size_t a = 0; a < mdp.action_count; ++a) {
            for (const auto& next : mdp.successors(s, a)) {
                transitions.push_back({s, a, next.state, next.prob});
            }
        }
    }
    doc["transitions"] = std::move(transitions);
    doc["reward_mean"] = table_to_json(mdp.reward_mean);
    doc["reward_var"] = table_to_json(mdp.reward_var);
    doc["policy"] = table_to_json(env.policy.pi);
    return doc;
}

Environment environment_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("environment: expected a JSON object");
    Environment env;
    MdpSpec& mdp = env.mdp;
    mdp.structure = structure_from_string(get_as<std::string>(field(doc, "structure"), "structure"));
    mdp.gamma = get_as<double>(field(doc, "gamma"), "gamma");
    mdp.horizon = get_as<int>(field(doc, "horizon"), "horizon");
    mdp.action_count = get_as<std::size_t>(field(doc, "action_count"), "action_count");
    if (doc.contains("reward_dist")) {
        mdp.reward_dist =
            reward_dist_from_string(get_as<std::string>(doc["reward_dist"], "reward_dist"));
    }
    if (mdp.action_count == 0) throw ParseError("action_count: must be >= 1");

    const auto levels = get_as<std::vector<std::array<int, 2>>>(field(doc, "levels"), "levels");
    for (const auto& [level, index] : levels) mdp.states.push_back({level, index});
    const std::size_t S = mdp.state_count();
    const std::size_t A = mdp.action_count;

    mdp.transitions.assign(S * A, {});
    const json& rows = field(doc, "transitions");
    if (!rows.is_array()) throw ParseError("transitions: expected an array");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto where = "transitions[" + std::to_string(i) + "]";
        const json& row = rows[i];
        if (!row.is_array() || row.size() != 4) throw ParseError(where + ": expected [s, a, s', p]");
        const auto s = get_as<std::size_t>(row[0], where + ".s");
        const auto a = get_as<std::size_t>(row[1], where + ".a");
        const auto next = get_as<std::size_t>(row[2], where + ".s'");
        const auto p = get_as<double>(row[3], where + ".p");
        if (s >= S || a >= A || next >= S) throw ParseError(where + ": index out of range");
        mdp.transitions[mdp.sa(s, a)].push_back({next, p});
    }
    mdp.reward_mean = table_from_json(doc, "reward_mean", S, A);
    mdp.reward_var = table_from_json(doc, "reward_var", S, A);
    env.policy.pi = table_from_json(doc, "policy", S, A);
    return env;
}

std::string dump_environment(const Environment& env, int indent) {
    return to_json(env).dump(indent);
}

json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) +
                         ": " + e.what());
    }
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_json_text(buffer.str(), path.string());
}

void require_valid(const ValidationReport& report, const std::string& origin) {
    if (report.empty()) return;
    std::string message = origin + ": invalid environment";
    for (const auto& v : report) message += "\n  " + to_string(v.kind) + ": " + v.message;
    throw ParseError(message);
}

Environment load_environment_file(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    Environment env;
    try {
        env = environment_from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    require_valid(validate(env.mdp, env.policy), path.string());
    return env;
}

} // namespace revar
