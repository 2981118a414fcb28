#include "revar/cli.hpp"

#include "revar/allocation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace revar {

using nlohmann::json;

const std::vector<std::string>& override_keys() {
    static const std::vector<std::string> keys{
        "revar.c",  "revar.delta", "cbvar.eta",       "episodes",          "trials",
        "seed",     "threads",     "gridworld.noise", "gridworld.horizon", "reward_dist",
    };
    return keys;
}

CliInvocation parse_cli(const std::vector<std::string>& args) {
    CLI::App app{"Adaptive data collection for policy evaluation in layered MDPs", "revar"};
    app.require_subcommand(1, 1);

    CliInvocation inv;
    std::vector<std::string> sets;
    std::string output_dir = "results";
    std::uint64_t seed = 0;
    std::string csv;
    std::string json_out;

    auto add_common = [&](CLI::App* sub, bool experiment) {
        sub->add_option("-c,--config", inv.config_path,
                        "config or environment file, or a built-in name (tree4, gridworld)")
            ->required();
        sub->add_option("--set", sets, "override key=value (repeatable)");
        if (!experiment) return;
        sub->add_option("-s,--seed", seed, "base seed");
        sub->add_option("-o,--output-dir", output_dir, "directory for result files")
            ->envname(kOutputDirEnv);
        sub->add_option("--csv", csv, "CSV path (default <output-dir>/results.csv)");
        sub->add_option("--json", json_out, "JSON path (default <output-dir>/results.json)");
    };
    auto* run = app.add_subcommand("run", "run an experiment");
    add_common(run, true);
    auto* ablate = app.add_subcommand("ablate", "sweep the ReVar constant c");
    add_common(ablate, true);
    ablate->add_option("--c-values", inv.c_values, "grid of c values")->delimiter(',');
    auto* allocate = app.add_subcommand("allocate", "print the oracle allocation as JSON");
    add_common(allocate, false);
    auto* validate_cmd = app.add_subcommand("validate", "check an environment");
    add_common(validate_cmd, false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = app.exit(e, out, err);
        throw CliExit(code == 0 ? 0 : 2, out.str() + err.str());
    }

    if (run->parsed()) inv.subcommand = Subcommand::Run;
    if (ablate->parsed()) inv.subcommand = Subcommand::Ablate;
    if (allocate->parsed()) inv.subcommand = Subcommand::Allocate;
    if (validate_cmd->parsed()) inv.subcommand = Subcommand::Validate;

    const auto& keys = override_keys();
    for (const auto& item : sets) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw CliExit(2, "malformed override \"" + item + "\" (expected key=value)\n");
        }
        std::string key = item.substr(0, eq);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw CliExit(2, "unknown override key \"" + key + "\"\n");
        }
        inv.overrides.emplace_back(std::move(key), item.substr(eq + 1));
    }
    for (const auto* sub : {run, ablate}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed") > 0) inv.seed = seed;
        if (!csv.empty()) inv.csv_path = csv;
        if (!json_out.empty()) inv.json_path = json_out;
    }
    inv.output_dir = output_dir;
    return inv;
}

namespace {

std::string lower(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return text;
}

PolicyKind policy_kind_from_string(const std::string& text) {
    const std::string t = lower(text);
    if (t == "onpolicy") return PolicyKind::OnPolicy;
    if (t == "oracle") return PolicyKind::Oracle;
    if (t == "revar") return PolicyKind::Revar;
    if (t == "cbvar" || t == "cb-var") return PolicyKind::CbVar;
    throw ParseError("policies: unknown kind \"" + text + "\"");
}

std::string policy_kind_key(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::OnPolicy: return "onpolicy";
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Revar: return "revar";
    case PolicyKind::CbVar: return "cbvar";
    }
    return "?";
}

EstimationMode estimation_from_string(const std::string& text) {
    if (text == "known_model") return EstimationMode::KnownModel;
    if (text == "empirical_model") return EstimationMode::EmpiricalModel;
    throw ParseError("estimation: expected \"known_model\" or \"empirical_model\", got \"" + text +
                     "\"");
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* name) { return key == name; });
        if (!known) throw ParseError(where + ": unknown field \"" + key + "\"");
    }
}

template <class T>
T read(const json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + "." + key + ": " + e.what());
    }
}

template <class T>
void read_if(const json& obj, const char* key, const std::string& where, T& target) {
    if (obj.contains(key)) target = read<T>(obj, key, where);
}

PolicySpec policy_from_json(const json& item, std::size_t i) {
    const std::string where = "policies[" + std::to_string(i) + "]";
    PolicySpec spec;
    if (item.is_string()) {
        spec.kind = policy_kind_from_string(item.get<std::string>());
    } else if (item.is_object()) {
        reject_unknown(item, {"kind", "label", "estimation", "c", "delta", "eta"}, where);
        spec.kind = policy_kind_from_string(read<std::string>(item, "kind", where));
        read_if(item, "label", where, spec.label);
        if (item.contains("estimation")) {
            spec.estimation = estimation_from_string(read<std::string>(item, "estimation", where));
        }
        read_if(item, "c", where, spec.revar.c);
        read_if(item, "delta", where, spec.revar.delta);
        read_if(item, "eta", where, spec.cbvar.eta);
    } else {
        throw ParseError(where + ": expected a kind name or an object");
    }
    if (spec.label.empty()) spec.label = to_string(spec.kind);
    return spec;
}

EnvironmentSpec environment_spec_from_json(const json& item, const std::filesystem::path& base_dir,
                                           std::optional<Environment>& inline_env) {
    EnvironmentSpec spec;
    std::string kind;
    if (item.is_string()) {
        kind = item.get<std::string>();
    } else if (item.is_object()) {
        reject_unknown(item, {"kind", "noise", "horizon", "path", "mdp"}, "environment");
        kind = read<std::string>(item, "kind", "environment");
        read_if(item, "noise", "environment", spec.noise);
        read_if(item, "horizon", "environment", spec.horizon);
        read_if(item, "path", "environment", spec.path);
        if (kind == "inline") {
            if (!item.contains("mdp")) throw ParseError("environment: inline needs \"mdp\"");
            inline_env = environment_from_json(item["mdp"]);
            spec.kind = EnvironmentKind::Custom;
            return spec;
        }
    } else {
        throw ParseError("environment: expected a name or an object");
    }
    if (kind == "tree4") {
        spec.kind = EnvironmentKind::Tree4;
    } else if (kind == "gridworld") {
        spec.kind = EnvironmentKind::Gridworld;
    } else if (kind == "custom") {
        spec.kind = EnvironmentKind::Custom;
        if (spec.path.empty()) throw ParseError("environment: custom needs \"path\"");
        const std::filesystem::path p(spec.path);
        if (p.is_relative()) spec.path = (base_dir / p).string();
    } else {
        throw ParseError("environment: unknown kind \"" + kind + "\"");
    }
    return spec;
}

double parse_double(const std::string& key, const std::string& text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ParseError("override " + key + ": \"" + text + "\" is not a number");
    }
    return value;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError("override " + key + ": \"" + text + "\" is not a non-negative integer");
    }
    return value;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto each_policy = [&](PolicyKind kind, auto&& fn) {
        bool any = false;
        for (auto& p : cfg.policies) {
            if (p.kind != kind) continue;
            fn(p);
            any = true;
        }
        if (!any) throw ParseError("override " + key + ": the config has no such policy");
    };
    if (key == "revar.c") {
        const double v = parse_double(key, value);
        each_policy(PolicyKind::Revar, [&](PolicySpec& p) { p.revar.c = v; });
    } else if (key == "revar.delta") {
        const double v = parse_double(key, value);
        each_policy(PolicyKind::Revar, [&](PolicySpec& p) { p.revar.delta = v; });
    } else if (key == "cbvar.eta") {
        const double v = parse_double(key, value);
        each_policy(PolicyKind::CbVar, [&](PolicySpec& p) { p.cbvar.eta = v; });
    } else if (key == "episodes") {
        cfg.episodes = parse_uint(key, value);
    } else if (key == "trials") {
        cfg.trials = parse_uint(key, value);
    } else if (key == "seed") {
        cfg.base_seed = parse_uint(key, value);
    } else if (key == "threads") {
        cfg.threads = static_cast<unsigned>(parse_uint(key, value));
    } else if (key == "gridworld.noise" || key == "gridworld.horizon") {
        if (cfg.environment.kind != EnvironmentKind::Gridworld) {
            throw ParseError("override " + key + ": the environment is not the gridworld");
        }
        if (key == "gridworld.noise") {
            cfg.environment.noise = parse_double(key, value);
        } else {
            cfg.environment.horizon = static_cast<int>(parse_uint(key, value));
        }
    } else if (key == "reward_dist") {
        cfg.reward_dist = reward_dist_from_string(value);
    } else {
        throw ParseError("unknown override key \"" + key + "\"");
    }
}

LoadedConfig finish(ExperimentConfig cfg, std::optional<Environment> inline_env,
                    const std::vector<std::pair<std::string, std::string>>& overrides,
                    const std::string& origin) {
    for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(origin + ": " + e.what());
    }
    LoadedConfig loaded;
    try {
        loaded.environment = inline_env ? std::move(*inline_env) : make_environment(cfg.environment);
    } catch (const std::invalid_argument& e) {
        throw ParseError(origin + ": " + e.what());
    }
    require_valid(validate(loaded.environment.mdp, loaded.environment.policy), origin);
    loaded.config = std::move(cfg);
    return loaded;
}

bool is_builtin(const std::string& name) { return name == "tree4" || name == "gridworld"; }

} // namespace

LoadedConfig config_from_json(const json& doc, const std::filesystem::path& base_dir,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (!doc.is_object()) throw ParseError("config: expected a JSON object");

    // A results file: its echoed config plus the embedded environment.
    if (doc.contains("config") && doc.contains("environment") && doc["environment"].is_object() &&
        doc["environment"].contains("structure")) {
        LoadedConfig base = config_from_json(doc["config"], base_dir);
        return finish(std::move(base.config), environment_from_json(doc["environment"]), overrides,
                      "config");
    }
    // A bare environment document.
    if (doc.contains("structure")) {
        ExperimentConfig cfg;
        cfg.environment.kind = EnvironmentKind::Custom;
        cfg.policies = default_policies();
        return finish(std::move(cfg), environment_from_json(doc), overrides, "environment");
    }

    reject_unknown(doc,
                   {"environment", "policies", "episodes", "trials", "seed", "eval_points",
                    "reward_dist", "threads"},
                   "config");
    ExperimentConfig cfg;
    std::optional<Environment> inline_env;
    if (doc.contains("environment")) {
        cfg.environment = environment_spec_from_json(doc["environment"], base_dir, inline_env);
    }
    if (doc.contains("policies")) {
        const json& list = doc["policies"];
        if (!list.is_array()) throw ParseError("policies: expected an array");
        for (std::size_t i = 0; i < list.size(); ++i) cfg.policies.push_back(policy_from_json(list[i], i));
    } else {
        cfg.policies = default_policies();
    }
    read_if(doc, "episodes", "config", cfg.episodes);
    read_if(doc, "trials", "config", cfg.trials);
    read_if(doc, "seed", "config", cfg.base_seed);
    read_if(doc, "eval_points", "config", cfg.eval_points);
    read_if(doc, "threads", "config", cfg.threads);
    if (doc.contains("reward_dist")) {
        cfg.reward_dist = reward_dist_from_string(read<std::string>(doc, "reward_dist", "config"));
    }
    return finish(std::move(cfg), std::move(inline_env), overrides, "config");
}

LoadedConfig load_config(const std::string& name_or_path,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (is_builtin(name_or_path)) {
        return config_from_json(json{{"environment", name_or_path}}, ".", overrides);
    }
    const std::filesystem::path path(name_or_path);
    const json doc = read_json_file(path);
    try {
        return config_from_json(doc, path.parent_path(), overrides);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

json config_to_json(const ExperimentConfig& cfg) {
    json doc;
    json env;
    switch (cfg.environment.kind) {
    case EnvironmentKind::Tree4: env["kind"] = "tree4"; break;
    case EnvironmentKind::Gridworld:
        env["kind"] = "gridworld";
        env["noise"] = cfg.environment.noise;
        env["horizon"] = cfg.environment.horizon;
        break;
    case EnvironmentKind::Custom:
        env["kind"] = "custom";
        env["path"] = cfg.environment.path;
        break;
    }
    doc["environment"] = std::move(env);
    json policies = json::array();
    for (const auto& p : cfg.policies) {
        json item;
        item["kind"] = policy_kind_key(p.kind);
        item["label"] = p.label.empty() ? to_string(p.kind) : p.label;
        if (p.estimation) item["estimation"] = to_string(*p.estimation);
        if (p.kind == PolicyKind::Revar) {
            item["c"] = p.revar.c;
            item["delta"] = p.revar.delta;
        }
        if (p.kind == PolicyKind::CbVar) item["eta"] = p.cbvar.eta;
        policies.push_back(std::move(item));
    }
    doc["policies"] = std::move(policies);
    doc["episodes"] = cfg.episodes;
    doc["trials"] = cfg.trials;
    doc["seed"] = cfg.base_seed;
    doc["eval_points"] = cfg.eval_points;
    if (cfg.reward_dist) doc["reward_dist"] = to_string(*cfg.reward_dist);
    doc["threads"] = cfg.threads;
    return doc;
}

json allocation_to_json(const MdpSpec& mdp, const AllocationTable& table) {
    json states = json::array();
    for (std::size_t s = 0; s < mdp.state_count(); ++s) {
        const auto b = table.b.row(s);
        const auto w = table.weight.row(s);
        states.push_back({{"state", s},
                          {"level", mdp.states[s].level},
                          {"index", mdp.states[s].index},
                          {"B", table.bigB[s]},
                          {"weight", std::vector<double>(w.begin(), w.end())},
                          {"b", std::vector<double>(b.begin(), b.end())}});
    }
    return json{{"structure", to_string(mdp.structure)}, {"states", std::move(states)}};
}

namespace {

std::string format_g17(double x) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

} // namespace

void write_csv(std::ostream& out, const std::vector<ExperimentResult>& results) {
    out << "policy,episode,mse_mean,mse_stderr,regret_mean\n";
    std::set<std::string> written;
    for (const auto& result : results) {
        for (const auto& curve : result.curves) {
            if (!written.insert(curve.spec.label).second) continue;
            for (const auto& p : curve.points) {
                out << curve.spec.label << ',' << p.episode << ',' << format_g17(p.mse_mean) << ','
                    << format_g17(p.mse_stderr) << ',' << format_g17(p.regret_mean) << '\n';
            }
        }
    }
}

json result_to_json(const ExperimentResult& result) {
    json doc;
    doc["config"] = config_to_json(result.config);
    doc["environment"] = to_json(result.environment);
    doc["true_value"] = result.true_value;
    doc["eval_points"] = result.eval_points;
    json loss = json::array();
    for (double x : result.oracle_loss_mean) loss.push_back(finite_or_null(x));
    doc["oracle_loss_mean"] = std::move(loss);
    json curves = json::array();
    for (const auto& curve : result.curves) {
        json points = json::array();
        for (const auto& p : curve.points) {
            points.push_back({{"episode", p.episode},
                              {"mse_mean", p.mse_mean},
                              {"mse_stderr", p.mse_stderr},
                              {"regret_mean", finite_or_null(p.regret_mean)}});
        }
        curves.push_back({{"label", curve.spec.label},
                          {"kind", policy_kind_key(curve.spec.kind)},
                          {"estimation", to_string(curve.estimation)},
                          {"seeds", curve.seeds},
                          {"points", std::move(points)}});
    }
    doc["policies"] = std::move(curves);
    doc["wall_seconds"] = result.wall_seconds;
    return doc;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void print_summary(std::ostream& out, const std::vector<ExperimentResult>& results) {
    std::set<std::string> seen;
    for (const auto& result : results) {
        for (const auto& curve : result.curves) {
            if (!seen.insert(curve.spec.label).second) continue;
            const auto& last = curve.points.back();
            char line[160];
            std::snprintf(line, sizeof line, "%-16s episode %-8llu mse %.6g +- %.2g\n",
                          curve.spec.label.c_str(), static_cast<unsigned long long>(last.episode),
                          last.mse_mean, last.mse_stderr);
            out << line;
        }
    }
}

void emit_results(const CliInvocation& inv, const std::vector<ExperimentResult>& results,
                  std::ostream& out) {
    std::ostringstream csv;
    write_csv(csv, results);
    const auto csv_path = inv.csv_path.value_or(inv.output_dir / "results.csv");
    write_file(csv_path, csv.str());

    json meta;
    if (results.size() == 1) {
        meta = result_to_json(results.front());
    } else {
        meta = json::array();
        for (const auto& r : results) meta.push_back(result_to_json(r));
    }
    const auto json_path = inv.json_path.value_or(inv.output_dir / "results.json");
    write_file(json_path, meta.dump(2) + "\n");

    print_summary(out, results);
    out << "wrote " << csv_path.string() << " and " << json_path.string() << '\n';
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CliInvocation inv;
    try {
        inv = parse_cli(args);
    } catch (const CliExit& e) {
        (e.exit_code == 0 ? out : err) << e.what();
        return e.exit_code;
    }
    try {
        auto overrides = inv.overrides;
        if (inv.seed) overrides.emplace_back("seed", std::to_string(*inv.seed));
        LoadedConfig loaded = load_config(inv.config_path, overrides);
        switch (inv.subcommand) {
        case Subcommand::Validate: {
            const auto& mdp = loaded.environment.mdp;
            out << "valid: " << mdp.state_count() << " states, " << mdp.action_count
                << " actions, horizon " << mdp.horizon << ", " << to_string(mdp.structure) << '\n';
            return 0;
        }
        case Subcommand::Allocate: {
            const auto& env = loaded.environment;
            out << allocation_to_json(env.mdp, oracle_allocation(env.mdp, env.policy)).dump(2)
                << '\n';
            return 0;
        }
        case Subcommand::Run: {
            emit_results(inv, {run_experiment(loaded.config, loaded.environment)}, out);
            return 0;
        }
        case Subcommand::Ablate: {
            emit_results(inv, run_ablation(inv.c_values, loaded.config, loaded.environment), out);
            return 0;
        }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace revar
