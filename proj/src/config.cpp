#include "troika/config.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "troika/errors.hpp"
#include "troika/fsio.hpp"

namespace troika {

using nlohmann::json;

int Config::challenge_round_bound() const {
    return std::min(max_challenge_rounds, stalemate_round_budget);
}

std::string Config::to_json() const {
    json j;
    j["budgets"] = {{"reasoner", budgets.reasoner},
                    {"verifier", budgets.verifier},
                    {"meta", budgets.meta},
                    {"code_exec", budgets.code_exec}};
    j["max_challenge_rounds"] = max_challenge_rounds;
    j["max_replans"] = max_replans;
    j["max_exploration_rounds"] = max_exploration_rounds;
    j["max_solution_retries"] = max_solution_retries;
    j["stalemate_round_budget"] = stalemate_round_budget;
    j["recommended_steps"] = recommended_steps;
    j["max_total_steps"] = max_total_steps;
    j["re_explore_after_replan"] = re_explore_after_replan;
    j["meta_whole_solution_review"] = meta_whole_solution_review;
    j["pre_planning_analysis"] = pre_planning_analysis;
    j["timeout_grace_seconds"] = timeout_grace_seconds;
    j["chronic_timeout_threshold"] = chronic_timeout_threshold;
    j["simulated_clock"] = simulated_clock;
    j["max_dispatches"] = max_dispatches;
    if (prompts_dir) j["prompts_dir"] = *prompts_dir;
    if (skills_dir) j["skills_dir"] = *skills_dir;
    return j.dump(2) + "\n";
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

void validate(const Config& c) {
    auto positive = [](double v, const char* name) {
        if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(c.budgets.reasoner, "budgets.reasoner");
    positive(c.budgets.verifier, "budgets.verifier");
    positive(c.budgets.meta, "budgets.meta");
    positive(c.budgets.code_exec, "budgets.code_exec");
    positive(c.max_challenge_rounds, "max_challenge_rounds");
    if (c.max_replans < 0) throw ConfigError("max_replans must be >= 0");
    // The exploration phase always runs at least one round once entered, so a
    // zero cap could never hold as an invariant.
    positive(c.max_exploration_rounds, "max_exploration_rounds");
    positive(c.max_solution_retries, "max_solution_retries");
    positive(c.stalemate_round_budget, "stalemate_round_budget");
    positive(c.max_total_steps, "max_total_steps");
    positive(c.chronic_timeout_threshold, "chronic_timeout_threshold");
    if (c.timeout_grace_seconds < 0) throw ConfigError("timeout_grace_seconds must be >= 0");
    if (c.max_dispatches < 0) throw ConfigError("max_dispatches must be >= 0");
    if (c.recommended_steps[0] < 1 || c.recommended_steps[1] < c.recommended_steps[0])
        throw ConfigError("recommended_steps must be an increasing positive range");
    if (c.recommended_steps[1] > c.max_total_steps)
        throw ConfigError("recommended_steps upper bound exceeds max_total_steps");
}

} // namespace

Config Config::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");

    static const char* known_keys[] = {
        "budgets", "max_challenge_rounds", "max_replans", "max_exploration_rounds",
        "max_solution_retries", "stalemate_round_budget", "recommended_steps",
        "max_total_steps", "re_explore_after_replan", "meta_whole_solution_review",
        "pre_planning_analysis", "timeout_grace_seconds", "chronic_timeout_threshold",
        "simulated_clock", "max_dispatches", "prompts_dir", "skills_dir"};
    static const char* known_budget_keys[] = {"reasoner", "verifier", "meta", "code_exec"};
    auto reject_unknown = [](const json& obj, const auto& keys, const char* where) {
        for (const auto& item : obj.items()) {
            bool known = false;
            for (const char* k : keys)
                if (item.key() == k) known = true;
            if (!known)
                throw ConfigError(std::string("unknown ") + where + " key: " + item.key());
        }
    };
    reject_unknown(j, known_keys, "config");

    Config c;
    try {
        if (auto it = j.find("budgets"); it != j.end()) {
            if (!it->is_object()) throw ConfigError("budgets must be an object");
            reject_unknown(*it, known_budget_keys, "budgets");
            take(*it, "reasoner", c.budgets.reasoner);
            take(*it, "verifier", c.budgets.verifier);
            take(*it, "meta", c.budgets.meta);
            take(*it, "code_exec", c.budgets.code_exec);
        }
        take(j, "max_challenge_rounds", c.max_challenge_rounds);
        take(j, "max_replans", c.max_replans);
        take(j, "max_exploration_rounds", c.max_exploration_rounds);
        take(j, "max_solution_retries", c.max_solution_retries);
        take(j, "stalemate_round_budget", c.stalemate_round_budget);
        take(j, "recommended_steps", c.recommended_steps);
        take(j, "max_total_steps", c.max_total_steps);
        take(j, "re_explore_after_replan", c.re_explore_after_replan);
        take(j, "meta_whole_solution_review", c.meta_whole_solution_review);
        take(j, "pre_planning_analysis", c.pre_planning_analysis);
        take(j, "timeout_grace_seconds", c.timeout_grace_seconds);
        take(j, "chronic_timeout_threshold", c.chronic_timeout_threshold);
        take(j, "simulated_clock", c.simulated_clock);
        take(j, "max_dispatches", c.max_dispatches);
        std::string s;
        if (auto it = j.find("prompts_dir"); it != j.end() && !it->is_null())
            c.prompts_dir = it->get<std::string>();
        if (auto it = j.find("skills_dir"); it != j.end() && !it->is_null())
            c.skills_dir = it->get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config field: ") + e.what());
    }
    validate(c);
    return c;
}

Config Config::from_file(const std::filesystem::path& path) {
    return from_json(fsio::read_file(path));
}

} // namespace troika
