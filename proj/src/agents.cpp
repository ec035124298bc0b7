#include "troika/agents.hpp"

#include <nlohmann/json.hpp>

#include "troika/errors.hpp"
#include "troika/fsio.hpp"

namespace fs = std::filesystem;

namespace troika {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Script loading.
// ---------------------------------------------------------------------------

Script Script::from_file(const fs::path& path) {
    return from_json(fsio::read_file(path), path.parent_path());
}

Script Script::from_json(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("script is not valid JSON: ") + e.what());
    }
    Script s;
    try {
        s.problem_id = j.at("problem_id").get<std::string>();
        s.statement = j.at("statement").get<std::string>();
        if (j.contains("config")) s.config = Config::from_json(j["config"].dump());
        for (const auto& e : j.at("entries")) {
            ScriptEntry entry;
            if (e.contains("expect")) {
                const auto& x = e["expect"];
                if (x.contains("role")) entry.expect.role = x["role"].get<std::string>();
                if (x.contains("mode")) entry.expect.mode = x["mode"].get<std::string>();
                if (x.contains("session")) entry.expect.session = x["session"].get<std::string>();
                if (x.contains("purpose")) entry.expect.purpose = x["purpose"].get<std::string>();
                if (x.contains("step")) entry.expect.step = x["step"].get<int>();
                if (x.contains("instruction_contains"))
                    entry.expect.instruction_contains = x["instruction_contains"].get<std::string>();
                if (x.contains("injected_contains")) {
                    if (x["injected_contains"].is_string())
                        entry.expect.injected_contains.push_back(
                            x["injected_contains"].get<std::string>());
                    else
                        entry.expect.injected_contains =
                            x["injected_contains"].get<std::vector<std::string>>();
                }
            }
            int sources = e.contains("respond") + e.contains("respond_lines") +
                          e.contains("respond_file");
            if (sources != 1)
                throw ConfigError("script entry needs exactly one of respond / respond_lines / "
                                  "respond_file");
            if (e.contains("respond")) {
                entry.response = e["respond"].get<std::string>();
            } else if (e.contains("respond_lines")) {
                for (const auto& line : e["respond_lines"]) {
                    entry.response += line.get<std::string>();
                    entry.response += '\n';
                }
            } else {
                entry.response = fsio::read_file(base_dir / e["respond_file"].get<std::string>());
            }
            if (e.contains("sleep_seconds")) entry.sleep_seconds = e["sleep_seconds"].get<double>();
            s.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad script shape: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Scripted backend.
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(Script script) : script_(std::move(script)) {}

void ScriptedBackend::skip(size_t n) {
    if (n > script_.entries.size())
        throw ScriptDivergence("resume skip of " + std::to_string(n) + " exceeds script length " +
                               std::to_string(script_.entries.size()));
    cursor_ = n;
}

namespace {

[[noreturn]] void diverge(size_t index, const std::string& field, const std::string& expected,
                          const std::string& actual) {
    throw ScriptDivergence("entry " + std::to_string(index) + ": " + field + ": expected \"" +
                           expected + "\", got \"" + actual + "\"");
}

} // namespace

AgentResponse ScriptedBackend::dispatch(const AgentRequest& request) {
    if (cursor_ >= script_.entries.size())
        throw ScriptDivergence("script exhausted after " + std::to_string(cursor_) +
                               " entries; unexpected dispatch (role " +
                               role_label(request.role) + ", purpose " +
                               purpose_label(request.purpose) + ", session " +
                               request.session.name + ")");
    const size_t index = cursor_;
    const ScriptEntry& entry = script_.entries[index];
    const ScriptExpectation& x = entry.expect;

    if (x.role && *x.role != role_label(request.role))
        diverge(index, "role", *x.role, role_label(request.role));
    if (x.mode && *x.mode != session_mode_label(request.session.mode))
        diverge(index, "mode", *x.mode, session_mode_label(request.session.mode));
    if (x.session && *x.session != request.session.name)
        diverge(index, "session", *x.session, request.session.name);
    if (x.purpose && *x.purpose != purpose_label(request.purpose))
        diverge(index, "purpose", *x.purpose, purpose_label(request.purpose));
    if (x.step && *x.step != request.step)
        diverge(index, "step", std::to_string(*x.step), std::to_string(request.step));
    if (x.instruction_contains &&
        request.instruction.find(*x.instruction_contains) == std::string::npos)
        diverge(index, "instruction_contains", *x.instruction_contains,
                "(instruction without that substring)");
    for (const std::string& needle : x.injected_contains)
        if (request.injected_state.find(needle) == std::string::npos)
            diverge(index, "injected_contains", needle, "(injected state without that substring)");

    cursor_ += 1;
    recorded_.push_back(request);
    return AgentResponse{entry.response, entry.sleep_seconds, false};
}

// ---------------------------------------------------------------------------
// Behavior profiles.
// ---------------------------------------------------------------------------

BehaviorProfile BehaviorProfile::from_file(const fs::path& path) {
    return from_json(fsio::read_file(path));
}

BehaviorProfile BehaviorProfile::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("profile is not valid JSON: ") + e.what());
    }
    BehaviorProfile p;
    p.seed = j.value("seed", p.seed);
    p.exploration_solved = j.value("exploration_solved", p.exploration_solved);
    p.step_challenge = j.value("step_challenge", p.step_challenge);
    p.challenge_resolves_per_round = j.value("challenge_resolves_per_round",
                                             p.challenge_resolves_per_round);
    p.verdict_trace_back = j.value("verdict_trace_back", p.verdict_trace_back);
    p.verdict_propose_replan = j.value("verdict_propose_replan", p.verdict_propose_replan);
    p.step_timeout = j.value("step_timeout", p.step_timeout);
    p.malformed = j.value("malformed", p.malformed);
    for (double v : {p.exploration_solved, p.step_challenge, p.challenge_resolves_per_round,
                     p.verdict_trace_back, p.verdict_propose_replan, p.step_timeout, p.malformed})
        if (v < 0.0 || v > 1.0) throw ConfigError("profile probabilities must be within [0, 1]");
    return p;
}

// ---------------------------------------------------------------------------
// Placeholder expansion.
// ---------------------------------------------------------------------------

std::string expand_placeholders(std::string text, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        const std::string token = "{" + key + "}";
        size_t pos = 0;
        while ((pos = text.find(token, pos)) != std::string::npos) {
            text.replace(pos, token.size(), value);
            pos += value.size();
        }
    }
    return text;
}

// ---------------------------------------------------------------------------
// Skills.
// ---------------------------------------------------------------------------

SkillDoc parse_skill(const std::string& name, const std::string& text) {
    SkillDoc doc;
    doc.name = name;
    std::string_view rest(text);
    if (rest.substr(0, 4) == "---\n") {
        rest.remove_prefix(4);
        size_t end = rest.find("\n---");
        if (end == std::string_view::npos)
            throw ConfigError("skill " + name + ": unterminated preamble");
        std::string_view preamble = rest.substr(0, end + 1);
        rest.remove_prefix(end + 4);
        if (!rest.empty() && rest.front() == '\n') rest.remove_prefix(1);
        while (!preamble.empty()) {
            size_t nl = preamble.find('\n');
            std::string_view line = preamble.substr(0, nl);
            preamble.remove_prefix(nl == std::string_view::npos ? preamble.size() : nl + 1);
            if (line.empty()) continue;
            size_t colon = line.find(':');
            if (colon == std::string_view::npos)
                throw ConfigError("skill " + name + ": preamble line without a colon");
            std::string key(line.substr(0, colon));
            std::string_view value = line.substr(colon + 1);
            while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
            doc.meta[key] = std::string(value);
        }
    }
    doc.body = std::string(rest);
    if (doc.meta.count("name") && doc.meta["name"] != name)
        throw ConfigError("skill " + name + ": preamble name mismatch (" + doc.meta["name"] + ")");
    return doc;
}

const SkillDoc& SkillRegistry::load(const std::string& name) {
    const SkillDoc* doc = try_load(name);
    if (!doc) throw UnknownSkill(name);
    return *doc;
}

const SkillDoc* SkillRegistry::try_load(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return &it->second;
    if (dir_.empty()) return nullptr;
    fs::path file = dir_ / (name + ".md");
    auto text = fsio::read_file_retry_once(file);
    if (!text) return nullptr;
    auto [pos, _] = cache_.emplace(name, parse_skill(name, *text));
    return &pos->second;
}

fs::path default_skills_dir(const Config& config) {
    if (config.skills_dir && !config.skills_dir->empty()) return *config.skills_dir;
    fs::path local = fs::path("share") / "skills";
    std::error_code ec;
    if (fs::is_directory(local, ec)) return local;
    return {};
}

} // namespace troika
