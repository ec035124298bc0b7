#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "troika/clock.hpp"
#include "troika/config.hpp"
#include "troika/types.hpp"

namespace troika {

/// One dispatch to an agent. The orchestrator fills every field; backends
/// only read. `injected_state` is the role-sliced live problem state block
/// that precedes `instruction` in the prompt.
struct AgentRequest {
    AgentRole role = AgentRole::Reasoner;
    SessionDirective session;
    Purpose purpose = Purpose::Exploration;
    int step = 0; ///< 0 when not tied to a plan step.
    std::string injected_state;
    std::string instruction;
    double budget_seconds = 0.0;

    bool operator==(const AgentRequest&) const = default;
};

struct AgentResponse {
    std::string text;          ///< Full response document (may be partial on timeout).
    double wall_seconds = 0.0; ///< Declared (simulated backends) or measured (process).
    bool timed_out = false;    ///< Process backend sets this; simulated backends leave
                               ///< it false and report a wall time past the budget.
};

/// An agent provider. Implementations must be deterministic given the same
/// dispatch sequence; the orchestrator replays them for resume.
class Backend {
public:
    virtual ~Backend() = default;
    virtual AgentResponse dispatch(const AgentRequest& request) = 0;
    /// Resume support: drop the first n dispatches without serving them.
    /// Only meaningful for scripted backends; others ignore it.
    virtual void skip(size_t n) { (void)n; }
    virtual const char* kind() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend: serves a fixed list of expectation/response pairs and
// fails loudly on the first divergence. This is both the conformance test
// harness and the replay tool.
// ---------------------------------------------------------------------------

struct ScriptExpectation {
    std::optional<std::string> role;
    std::optional<std::string> mode;
    std::optional<std::string> session;
    std::optional<std::string> purpose;
    std::optional<int> step;
    std::optional<std::string> instruction_contains;
    std::vector<std::string> injected_contains;
};

struct ScriptEntry {
    ScriptExpectation expect;
    std::string response;
    double sleep_seconds = 10.0;
};

struct Script {
    std::string problem_id;
    std::string statement;
    std::optional<Config> config; ///< Optional overrides bundled with the script.
    std::vector<ScriptEntry> entries;

    static Script from_file(const std::filesystem::path& path);
    static Script from_json(const std::string& text, const std::filesystem::path& base_dir);
};

class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(Script script);

    AgentResponse dispatch(const AgentRequest& request) override;
    void skip(size_t n) override;
    const char* kind() const override { return "scripted"; }

    const Script& script() const { return script_; }
    size_t cursor() const { return cursor_; }
    /// Requests actually served this process (skipped entries are absent).
    const std::vector<AgentRequest>& recorded() const { return recorded_; }

private:
    Script script_;
    size_t cursor_ = 0;
    std::vector<AgentRequest> recorded_;
};

// ---------------------------------------------------------------------------
// Stochastic backend: generates well-formed agent documents from a seeded
// behavior profile. Used for property tests and the simulate subcommand.
// ---------------------------------------------------------------------------

struct BehaviorProfile {
    uint64_t seed = 1;
    double exploration_solved = 0.05;
    double step_challenge = 0.15;
    double challenge_resolves_per_round = 0.6;
    double verdict_trace_back = 0.06;
    double verdict_propose_replan = 0.02;
    double step_timeout = 0.02;
    double malformed = 0.0; ///< Chance a document is deliberately junk.

    static BehaviorProfile from_file(const std::filesystem::path& path);
    static BehaviorProfile from_json(const std::string& text);
};

std::unique_ptr<Backend> make_stochastic_backend(const BehaviorProfile& profile);

// ---------------------------------------------------------------------------
// Process backend: one subprocess per dispatch, prompt passed through a file,
// response read from stdout. SIGTERM at budget, SIGKILL after the grace
// window; partial output is kept.
// ---------------------------------------------------------------------------

struct ProcessBackendConfig {
    std::vector<std::string> fresh_argv;  ///< {session_name} / {prompt_file} placeholders.
    std::vector<std::string> resume_argv; ///< Defaults to fresh_argv when empty.
    std::filesystem::path prompt_dir;     ///< Where prompt files are written.
    double grace_seconds = 5.0;

    static ProcessBackendConfig from_file(const std::filesystem::path& path);
};

std::unique_ptr<Backend> make_process_backend(ProcessBackendConfig config);

/// Replace every "{key}" in `text` using `values`; unknown keys are left as-is.
std::string expand_placeholders(std::string text,
                                const std::map<std::string, std::string>& values);

// ---------------------------------------------------------------------------
// Skills: named markdown protocol documents with a flat key: value preamble,
// loaded on demand and cached. Instruction builders append them so every
// agent sees the same protocol text the tests assert against.
// ---------------------------------------------------------------------------

struct SkillDoc {
    std::string name;
    std::map<std::string, std::string> meta;
    std::string body;
};

SkillDoc parse_skill(const std::string& name, const std::string& text);

class SkillRegistry {
public:
    /// Empty path disables loading; load() then throws UnknownSkill.
    explicit SkillRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}

    bool enabled() const { return !dir_.empty(); }
    const SkillDoc& load(const std::string& name);
    /// Nullptr instead of a throw when the skill is simply absent.
    const SkillDoc* try_load(const std::string& name);

private:
    std::filesystem::path dir_;
    std::map<std::string, SkillDoc> cache_;
};

/// Locate the default skill directory: explicit config value, else
/// "share/skills" under the current directory, else disabled.
std::filesystem::path default_skills_dir(const Config& config);

} // namespace troika
