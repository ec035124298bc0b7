// troika CLI: run a problem against a chosen backend, resume an interrupted
// run, replay a script as a CI gate, simulate stochastic cohorts, inspect a
// workspace, and aggregate stats across workspaces.
//
// Exit codes (stable contract, also in README):
//   0  solved / command succeeded
//   2  run aborted
//   3  replay divergence or expectation mismatch
//   4  usage, configuration, or workspace error
//   5  internal or environment error

#include <glob.h>

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <thread>

#include "troika/agents.hpp"
#include "troika/errors.hpp"
#include "troika/events.hpp"
#include "troika/fsio.hpp"
#include "troika/orchestrator.hpp"
#include "troika/state.hpp"
#include "troika/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitSolved = 0;
constexpr int kExitAborted = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitUsage = 4;
constexpr int kExitInternal = 5;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Backend selection: "scripted:<path>", "stochastic:<path>", "process:<path>".
// ---------------------------------------------------------------------------

struct SelectedBackend {
    std::unique_ptr<troika::Backend> backend;
    /// Set when the script bundles config overrides.
    std::optional<troika::Config> script_config;
    /// Scripted and stochastic backends report invented wall times, so the
    /// run must not consume real time waiting for them.
    bool force_simulated_clock = false;
};

SelectedBackend make_backend(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw UsageError("backend spec must be kind:path, got '" + spec + "'");
    std::string kind = spec.substr(0, colon);
    fs::path path = spec.substr(colon + 1);

    SelectedBackend out;
    if (kind == "scripted") {
        troika::Script script = troika::Script::from_file(path);
        out.script_config = script.config;
        out.backend = std::make_unique<troika::ScriptedBackend>(std::move(script));
        out.force_simulated_clock = true;
    } else if (kind == "stochastic") {
        out.backend = troika::make_stochastic_backend(troika::BehaviorProfile::from_file(path));
        out.force_simulated_clock = true;
    } else if (kind == "process") {
        out.backend = troika::make_process_backend(troika::ProcessBackendConfig::from_file(path));
    } else {
        throw UsageError("unknown backend kind '" + kind +
                         "' (expected scripted, stochastic, or process)");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config flags. Each flag mirrors a Config field; only flags the user passed
// override the file/default value.
// ---------------------------------------------------------------------------

struct ConfigFlags {
    std::vector<std::function<void(troika::Config&)>> appliers;

    void attach(CLI::App& cmd) {
        add_double(cmd, "--reasoner-budget", [](troika::Config& c, double v) { c.budgets.reasoner = v; },
                   "Reasoner dispatch budget, seconds");
        add_double(cmd, "--verifier-budget", [](troika::Config& c, double v) { c.budgets.verifier = v; },
                   "Verifier dispatch budget, seconds");
        add_double(cmd, "--meta-budget", [](troika::Config& c, double v) { c.budgets.meta = v; },
                   "Meta dispatch budget, seconds");
        add_double(cmd, "--code-exec-budget", [](troika::Config& c, double v) { c.budgets.code_exec = v; },
                   "Per-invocation code execution budget, seconds");
        add_double(cmd, "--timeout-grace-seconds",
                   [](troika::Config& c, double v) { c.timeout_grace_seconds = v; },
                   "Grace period between stop signal and forced kill");
        add_int(cmd, "--max-challenge-rounds",
                [](troika::Config& c, int v) { c.max_challenge_rounds = v; },
                "Challenge rounds before a stalemate");
        add_int(cmd, "--max-replans", [](troika::Config& c, int v) { c.max_replans = v; },
                "Re-plans before the run aborts");
        add_int(cmd, "--max-exploration-rounds",
                [](troika::Config& c, int v) { c.max_exploration_rounds = v; },
                "Exploration rounds per plan version");
        add_int(cmd, "--max-solution-retries",
                [](troika::Config& c, int v) { c.max_solution_retries = v; },
                "Solution rewrites after the first rejection");
        add_int(cmd, "--stalemate-round-budget",
                [](troika::Config& c, int v) { c.stalemate_round_budget = v; },
                "Review rounds per step cycle before escalation");
        add_int(cmd, "--max-total-steps", [](troika::Config& c, int v) { c.max_total_steps = v; },
                "Hard cap on plan length");
        add_int(cmd, "--chronic-timeout-threshold",
                [](troika::Config& c, int v) { c.chronic_timeout_threshold = v; },
                "Consecutive step timeouts before a forced replan decision");
        add_int(cmd, "--max-dispatches", [](troika::Config& c, int v) { c.max_dispatches = v; },
                "Abort after this many dispatches (0 = unlimited)");

        {
            auto value = std::make_shared<std::vector<int>>();
            CLI::Option* o = cmd.add_option("--recommended-steps", *value,
                                            "Recommended plan length range: LO HI")
                                 ->expected(2);
            appliers.push_back([value, o](troika::Config& c) {
                if (o->count()) c.recommended_steps = {(*value)[0], (*value)[1]};
            });
        }
        add_bool(cmd, "--re-explore-after-replan",
                 [](troika::Config& c, bool v) { c.re_explore_after_replan = v; },
                 "Run a fresh exploration round after each approved re-plan");
        add_bool(cmd, "--meta-whole-solution-review",
                 [](troika::Config& c, bool v) { c.meta_whole_solution_review = v; },
                 "Second meta review after the verifier accepts the solution");
        add_bool(cmd, "--pre-planning-analysis",
                 [](troika::Config& c, bool v) { c.pre_planning_analysis = v; },
                 "Meta strategic notes before each plan draft");
        add_bool(cmd, "--simulated-clock", [](troika::Config& c, bool v) { c.simulated_clock = v; },
                 "Advance time by reported wall seconds instead of waiting");
        {
            auto value = std::make_shared<std::string>();
            CLI::Option* o = cmd.add_option("--prompts-dir", *value,
                                            "Directory of instruction template overrides");
            appliers.push_back([value, o](troika::Config& c) {
                if (o->count()) c.prompts_dir = *value;
            });
        }
        {
            auto value = std::make_shared<std::string>();
            CLI::Option* o = cmd.add_option("--skills-dir", *value, "Skill document directory");
            appliers.push_back([value, o](troika::Config& c) {
                if (o->count()) c.skills_dir = *value;
            });
        }
    }

    void apply(troika::Config& cfg) const {
        for (const auto& f : appliers) f(cfg);
    }

private:
    void add_double(CLI::App& cmd, const char* name,
                    std::function<void(troika::Config&, double)> set, const char* help) {
        auto value = std::make_shared<double>(0.0);
        CLI::Option* o = cmd.add_option(name, *value, help);
        appliers.push_back([value, o, set](troika::Config& c) {
            if (o->count()) set(c, *value);
        });
    }
    void add_int(CLI::App& cmd, const char* name, std::function<void(troika::Config&, int)> set,
                 const char* help) {
        auto value = std::make_shared<int>(0);
        CLI::Option* o = cmd.add_option(name, *value, help);
        appliers.push_back([value, o, set](troika::Config& c) {
            if (o->count()) set(c, *value);
        });
    }
    void add_bool(CLI::App& cmd, const char* name, std::function<void(troika::Config&, bool)> set,
                  const char* help) {
        auto value = std::make_shared<bool>(false);
        std::string negated = std::string(name).replace(0, 2, "!--no-");
        CLI::Option* o = cmd.add_flag(std::string(name) + "," + negated, *value, help);
        appliers.push_back([value, o, set](troika::Config& c) {
            if (o->count()) set(c, *value);
        });
    }
};

// ---------------------------------------------------------------------------
// Problem files: JSON {"problem_id","statement"} or Markdown with a leading
// "# <id>" heading followed by the statement.
// ---------------------------------------------------------------------------

struct ProblemFile {
    std::string problem_id;
    std::string statement;
};

ProblemFile load_problem_file(const fs::path& path) {
    std::string text = troika::fsio::read_file(path);
    ProblemFile out;
    if (path.extension() == ".json") {
        json j = json::parse(text);
        out.problem_id = j.at("problem_id").get<std::string>();
        out.statement = j.at("statement").get<std::string>();
        return out;
    }
    size_t eol = text.find('\n');
    std::string first = text.substr(0, eol);
    if (first.rfind("# ", 0) != 0)
        throw UsageError("problem file " + path.string() +
                         " must start with '# <problem-id>' or be JSON");
    out.problem_id = first.substr(2);
    while (!out.problem_id.empty() && (out.problem_id.back() == '\r' || out.problem_id.back() == ' '))
        out.problem_id.pop_back();
    std::string rest = eol == std::string::npos ? "" : text.substr(eol + 1);
    size_t start = rest.find_first_not_of("\r\n");
    out.statement = start == std::string::npos ? "" : rest.substr(start);
    while (!out.statement.empty() &&
           (out.statement.back() == '\n' || out.statement.back() == '\r'))
        out.statement.pop_back();
    return out;
}

int exit_code_for(const troika::RunResult& result) {
    return result.outcome == troika::Outcome::Solved ? kExitSolved : kExitAborted;
}

void clear_replay_workspace(const fs::path& target) {
    if (!fs::exists(target)) return;
    bool ours = fs::is_directory(target) &&
                (fs::is_empty(target) || fs::exists(target / "state.json"));
    if (!ours)
        throw UsageError("refusing to clear " + target.string() +
                         ": not an empty directory or a troika workspace");
    fs::remove_all(target);
}

// ---------------------------------------------------------------------------
// replay: run a script, optionally compare against an expectation file.
// ---------------------------------------------------------------------------

struct ExpectationFailure {
    std::vector<std::string> notes;
    bool ok() const { return notes.empty(); }
};

ExpectationFailure check_expectations(const json& expect, const troika::ProblemState& state,
                                      const fs::path& workspace) {
    ExpectationFailure fail;
    auto mismatch = [&fail](const std::string& what, const std::string& want,
                            const std::string& got) {
        fail.notes.push_back(what + ": expected " + want + ", got " + got);
    };
    auto check_int = [&](const char* key, long actual) {
        if (expect.contains(key) && expect[key].get<long>() != actual)
            mismatch(key, std::to_string(expect[key].get<long>()), std::to_string(actual));
    };

    if (expect.contains("outcome")) {
        std::string want = expect["outcome"].get<std::string>();
        std::string got = troika::outcome_label(state.outcome);
        if (want != got) mismatch("outcome", want, got);
    }
    check_int("plan_version", state.plan_version);
    check_int("trace_backs", state.stats.trace_backs);
    check_int("replans", state.stats.replans);
    check_int("failed_records", static_cast<long>(state.failed_records.size()));
    check_int("verified_results", static_cast<long>(state.verified_results.size()));
    long accepted = 0;
    for (const auto& s : state.steps)
        if (s.status == troika::StepStatus::Accepted) ++accepted;
    check_int("accepted_steps", accepted);
    if (expect.contains("summary")) {
        std::string want = expect["summary"].get<std::string>();
        std::string got = troika::outcome_summary(state);
        if (want != got) mismatch("summary", "\"" + want + "\"", "\"" + got + "\"");
    }
    if (expect.contains("solution_contains")) {
        troika::WorkspacePaths paths{workspace};
        std::string solution;
        if (auto text = troika::fsio::read_file_retry_once(paths.solution_md()))
            solution = std::move(*text);
        for (const auto& needle : expect["solution_contains"]) {
            std::string n = needle.get<std::string>();
            if (solution.find(n) == std::string::npos)
                fail.notes.push_back("solution_contains: solution.md lacks \"" + n + "\"");
        }
    }
    if (expect.contains("event_counts")) {
        troika::WorkspacePaths paths{workspace};
        std::map<std::string, long> counts;
        for (const troika::Event& e : troika::read_event_log(paths.events_log()))
            counts[troika::event_kind_label(e.kind)] += 1;
        for (auto it = expect["event_counts"].begin(); it != expect["event_counts"].end(); ++it) {
            long want = it.value().get<long>();
            long got = counts.count(it.key()) ? counts[it.key()] : 0;
            if (want != got)
                mismatch("event_counts." + it.key(), std::to_string(want), std::to_string(got));
        }
    }
    return fail;
}

int cmd_replay(const fs::path& script_path, const std::optional<fs::path>& expect_path,
               const fs::path& workdir) {
    troika::Script script = troika::Script::from_file(script_path);
    troika::Config cfg = script.config.value_or(troika::Config{});
    cfg.simulated_clock = true;

    std::string problem_id = script.problem_id;
    std::string statement = script.statement;
    troika::ScriptedBackend backend(std::move(script));

    fs::create_directories(workdir);
    clear_replay_workspace(workdir / problem_id);

    troika::Orchestrator orch(backend, cfg);
    troika::RunResult result;
    try {
        result = orch.run(problem_id, statement, workdir);
    } catch (const troika::ScriptDivergence& e) {
        std::cerr << "script divergence: " << e.what() << "\n";
        return kExitDivergence;
    }

    if (backend.cursor() != backend.script().entries.size()) {
        std::cerr << "script divergence: run ended after entry " << backend.cursor() << " of "
                  << backend.script().entries.size() << "\n";
        return kExitDivergence;
    }

    std::cout << troika::outcome_summary(orch.state()) << "\n";

    if (expect_path) {
        json expect = json::parse(troika::fsio::read_file(*expect_path));
        ExpectationFailure fail = check_expectations(expect, orch.state(), result.workspace);
        if (!fail.ok()) {
            for (const std::string& note : fail.notes)
                std::cerr << "expectation mismatch: " << note << "\n";
            return kExitDivergence;
        }
    }
    return exit_code_for(result);
}

// ---------------------------------------------------------------------------
// simulate: seeded stochastic cohort, sequential by default.
// ---------------------------------------------------------------------------

uint64_t run_seed(uint64_t base, int index) {
    return base ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(index + 1));
}

int cmd_simulate(const fs::path& profile_path, int n_runs, uint64_t seed, int workers,
                 const fs::path& workdir, troika::Config cfg) {
    troika::BehaviorProfile profile = troika::BehaviorProfile::from_file(profile_path);
    cfg.simulated_clock = true;
    if (cfg.max_dispatches == 0) cfg.max_dispatches = 400; // cohort safety valve

    std::string stem = profile_path.stem().string();
    fs::path cohort = workdir / ("cohort-" + stem + "-n" + std::to_string(n_runs) + "-s" +
                                 std::to_string(seed));
    if (fs::exists(cohort)) fs::remove_all(cohort);
    fs::create_directories(cohort);

    std::vector<troika::RunSummary> runs(n_runs);
    std::vector<std::string> failures(n_runs);

    auto one_run = [&](int i) {
        char id[32];
        std::snprintf(id, sizeof(id), "sim-%04d", i + 1);
        troika::BehaviorProfile p = profile;
        p.seed = run_seed(seed, i);
        auto backend = troika::make_stochastic_backend(p);
        troika::Orchestrator orch(*backend, cfg);
        try {
            orch.run(id, "Synthetic trajectory " + std::to_string(i + 1) + " of profile " + stem,
                     cohort);
            runs[i] = troika::RunSummary{id, orch.state().outcome, orch.state().stats, false, ""};
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    };

    if (workers <= 1) {
        for (int i = 0; i < n_runs; ++i) one_run(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) one_run(i);
            });
        for (std::thread& t : pool) t.join();
    }

    for (int i = 0; i < n_runs; ++i)
        if (!failures[i].empty()) {
            std::cerr << "run " << (i + 1) << " failed: " << failures[i] << "\n";
            return kExitInternal;
        }

    int solved = 0;
    for (const auto& r : runs)
        if (r.outcome == troika::Outcome::Solved) ++solved;

    troika::NamedAggregate row{stem, troika::aggregate(runs)};
    std::string report = "solved " + std::to_string(solved) + "/" + std::to_string(n_runs) +
                         "\n\n" + troika::render_process_table({row}) + "\n" +
                         troika::render_cost_table({row}) + "\n" +
                         troika::render_tag_table({row});
    std::cout << report;
    troika::fsio::atomic_write(cohort / "aggregate.txt", report);
    return kExitSolved;
}

// ---------------------------------------------------------------------------
// stats: glob workspaces, group by parent directory, render the three tables.
// ---------------------------------------------------------------------------

std::vector<fs::path> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<fs::path> out;
    int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0)
        for (size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw UsageError("glob failed on pattern " + pattern);
    return out;
}

int cmd_stats(const std::vector<std::string>& patterns) {
    std::map<std::string, std::vector<troika::RunSummary>> groups;
    for (const std::string& pattern : patterns) {
        for (const fs::path& match : expand_glob(pattern)) {
            if (!fs::is_directory(match) || !fs::exists(match / "state.json")) continue;
            troika::RunSummary summary = troika::summarize_run(match);
            if (summary.flagged)
                std::cerr << "flagged " << summary.problem_id << ": " << summary.flag_note
                          << "\n";
            std::string name = match.parent_path().filename().string();
            if (name.empty()) name = "runs";
            groups[name].push_back(std::move(summary));
        }
    }
    if (groups.empty()) throw UsageError("no workspaces matched (need <dir>/state.json)");

    std::vector<troika::NamedAggregate> rows;
    for (const auto& [name, runs] : groups) rows.push_back({name, troika::aggregate(runs)});
    std::cout << troika::render_process_table(rows) << "\n"
              << troika::render_cost_table(rows) << "\n"
              << troika::render_tag_table(rows);
    return kExitSolved;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"troika: orchestrator control plane for long-horizon problem solving"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a problem file against a backend");
    std::string run_problem, run_backend;
    std::string run_config_file;
    std::string run_workdir = ".";
    run_cmd->add_option("problem", run_problem, "Problem file (.json or Markdown)")->required();
    run_cmd->add_option("--backend", run_backend,
                        "Backend spec: scripted:<file> | stochastic:<file> | process:<file>")
        ->required();
    run_cmd->add_option("--config", run_config_file, "Config JSON file");
    run_cmd->add_option("--workdir", run_workdir, "Directory that holds workspaces");
    ConfigFlags run_flags;
    run_flags.attach(*run_cmd);

    // resume
    auto* resume_cmd = app.add_subcommand("resume", "Continue an interrupted run");
    std::string resume_workspace, resume_backend;
    resume_cmd->add_option("workspace", resume_workspace, "Workspace directory")->required();
    resume_cmd->add_option("--backend", resume_backend, "Backend spec (see run)")->required();

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "Replay a script and check expectations");
    std::string replay_script, replay_expect;
    std::string replay_workdir;
    replay_cmd->add_option("script", replay_script, "Script JSON file")->required();
    replay_cmd->add_option("--expect", replay_expect, "Expected-outcome JSON file");
    replay_cmd->add_option("--workdir", replay_workdir,
                           "Workspace root (default: temp directory)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Run a seeded stochastic cohort");
    std::string sim_profile;
    int sim_n = 0;
    uint64_t sim_seed = 1;
    int sim_workers = 1;
    std::string sim_workdir = ".";
    sim_cmd->add_option("profile", sim_profile, "Behavior profile JSON file")->required();
    sim_cmd->add_option("--n", sim_n, "Number of runs")->required()->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim_seed, "Cohort base seed");
    sim_cmd->add_option("--workers", sim_workers, "Parallel workers over disjoint workspaces")
        ->check(CLI::PositiveNumber);
    sim_cmd->add_option("--workdir", sim_workdir, "Directory that holds the cohort");
    ConfigFlags sim_flags;
    sim_flags.attach(*sim_cmd);

    // inspect
    auto* inspect_cmd = app.add_subcommand("inspect", "Print a workspace's state document");
    std::string inspect_workspace;
    inspect_cmd->add_option("workspace", inspect_workspace, "Workspace directory")->required();

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Aggregate stats over workspace globs");
    std::vector<std::string> stats_globs;
    stats_cmd->add_option("globs", stats_globs, "Workspace glob patterns")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*run_cmd) {
        ProblemFile problem = load_problem_file(run_problem);
        SelectedBackend selected = make_backend(run_backend);
        troika::Config cfg = selected.script_config.value_or(troika::Config{});
        if (!run_config_file.empty()) cfg = troika::Config::from_file(run_config_file);
        run_flags.apply(cfg);
        if (selected.force_simulated_clock) cfg.simulated_clock = true;
        cfg = troika::Config::from_json(cfg.to_json()); // re-validate after overrides
        troika::Orchestrator orch(*selected.backend, cfg);
        troika::RunResult result =
            orch.run(problem.problem_id, problem.statement, run_workdir);
        std::cout << troika::outcome_summary(orch.state()) << "\n";
        if (result.outcome == troika::Outcome::Aborted)
            std::cerr << "aborted: " << result.abort_reason << "\n";
        return exit_code_for(result);
    }
    if (*resume_cmd) {
        SelectedBackend selected = make_backend(resume_backend);
        troika::Orchestrator orch(*selected.backend, troika::Config{});
        troika::RunResult result = orch.resume(resume_workspace);
        std::cout << troika::outcome_summary(orch.state()) << "\n";
        if (result.outcome == troika::Outcome::Aborted)
            std::cerr << "aborted: " << result.abort_reason << "\n";
        return exit_code_for(result);
    }
    if (*replay_cmd) {
        fs::path workdir = replay_workdir.empty()
                               ? fs::temp_directory_path() / "troika-replay"
                               : fs::path(replay_workdir);
        std::optional<fs::path> expect;
        if (!replay_expect.empty()) expect = replay_expect;
        return cmd_replay(replay_script, expect, workdir);
    }
    if (*sim_cmd) {
        troika::Config cfg;
        sim_flags.apply(cfg);
        cfg = troika::Config::from_json(cfg.to_json());
        return cmd_simulate(sim_profile, sim_n, sim_seed, sim_workers, sim_workdir,
                            std::move(cfg));
    }
    if (*inspect_cmd) {
        troika::WorkspacePaths paths{fs::path(inspect_workspace)};
        auto doc = troika::fsio::read_file_retry_once(paths.canonical());
        if (!doc)
            throw UsageError("no state document at " + paths.canonical().string());
        std::cout << *doc;
        return kExitSolved;
    }
    if (*stats_cmd) return cmd_stats(stats_globs);
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const troika::ScriptDivergence& e) {
        std::cerr << "script divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const troika::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const troika::UnsafeIdentifier& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const troika::WorkspaceCollision& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const troika::WorkspaceLocked& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const troika::ResumeImpossible& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const troika::UnknownSkill& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
