#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "troika/config.hpp"
#include "troika/events.hpp"
#include "troika/fsio.hpp"
#include "troika/protocol.hpp"
#include "troika/stats.hpp"
#include "troika/types.hpp"

namespace troika {

// ---------------------------------------------------------------------------
// Domain state. The machine mirror (state.json) is authoritative; the
// canonical PROBLEM_STATE.md is a deterministic projection regenerated at
// every checkpoint.
// ---------------------------------------------------------------------------

enum class StepStatus { Pending, Executing, UnderReview, InChallenge, Accepted, Archived };

const char* step_status_label(StepStatus s);
std::optional<StepStatus> step_status_from_label(std::string_view label);

struct StepState {
    int number = 0;
    StepStatus status = StepStatus::Pending;
    int challenge_rounds = 0;      ///< Review rounds in the current challenged cycle.
    int trace_back_count = 0;      ///< Times this step was a trace-back target.
    int timeout_count = 0;         ///< Total timeouts while executing this step.
    int consecutive_timeouts = 0;  ///< Reset by any completed (non-timeout) dispatch.
    std::string report_path;       ///< Workspace-relative; empty until a report lands.
    std::string verifier_session;  ///< Session of the current review cycle.
    int verifier_recreations = 0;  ///< How many review cycles this step has had.

    bool operator==(const StepState&) const = default;
};

struct PlanState {
    int version = 1;
    std::vector<PlanStep> steps;

    int total_steps() const { return static_cast<int>(steps.size()); }
    bool operator==(const PlanState&) const = default;
};

/// Abandoned plan attempt. Appended at every approved re-plan; never
/// cleared, never mutated afterwards.
struct FailureRecord {
    int plan_version_abandoned = 0;
    std::string reason_summary;
    std::string plan_summary;
    std::vector<std::string> forbidden_directions;
    std::vector<VerifiedResult> rescued_results;

    bool operator==(const FailureRecord&) const = default;
};

struct ArchiveEntry {
    int plan_version = 0;
    int step_lo = 0; ///< 0 for whole-plan or terminal archives.
    int step_hi = 0;
    std::string label; ///< Directory name under archive/plan-v{K}/ ("" = the root).
    std::vector<std::string> artifacts; ///< Workspace-relative archived paths.

    bool operator==(const ArchiveEntry&) const = default;
};

struct ProblemState {
    std::string problem_id;
    std::string statement;
    Config config;

    Phase phase = Phase::Setup;
    Outcome outcome = Outcome::InProgress;
    std::string abort_reason;

    std::optional<PlanState> plan;
    int plan_version = 1;
    int current_step = 0;
    int replan_count = 0;
    int exploration_rounds_used = 0; ///< Within the current exploration phase.
    int solution_retries_used = 0;
    int plan_attempts_used = 0; ///< Structural planning attempts this phase.

    int reasoner_attempt_index = 1;
    bool pure_reasoning_mode = false;

    std::vector<StepState> steps;
    std::vector<VerifiedResult> verified_results;
    /// Entries displaced from the active ledger by a trace-back; they fold
    /// into the next FailureRecord's rescued results.
    std::vector<VerifiedResult> rescued_staging;
    std::vector<FailureRecord> failed_records;
    std::vector<std::string> exploration_findings;
    std::vector<ArchiveEntry> archives;

    std::vector<std::string> created_sessions;

    // Mid-phase continuation data, persisted so resume lands on the exact
    // next dispatch.
    bool pre_planning_done = false;
    std::string planning_hints;
    std::string last_plan_error;
    std::string last_objections;
    std::string pending_guidance;
    bool solution_drafted = false;
    std::string last_solution_rejection;

    /// Complete lines known to be in events.log at the last checkpoint.
    /// Resume truncates the log back to this count, so a crash between the
    /// log append and the mirror write cannot duplicate events.
    long events_logged = 0;

    RunStats stats;

    /// Runtime-only: workspace directory. Not serialized.
    std::filesystem::path workspace;

    StepState* find_step(int number);
    const StepState* find_step(int number) const;
    int total_steps() const { return plan ? plan->total_steps() : 0; }
    bool session_created(std::string_view name) const;

    bool operator==(const ProblemState& o) const;
};

// ---------------------------------------------------------------------------
// Workspace layout.
// ---------------------------------------------------------------------------

struct WorkspacePaths {
    std::filesystem::path root;

    std::filesystem::path state_json() const { return root / "state.json"; }
    std::filesystem::path canonical() const { return root / "PROBLEM_STATE.md"; }
    std::filesystem::path events_log() const { return root / "events.log"; }
    std::filesystem::path stats_json() const { return root / "stats.json"; }
    std::filesystem::path problem_md() const { return root / "problem.md"; }
    std::filesystem::path plan_md() const { return root / "plan.md"; }
    std::filesystem::path exploration_md() const { return root / "exploration.md"; }
    std::filesystem::path solution_md() const { return root / "solution.md"; }
    std::filesystem::path code_dir() const { return root / "code"; }
    std::filesystem::path archive_dir() const { return root / "archive"; }
    std::filesystem::path plan_archive_dir(int version) const {
        return archive_dir() / ("plan-v" + std::to_string(version));
    }
    std::filesystem::path lock_file() const { return root / ".lock"; }

    static std::string step_report_name(int step);
    static std::string step_debate_name(int step);
    std::filesystem::path step_report(int step) const { return root / step_report_name(step); }
    std::filesystem::path step_debate(int step) const { return root / step_debate_name(step); }
};

/// Single-writer guard. Creating it takes an exclusive lock file (stale
/// locks from dead processes are reclaimed); destruction releases it.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& workspace_root);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path lock_path_;
    bool held_ = false;
};

// ---------------------------------------------------------------------------
// State operations.
// ---------------------------------------------------------------------------

/// Create a fresh problem workspace under `scratch_root/<id>/` and the
/// initial state. Refuses unsafe identifiers and collisions with existing
/// non-fresh workspaces.
ProblemState new_problem_state(const std::string& problem_id, const std::string& statement,
                               const Config& config, const std::filesystem::path& scratch_root);

/// Fault-injection points for persistence tests: every raw write and rename
/// that persist() performs goes through these.
struct PersistHooks {
    fsio::WriteFn raw_write;
    std::function<void(const std::filesystem::path&, const std::filesystem::path&)> raw_rename;
    std::function<void(const std::filesystem::path&, const std::string&)> raw_append;

    static PersistHooks real();
};

/// Checkpoint: flush buffered events (bumping state.events_logged), then
/// atomically replace state.json and regenerate PROBLEM_STATE.md and
/// stats.json. `events` may be null.
void persist(ProblemState& state, EventBuffer* events,
             const PersistHooks& hooks = PersistHooks::real());

struct LoadResult {
    ProblemState state;
    std::vector<std::string> warnings;
};

/// Load a workspace from its machine mirror. The mirror wins on any
/// disagreement; a missing or stale canonical document is regenerated with a
/// warning. Missing or unparseable mirror -> ResumeImpossible.
LoadResult load_problem_state(const std::filesystem::path& workspace_root);

/// Serialize / restore the mirror document itself (exposed for tests).
std::string state_to_json(const ProblemState& state);
ProblemState state_from_json(const std::string& text);

/// Deterministic agent-facing document: same state and role, same bytes.
/// Verifier omits exploration findings; Meta additionally sees run counters.
/// The canonical PROBLEM_STATE.md stores the Meta (fullest) view.
std::string render_live_state(const ProblemState& state, AgentRole role);

/// Ledger write for an accepted step: fills provenance on the entries,
/// advances the step cursor or moves to solution generation, and adds the
/// report's tag tally to the run stats. `report_tags` must be the tally of
/// the accepted report's final version.
void record_accepted_step(ProblemState& state, int step_number,
                          std::vector<VerifiedResult> entries, const TagTally& report_tags);

/// Archive steps M..current_step, prune the active ledger by the rescue
/// rule, reset the archived steps to Pending, bump the attempt index and
/// re-point the Reasoner session. Returns the created archive entry.
const ArchiveEntry& apply_trace_back(ProblemState& state, int target_step);

/// Abandon the current plan: archive its artifacts, append the failure
/// record (forbidden directions + rescued results), bump plan version and
/// attempt index, clear per-plan state, and enter Exploration or Planning
/// per config. Precondition: replan_count < config.max_replans (callers
/// abort instead of calling when the cap is reached).
const FailureRecord& apply_replan(ProblemState& state, const ReplanDecision& decision);

/// Copy the current plan's artifacts into archive/plan-v{K}/ at a terminal
/// event so every terminal trajectory leaves an archive for its final plan.
void archive_terminal(ProblemState& state);

} // namespace troika
