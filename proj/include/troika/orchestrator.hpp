#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "troika/agents.hpp"
#include "troika/clock.hpp"
#include "troika/config.hpp"
#include "troika/events.hpp"
#include "troika/state.hpp"

namespace troika {

struct RunResult {
    Outcome outcome = Outcome::InProgress;
    std::string abort_reason;
    std::filesystem::path workspace;

    bool operator==(const RunResult&) const = default;
};

/// The control loop. Owns no reasoning: it moves a ProblemState through its
/// phases by dispatching agents, parsing their structured replies, and
/// checkpointing after every transition so an interrupted run resumes on the
/// exact next dispatch.
class Orchestrator {
public:
    Orchestrator(Backend& backend, Config config);

    /// Fresh run: create the workspace under scratch_root/<id>/ and drive to
    /// a terminal phase.
    RunResult run(const std::string& problem_id, const std::string& statement,
                  const std::filesystem::path& scratch_root);

    /// Continue an interrupted run. The config snapshot persisted with the
    /// state wins over the constructor's.
    RunResult resume(const std::filesystem::path& workspace);

    const ProblemState& state() const { return state_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Test instrumentation. checkpoint_hook runs right after each completed
    /// checkpoint; throwing from it simulates a kill between transitions.
    /// persist_hooks forwards to persist() for write-level fault injection.
    std::function<void(const ProblemState&)> checkpoint_hook;
    PersistHooks persist_hooks = PersistHooks::real();

private:
    struct DispatchOutcome {
        std::string text;
        bool timed_out = false;
    };

    RunResult drive();
    void do_exploration();
    void do_planning();
    void do_step_execution();
    void do_execute_step(StepState& step);
    void do_review_step(StepState& step);
    void do_defense(StepState& step);
    void do_solution();
    void review_solution();

    void handle_timeout(StepState& step, const std::string& partial);
    ReplanTag decide_replan(ReplanTrigger trigger, const std::string& context, int step_number);
    void apply_continue(ReplanTrigger trigger, const ReplanDecision& decision, int step_number);
    void reject_solution(const std::string& why, const char* reason_key);

    DispatchOutcome dispatch(AgentRole role, SessionMode mode, const std::string& session,
                             Purpose purpose, int step, std::string instruction);
    std::string build_instruction(Purpose purpose,
                                  std::map<std::string, std::string> vars) const;

    std::string reasoner_session() const;
    std::string meta_session() const;
    SessionMode mode_for(const std::string& session) const;
    std::string fresh_verifier_session(int step);
    AgentRole reasoner_role() const;

    void emit(EventKind kind, const std::string& payload_json);
    void enter_phase(Phase phase);
    void checkpoint();
    void abort_run(const std::string& reason);
    void solve_run();
    void append_artifact(const std::filesystem::path& file, const std::string& marker,
                         const std::string& block);

    Backend& backend_;
    Config config_;
    SkillRegistry skills_;
    std::unique_ptr<Clock> clock_;
    std::unique_ptr<WorkspaceLock> lock_;
    ProblemState state_;
    EventBuffer events_;
    std::vector<std::string> warnings_;
};

/// One-line human summary, e.g. "Solved, plan v2, 3 trace-backs, 1 re-plan".
std::string outcome_summary(const ProblemState& state);

} // namespace troika
