#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace troika {

// ---------------------------------------------------------------------------
// Core enums shared by state, agents, and stats.
// ---------------------------------------------------------------------------

enum class AgentRole { Reasoner, ReasonerNonCoding, Verifier, Meta };

const char* role_label(AgentRole r);
std::optional<AgentRole> role_from_label(std::string_view label);

/// Reasoner and its non-coding variant share session naming and budgets.
bool is_reasoner(AgentRole r);

enum class SessionMode { Fresh, Resume };

const char* session_mode_label(SessionMode m);

/// How a dispatched request relates to an agent session.
struct SessionDirective {
    SessionMode mode = SessionMode::Fresh;
    std::string name;

    bool operator==(const SessionDirective&) const = default;
};

/// Why a dispatch happens. Carried on requests so scripted expectations and
/// the stochastic generator can react without scraping instruction prose.
enum class Purpose {
    Exploration,
    ExplorationReview,
    PrePlanning,
    Planning,
    StepReport,
    StepReview,
    Defense,
    ChallengeReview,
    Intervention,
    ReplanDecision,
    Solution,
    SolutionReview,
    MetaSolutionReview,
};

const char* purpose_label(Purpose p);
std::optional<Purpose> purpose_from_label(std::string_view label);

enum class Phase { Setup, Exploration, Planning, StepExecution, SolutionGeneration, Done };

const char* phase_label(Phase p);
std::optional<Phase> phase_from_label(std::string_view label);

enum class Outcome { InProgress, Solved, Aborted };

const char* outcome_label(Outcome o);
std::optional<Outcome> outcome_from_label(std::string_view label);

enum class ReplanTrigger { VerifierProposed, PlanBlocked, Stalemate, ChronicTimeouts, MetaRequested };

const char* replan_trigger_label(ReplanTrigger t);

// ---------------------------------------------------------------------------
// Session naming. One Reasoner session per attempt, one Verifier session per
// step review cycle (zero-padded step, 0 = whole-solution review), a single
// persistent Meta session per problem.
// ---------------------------------------------------------------------------

std::string reasoner_session_name(std::string_view problem_id, int attempt_index);

/// Base name without any re-execution suffix, e.g. "verify-p-step04".
std::string verifier_session_base(std::string_view problem_id, int step_number);

/// Re-created sessions for a re-executed step carry an extra "-r{k}".
std::string verifier_session_name(std::string_view problem_id, int step_number, int recreation);

std::string meta_session_name(std::string_view problem_id);

/// Problem identifiers must be path- and session-name-safe: [A-Za-z0-9_-]+.
bool valid_problem_id(std::string_view id);

} // namespace troika
