#include "troika/types.hpp"

#include <cctype>
#include <cstdio>

namespace troika {

const char* role_label(AgentRole r) {
    switch (r) {
    case AgentRole::Reasoner: return "reasoner";
    case AgentRole::ReasonerNonCoding: return "reasoner_noncoding";
    case AgentRole::Verifier: return "verifier";
    case AgentRole::Meta: return "meta";
    }
    return "reasoner";
}

std::optional<AgentRole> role_from_label(std::string_view label) {
    if (label == "reasoner") return AgentRole::Reasoner;
    if (label == "reasoner_noncoding") return AgentRole::ReasonerNonCoding;
    if (label == "verifier") return AgentRole::Verifier;
    if (label == "meta") return AgentRole::Meta;
    return std::nullopt;
}

bool is_reasoner(AgentRole r) {
    return r == AgentRole::Reasoner || r == AgentRole::ReasonerNonCoding;
}

const char* session_mode_label(SessionMode m) {
    return m == SessionMode::Fresh ? "fresh" : "resume";
}

const char* purpose_label(Purpose p) {
    switch (p) {
    case Purpose::Exploration: return "exploration";
    case Purpose::ExplorationReview: return "exploration_review";
    case Purpose::PrePlanning: return "pre_planning";
    case Purpose::Planning: return "planning";
    case Purpose::StepReport: return "step_report";
    case Purpose::StepReview: return "step_review";
    case Purpose::Defense: return "defense";
    case Purpose::ChallengeReview: return "challenge_review";
    case Purpose::Intervention: return "intervention";
    case Purpose::ReplanDecision: return "replan_decision";
    case Purpose::Solution: return "solution";
    case Purpose::SolutionReview: return "solution_review";
    case Purpose::MetaSolutionReview: return "meta_solution_review";
    }
    return "exploration";
}

std::optional<Purpose> purpose_from_label(std::string_view label) {
    static constexpr Purpose all[] = {
        Purpose::Exploration,    Purpose::ExplorationReview, Purpose::PrePlanning,
        Purpose::Planning,       Purpose::StepReport,        Purpose::StepReview,
        Purpose::Defense,        Purpose::ChallengeReview,   Purpose::Intervention,
        Purpose::ReplanDecision, Purpose::Solution,          Purpose::SolutionReview,
        Purpose::MetaSolutionReview,
    };
    for (Purpose p : all)
        if (label == purpose_label(p)) return p;
    return std::nullopt;
}

const char* phase_label(Phase p) {
    switch (p) {
    case Phase::Setup: return "setup";
    case Phase::Exploration: return "exploration";
    case Phase::Planning: return "planning";
    case Phase::StepExecution: return "step_execution";
    case Phase::SolutionGeneration: return "solution_generation";
    case Phase::Done: return "done";
    }
    return "setup";
}

std::optional<Phase> phase_from_label(std::string_view label) {
    static constexpr Phase all[] = {Phase::Setup,         Phase::Exploration,
                                    Phase::Planning,      Phase::StepExecution,
                                    Phase::SolutionGeneration, Phase::Done};
    for (Phase p : all)
        if (label == phase_label(p)) return p;
    return std::nullopt;
}

const char* outcome_label(Outcome o) {
    switch (o) {
    case Outcome::InProgress: return "in_progress";
    case Outcome::Solved: return "solved";
    case Outcome::Aborted: return "aborted";
    }
    return "in_progress";
}

std::optional<Outcome> outcome_from_label(std::string_view label) {
    static constexpr Outcome all[] = {Outcome::InProgress, Outcome::Solved, Outcome::Aborted};
    for (Outcome o : all)
        if (label == outcome_label(o)) return o;
    return std::nullopt;
}

const char* replan_trigger_label(ReplanTrigger t) {
    switch (t) {
    case ReplanTrigger::VerifierProposed: return "verifier_proposed";
    case ReplanTrigger::PlanBlocked: return "plan_blocked";
    case ReplanTrigger::Stalemate: return "stalemate";
    case ReplanTrigger::ChronicTimeouts: return "chronic_timeouts";
    case ReplanTrigger::MetaRequested: return "meta_requested";
    }
    return "meta_requested";
}

std::string reasoner_session_name(std::string_view problem_id, int attempt_index) {
    return "reason-" + std::string(problem_id) + "-a" + std::to_string(attempt_index);
}

std::string verifier_session_base(std::string_view problem_id, int step_number) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "step%02d", step_number);
    return "verify-" + std::string(problem_id) + "-" + suffix;
}

std::string verifier_session_name(std::string_view problem_id, int step_number, int recreation) {
    std::string base = verifier_session_base(problem_id, step_number);
    if (recreation <= 0) return base;
    return base + "-r" + std::to_string(recreation);
}

std::string meta_session_name(std::string_view problem_id) {
    return "meta-" + std::string(problem_id);
}

bool valid_problem_id(std::string_view id) {
    if (id.empty() || id.size() > 128) return false;
    for (char c : id) {
        unsigned char u = static_cast<unsigned char>(c);
        if (!(std::isalnum(u) || c == '_' || c == '-')) return false;
    }
    return true;
}

} // namespace troika
