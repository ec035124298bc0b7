#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace troika {

// ---------------------------------------------------------------------------
// Document grammar. Agent deliverables are Markdown-ish text; control flow is
// read ONLY from recognized `##`/`###` sections (case-insensitive names,
// spaces and underscores interchangeable). Prose never influences parsing,
// and a malformed control section escalates instead of being coerced.
// ---------------------------------------------------------------------------

/// One split-out section. `name` is the normalized header token
/// (e.g. "TRACE_BACK_TO"), `body` the raw text up to the next header.
struct Section {
    std::string name;
    std::string body;
    int line = 0; ///< 1-based line of the header, for diagnostics.
};

/// Split a document into header-delimited sections. The text before the
/// first header is not returned; headers of any name delimit bodies.
std::vector<Section> split_sections(std::string_view document);

/// Normalize a control token: uppercase, spaces/hyphens to underscores,
/// other punctuation dropped, runs of underscores collapsed and trimmed.
std::string normalize_token(std::string_view raw);

// ---------------------------------------------------------------------------
// Verified-results ledger entries.
// ---------------------------------------------------------------------------

enum class VerifiedCategory { Lemma, Conjecture, Computation, Definition, Answer };

const char* category_label(VerifiedCategory c);
std::optional<VerifiedCategory> category_from_label(std::string_view label);

struct VerifiedResult {
    VerifiedCategory category = VerifiedCategory::Lemma;
    std::string text;
    int source_step = 0;
    int plan_version = 0;
    bool rescued = false;
    /// Set when the entry's evidence came from executed code; the trace-back
    /// rescue rule keys on this for Computation entries.
    bool code_grounded = false;

    bool operator==(const VerifiedResult&) const = default;
};

// ---------------------------------------------------------------------------
// Parsed control documents.
// ---------------------------------------------------------------------------

/// A control section that was missing or malformed. Escalations are values:
/// the orchestrator routes them (verdicts become re-plan proposals), they are
/// never silently coerced into a verdict and never into TraceBack or
/// ApproveReplan.
struct Escalation {
    enum class Reason {
        MissingSection,
        BadToken,
        MissingTraceBackTarget,
        TargetOutOfRange,
        BadForbiddenDirections,
        EmptyField,
    };
    Reason reason = Reason::MissingSection;
    std::string detail;

    bool operator==(const Escalation&) const = default;
};

enum class VerdictTag { Accept, Challenge, TraceBack, ProposeReplan };

struct Verdict {
    VerdictTag tag = VerdictTag::Accept;
    int trace_back_target = 0; ///< Meaningful for TraceBack only.
    std::string objections;    ///< Full reviewer text, kept for Challenge defenses.
    std::vector<VerifiedResult> ledger_entries; ///< Accept only; category+text filled.

    bool operator==(const Verdict&) const = default;
};

using VerdictResult = std::variant<Verdict, Escalation>;

enum class ReplanTag { Continue, TraceBack, ApproveReplan, Abort };

struct ReplanDecision {
    ReplanTag tag = ReplanTag::Continue;
    int trace_back_target = 0;
    std::string reason_summary;
    std::string plan_summary;                    ///< ApproveReplan only.
    std::vector<std::string> forbidden_directions; ///< ApproveReplan only, 1..10.
    std::vector<std::string> reusable_results;

    bool operator==(const ReplanDecision&) const = default;
};

using ReplanResult = std::variant<ReplanDecision, Escalation>;

enum class MetaAction { RetryStep, TraceBack, ProposeReplan, Abort };

struct MetaIntervention {
    MetaAction action = MetaAction::RetryStep;
    int trace_back_target = 0;
    bool use_pure_reasoning = false; ///< Absent field means false.
    std::string guidance;            ///< RetryStep steering text.
    std::string extracted_partials;

    bool operator==(const MetaIntervention&) const = default;
};

using InterventionResult = std::variant<MetaIntervention, Escalation>;

enum class ExplorationOutcome { Solved, PartiallySolved, NeedPlan, Unknown };

struct ExplorationReport {
    ExplorationOutcome outcome = ExplorationOutcome::Unknown;
    std::string findings_digest;

    bool operator==(const ExplorationReport&) const = default;
};

enum class ExplorationReviewDecision { AnotherRound, ProceedToPlanning };
enum class SolutionReviewDecision { Accept, Reject };

struct PlanStep {
    int number = 0;
    std::string goal;

    bool operator==(const PlanStep&) const = default;
};

struct ParsedPlan {
    std::vector<PlanStep> steps;

    bool operator==(const ParsedPlan&) const = default;
};

struct PlanStructuralError {
    enum class Kind { Empty, TooManySteps, NonContiguous, Duplicate };
    Kind kind = Kind::Empty;
    std::string detail;

    bool operator==(const PlanStructuralError&) const = default;
};

using PlanResult = std::variant<ParsedPlan, PlanStructuralError>;

struct TagTally {
    long verified = 0;
    long easy_verify = 0;
    long hard_verify = 0;

    long total() const { return verified + easy_verify + hard_verify; }
    TagTally& operator+=(const TagTally& o);
    bool operator==(const TagTally&) const = default;
};

// ---------------------------------------------------------------------------
// Parsers. All are total over arbitrary bytes: they throw nothing and return
// Escalation / defaults for malformed input. `warnings` (optional) collects
// non-fatal notes such as ignored duplicate sections or dropped untagged
// bullets.
// ---------------------------------------------------------------------------

VerdictResult parse_verdict(std::string_view document, int current_step,
                            std::vector<std::string>* warnings = nullptr);

ReplanResult parse_replan_decision(std::string_view document, int current_step,
                                   std::vector<std::string>* warnings = nullptr);

InterventionResult parse_meta_intervention(std::string_view document, int current_step,
                                           std::vector<std::string>* warnings = nullptr);

ExplorationReport parse_exploration(std::string_view document);

ExplorationReviewDecision parse_exploration_review(std::string_view document);

SolutionReviewDecision parse_solution_review(std::string_view document,
                                             std::vector<std::string>* warnings = nullptr);

PlanResult parse_plan(std::string_view document, int max_steps = 20);

/// Count verification tags outside fenced code blocks.
TagTally extract_tags(std::string_view document);

/// True when the document carries the plan-blocked marker outside fences.
bool detect_plan_blocked(std::string_view document);

/// Pull category-tagged ledger entries from the Verified Results section.
/// Only category and text are filled; provenance fields are the caller's.
std::vector<VerifiedResult> extract_verified_results(std::string_view document,
                                                     std::vector<std::string>* warnings = nullptr);

/// Bullet-list splitting used by the replan and ledger grammars; exposed for
/// tests. A bullet runs until the next bullet; plain continuation lines are
/// folded in with single spaces, blank lines end the current bullet.
std::vector<std::string> parse_bullets(std::string_view body);

// Wire literals. These are protocol bytes the agent side expects verbatim.
inline constexpr std::string_view kLiveStateBanner = "[STAR-PolyaMath live problem state]";
inline constexpr std::string_view kTagVerified = "[verified]";
inline constexpr std::string_view kTagEasyVerify = "[easy-verify]";
inline constexpr std::string_view kTagHardVerify = "[hard-verify]";
inline constexpr std::string_view kTagPlanBlocked = "[plan-blocked]";

} // namespace troika
