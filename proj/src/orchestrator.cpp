#include "troika/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include "troika/errors.hpp"
#include "troika/fsio.hpp"
#include "troika/protocol.hpp"

namespace fs = std::filesystem;

namespace troika {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Built-in instruction templates. Overridable per purpose by dropping a
// "<purpose_label>.md" file into config.prompts_dir. Placeholders use
// {name}; unknown placeholders pass through untouched.
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kTmplExploration = R"(You are the Reasoner on problem {problem_id}, exploration round {round}. Before any plan exists, probe the problem: work small cases, look for structure, and attempt a direct solution if one seems within reach.

Reply in Markdown with these sections:

## ASSESSMENT
One token on its own line: SOLVED if you have a complete, checkable solution; PARTIALLY_SOLVED if you made real progress that deserves another look; NEED_PLAN if the problem needs a structured plan.

## FINDINGS
Bullets with concrete observations worth keeping: formulas, boundary cases, counterexamples, promising directions.

## SOLUTION
Only when SOLVED: the complete writeup.)";

constexpr std::string_view kTmplExplorationReview = R"(Exploration round {round} on problem {problem_id} ended with a partial result (the findings are in the live state above). Decide whether another exploration round is worth its budget or whether planning should start now.

Reply with:

## EXPLORATION_DECISION
One token: ANOTHER_ROUND or PROCEED_TO_PLANNING.)";

constexpr std::string_view kTmplPrePlanning = R"(You are the Meta overseer for problem {problem_id}. A plan is about to be drafted. Review the exploration findings in the live state above and write strategic notes for the planner: which directions look load-bearing, which are dead ends, what the plan must not skip, and where verification effort should concentrate.

Reply in Markdown; a single ## ANALYSIS section is enough.)";

constexpr std::string_view kTmplPlanning = R"(Draft the step plan for problem {problem_id}. Aim for {lo} to {hi} steps when the problem allows it; the hard cap is {max}. Each step must be one verifiable deliverable: a lemma with a complete proof, a computation with checkable output, or an assembly of earlier results. Order steps so that each uses only accepted results of earlier steps.

Reply with:

## PLAN
A numbered list, one step per line, in execution order.{hints}{retry_note})";

constexpr std::string_view kTmplStepReport = R"(Execute step {step} of the plan: {goal}

Ground every nontrivial claim, and tag each claim line with exactly one of [verified] (confirmed by executed code or a complete written proof), [easy-verify] (routine to check by hand), or [hard-verify] (needs real reviewer effort). {code_note}

If the step cannot be done because the plan itself is flawed, do not improvise around it: explain the obstruction and put the marker [plan-blocked] on its own line.

You have about {budget_minutes} minutes.{guidance})";

constexpr std::string_view kTmplStepReview = R"(You are the Verifier. Review the step {step} report below against the live state. Hunt for real errors: gaps, wrong constants, unjustified leaps, circular uses of later steps. Do not rubber-stamp.

Reply with:

## VERDICT
One token on its own line: ACCEPT, CHALLENGE, TRACE_BACK, or PROPOSE_REPLAN.
- CHALLENGE: state your objections after the token line.
- TRACE_BACK: the error lives in an earlier accepted step; add a ## TRACE_BACK_TO section holding that step's number.
- PROPOSE_REPLAN: the plan direction itself cannot work.

## VERIFIED_RESULTS
Only with ACCEPT: bullets for the results this step establishes, each starting with [Lemma], [Computation], [Conjecture], [Definition], or [Answer].

## REPORT UNDER REVIEW

{report})";

constexpr std::string_view kTmplDefense = R"(The Verifier challenged your step {step} report. Address every objection below: fix what is wrong, defend what is right, and show the checks you ran. Reply in prose; the exchange is recorded alongside the report.

## OBJECTIONS

{objections})";

constexpr std::string_view kTmplChallengeReview = R"(The Reasoner answered your challenge on step {step}. The debate so far is below. Re-review: ACCEPT if the defense resolves your objections, CHALLENGE again with whatever remains, or escalate with TRACE_BACK / PROPOSE_REPLAN. Use the same reply format as the original review, including ## VERIFIED_RESULTS on ACCEPT.

## DEBATE

{debate})";

constexpr std::string_view kTmplIntervention = R"(The Reasoner session on step {step} hit its time budget; this is consecutive timeout {consecutive} on this step. Decide how to unblock the run.

Reply with:

## ACTION_TYPE
One token: RETRY_STEP, TRACE_BACK, PROPOSE_REPLAN, or ABORT. TRACE_BACK also needs a ## TRACE_BACK_TO section with the target step number.

## USE_PURE_REASONING
YES to restart the attempt with code execution disabled (use when code work keeps stalling), NO otherwise.

## GUIDANCE
Concrete steering for the retry: what to skip, what to split, where the time likely went.

## EXTRACTED_PARTIALS
Anything salvageable from the partial output below.

## PARTIAL OUTPUT

{partial})";

constexpr std::string_view kTmplReplanDecision = R"(A re-plan of problem {problem_id} was proposed; trigger: {trigger}. Weigh the full history in the live state above and the context below, then decide.

Reply with:

## REPLAN_DECISION
One token: CONTINUE (keep the current plan), TRACE_BACK (an accepted step is wrong but the plan stands; add ## TRACE_BACK_TO), APPROVE_REPLAN, or ABORT.

With APPROVE_REPLAN also provide:

## REASON_SUMMARY
Why this plan failed, in a few sentences.

## PLAN_SUMMARY
The direction the next plan should take.

## FORBIDDEN_DIRECTIONS
3 to 6 bullets; each one concrete direction the next attempt must not retry.

## REUSABLE_RESULTS
Bullets for results that survive the failure; start a bullet with a category tag such as [Lemma] or [Computation] to re-seed the verified ledger.

## CONTEXT

{context})";

constexpr std::string_view kTmplSolution = R"(Every plan step is accepted. Assemble the final solution of problem {problem_id}: one self-contained writeup built from the ledger results in the live state above. Cite no claim that is not in the ledger or proved inline.{rejection_note})";

constexpr std::string_view kTmplSolutionReview = R"(You are the Verifier. Review the complete solution below as one document: every claim must be backed by the verified ledger or proved inline, and the stated answer must match what the ledger supports.

Reply with a ## VERDICT section: ACCEPT if the solution stands, CHALLENGE with your objections if it does not, or PROPOSE_REPLAN if the whole approach is unsalvageable.

## SOLUTION UNDER REVIEW

{solution})";

constexpr std::string_view kTmplMetaSolutionReview = R"(The Verifier accepted the final solution of problem {problem_id}. As a second pair of eyes, skim it for process-level problems: forbidden directions that crept back in, cases the failure records say were never closed, an answer that contradicts a ledger entry.

Reply with:

## SOLUTION_REVIEW
One token: ACCEPT or REJECT, optionally followed by notes.

## SOLUTION

{solution})";

std::string_view builtin_template(Purpose p) {
    switch (p) {
    case Purpose::Exploration: return kTmplExploration;
    case Purpose::ExplorationReview: return kTmplExplorationReview;
    case Purpose::PrePlanning: return kTmplPrePlanning;
    case Purpose::Planning: return kTmplPlanning;
    case Purpose::StepReport: return kTmplStepReport;
    case Purpose::StepReview: return kTmplStepReview;
    case Purpose::Defense: return kTmplDefense;
    case Purpose::ChallengeReview: return kTmplChallengeReview;
    case Purpose::Intervention: return kTmplIntervention;
    case Purpose::ReplanDecision: return kTmplReplanDecision;
    case Purpose::Solution: return kTmplSolution;
    case Purpose::SolutionReview: return kTmplSolutionReview;
    case Purpose::MetaSolutionReview: return kTmplMetaSolutionReview;
    }
    return {};
}

std::vector<const char*> skills_for(Purpose p) {
    switch (p) {
    case Purpose::Exploration:
        return {"exploration-protocol", "math-solving-strategies"};
    case Purpose::Planning:
        return {"math-solving-strategies"};
    case Purpose::StepReport:
        return {"verification-tag-protocol", "code-issue-resolution"};
    case Purpose::StepReview:
    case Purpose::ChallengeReview:
    case Purpose::SolutionReview:
        return {"verifier-review-protocol", "verification-tag-protocol",
                "construct-counterexamples"};
    case Purpose::Intervention:
    case Purpose::ReplanDecision:
    case Purpose::PrePlanning:
    case Purpose::MetaSolutionReview:
        return {"meta-intervention-protocol"};
    default:
        return {};
    }
}

/// Structural planning attempts per plan version: the initial draft plus one
/// corrective retry; a second consecutive structural failure aborts the run.
constexpr int kMaxPlanAttempts = 2;

std::string describe_plan_error(const PlanStructuralError& e) {
    switch (e.kind) {
    case PlanStructuralError::Kind::Empty: return "no plan steps found (" + e.detail + ")";
    case PlanStructuralError::Kind::TooManySteps: return "too many steps (" + e.detail + ")";
    case PlanStructuralError::Kind::NonContiguous:
        return "step numbers not contiguous from 1 (" + e.detail + ")";
    case PlanStructuralError::Kind::Duplicate: return "duplicate step number (" + e.detail + ")";
    }
    return e.detail;
}

std::string plural(int n, const char* noun) {
    std::string s = std::to_string(n) + " " + noun;
    if (n != 1) s += "s";
    return s;
}

} // namespace

std::string outcome_summary(const ProblemState& state) {
    std::string head;
    switch (state.outcome) {
    case Outcome::Solved: head = "Solved"; break;
    case Outcome::Aborted: head = "Aborted (" + state.abort_reason + ")"; break;
    case Outcome::InProgress: head = "In progress"; break;
    }
    return head + ", plan v" + std::to_string(state.plan_version) + ", " +
           plural(state.stats.trace_backs, "trace-back") + ", " +
           plural(state.stats.replans, "re-plan");
}

// ---------------------------------------------------------------------------
// Construction and entry points.
// ---------------------------------------------------------------------------

Orchestrator::Orchestrator(Backend& backend, Config config)
    : backend_(backend), config_(std::move(config)), skills_(default_skills_dir(config_)) {}

RunResult Orchestrator::run(const std::string& problem_id, const std::string& statement,
                            const fs::path& scratch_root) {
    state_ = new_problem_state(problem_id, statement, config_, scratch_root);
    lock_ = std::make_unique<WorkspaceLock>(state_.workspace);
    clock_ = make_clock(config_.simulated_clock, 0.0);
    emit(EventKind::PhaseEnter, json{{"phase", phase_label(state_.phase)}}.dump());
    checkpoint();
    return drive();
}

RunResult Orchestrator::resume(const fs::path& workspace) {
    lock_ = std::make_unique<WorkspaceLock>(workspace);
    LoadResult loaded = load_problem_state(workspace);
    state_ = std::move(loaded.state);
    for (std::string& w : loaded.warnings) warnings_.push_back(std::move(w));
    config_ = state_.config; // the persisted snapshot governs the whole run
    skills_ = SkillRegistry(default_skills_dir(config_));
    clock_ = make_clock(config_.simulated_clock, state_.stats.wall_clock_total);
    backend_.skip(state_.stats.invocations.size());
    return drive();
}

RunResult Orchestrator::drive() {
    while (state_.phase != Phase::Done) {
        if (config_.max_dispatches > 0 &&
            static_cast<int>(state_.stats.invocations.size()) >= config_.max_dispatches) {
            abort_run("dispatch cap reached (max_dispatches=" +
                      std::to_string(config_.max_dispatches) + ")");
            break;
        }
        switch (state_.phase) {
        case Phase::Setup:
            enter_phase(Phase::Exploration);
            checkpoint();
            break;
        case Phase::Exploration: do_exploration(); break;
        case Phase::Planning: do_planning(); break;
        case Phase::StepExecution: do_step_execution(); break;
        case Phase::SolutionGeneration: do_solution(); break;
        case Phase::Done: break;
        }
    }
    return RunResult{state_.outcome, state_.abort_reason, state_.workspace};
}

// ---------------------------------------------------------------------------
// Plumbing.
// ---------------------------------------------------------------------------

void Orchestrator::emit(EventKind kind, const std::string& payload_json) {
    events_.emit(clock_->iso_timestamp(), kind, payload_json);
}

void Orchestrator::enter_phase(Phase phase) {
    state_.phase = phase;
    emit(EventKind::PhaseEnter, json{{"phase", phase_label(phase)}}.dump());
}

void Orchestrator::checkpoint() {
    persist(state_, &events_, persist_hooks);
    if (checkpoint_hook) checkpoint_hook(state_);
}

void Orchestrator::abort_run(const std::string& reason) {
    state_.outcome = Outcome::Aborted;
    state_.abort_reason = reason;
    emit(EventKind::Aborted, json{{"reason", reason}}.dump());
    archive_terminal(state_);
    enter_phase(Phase::Done);
    checkpoint();
}

void Orchestrator::solve_run() {
    state_.outcome = Outcome::Solved;
    emit(EventKind::Solved, json{{"plan_version", state_.plan_version}}.dump());
    archive_terminal(state_);
    enter_phase(Phase::Done);
    checkpoint();
}

std::string Orchestrator::reasoner_session() const {
    return reasoner_session_name(state_.problem_id, state_.reasoner_attempt_index);
}

std::string Orchestrator::meta_session() const {
    return meta_session_name(state_.problem_id);
}

SessionMode Orchestrator::mode_for(const std::string& session) const {
    return state_.session_created(session) ? SessionMode::Resume : SessionMode::Fresh;
}

AgentRole Orchestrator::reasoner_role() const {
    return state_.pure_reasoning_mode ? AgentRole::ReasonerNonCoding : AgentRole::Reasoner;
}

std::string Orchestrator::fresh_verifier_session(int step) {
    for (int k = 0;; ++k) {
        std::string name = verifier_session_name(state_.problem_id, step, k);
        if (!state_.session_created(name)) {
            if (StepState* st = state_.find_step(step)) st->verifier_recreations = k;
            return name;
        }
    }
}

Orchestrator::DispatchOutcome Orchestrator::dispatch(AgentRole role, SessionMode mode,
                                                     const std::string& session, Purpose purpose,
                                                     int step, std::string instruction) {
    if (mode == SessionMode::Fresh && state_.session_created(session))
        throw InternalError("fresh session name collision: " + session);
    if (mode == SessionMode::Resume && !state_.session_created(session))
        throw InternalError("resume of a session never created: " + session);

    double budget = config_.budgets.reasoner;
    if (role == AgentRole::Verifier) budget = config_.budgets.verifier;
    if (role == AgentRole::Meta) budget = config_.budgets.meta;

    AgentRequest request;
    request.role = role;
    request.session = {mode, session};
    request.purpose = purpose;
    request.step = step;
    request.injected_state = render_live_state(state_, role);
    request.instruction = std::move(instruction);
    request.budget_seconds = budget;

    emit(EventKind::Dispatch, json{{"role", role_label(role)},
                                   {"session", session},
                                   {"mode", session_mode_label(mode)},
                                   {"purpose", purpose_label(purpose)},
                                   {"step", step}}
                                  .dump());

    AgentResponse response = backend_.dispatch(request);

    bool timed_out = response.timed_out;
    double wall = response.wall_seconds;
    if (!timed_out && wall > budget) {
        // Simulated backends declare how long the agent would have run; the
        // orchestrator is the one that stops it at the budget.
        timed_out = true;
        wall = budget + config_.timeout_grace_seconds;
    }
    if (clock_->simulated()) clock_->advance(wall);

    if (mode == SessionMode::Fresh) state_.created_sessions.push_back(session);
    state_.stats.invocations.push_back(
        AgentInvocation{role, purpose, session, mode, wall, timed_out, state_.phase, step});
    state_.stats.wall_clock_total += wall;

    if (timed_out)
        emit(EventKind::Timeout,
             json{{"session", session}, {"step", step}, {"wall_seconds", wall}}.dump());
    return DispatchOutcome{std::move(response.text), timed_out};
}

std::string Orchestrator::build_instruction(Purpose purpose,
                                            std::map<std::string, std::string> vars) const {
    vars.emplace("problem_id", state_.problem_id);
    std::string text;
    bool overridden = false;
    if (config_.prompts_dir && !config_.prompts_dir->empty()) {
        fs::path file = fs::path(*config_.prompts_dir) / (std::string(purpose_label(purpose)) + ".md");
        if (auto loaded = fsio::read_file_retry_once(file)) {
            text = std::move(*loaded);
            overridden = true;
        }
    }
    if (!overridden) text = std::string(builtin_template(purpose));
    text = expand_placeholders(std::move(text), vars);

    auto& skills = const_cast<SkillRegistry&>(skills_);
    for (const char* name : skills_for(purpose)) {
        if (const SkillDoc* doc = skills.try_load(name)) {
            text += "\n\n## Skill: ";
            text += name;
            text += "\n\n";
            text += doc->body;
        }
    }
    return text;
}

void Orchestrator::append_artifact(const fs::path& file, const std::string& marker,
                                   const std::string& block) {
    // Marker-guarded append: replaying a transition after a crash must not
    // duplicate the block.
    std::string existing;
    if (auto current = fsio::read_file_retry_once(file)) existing = std::move(*current);
    if (existing.find(marker) != std::string::npos) return;
    existing += block;
    fsio::atomic_write(file, existing);
}

// ---------------------------------------------------------------------------
// Exploration.
// ---------------------------------------------------------------------------

void Orchestrator::do_exploration() {
    WorkspacePaths paths{state_.workspace};
    const int round = state_.exploration_rounds_used + 1;
    const std::string session = reasoner_session();
    std::string instr =
        build_instruction(Purpose::Exploration, {{"round", std::to_string(round)}});
    DispatchOutcome out =
        dispatch(reasoner_role(), mode_for(session), session, Purpose::Exploration, 0,
                 std::move(instr));
    state_.exploration_rounds_used = round;

    if (out.timed_out)
        warnings_.push_back("exploration round " + std::to_string(round) +
                            " timed out; its partial text is treated as findings");

    const std::string marker =
        "## Exploration round " + std::to_string(round) + " (plan v" +
        std::to_string(state_.plan_version) + ")";
    append_artifact(paths.exploration_md(), marker, marker + "\n\n" + out.text + "\n");

    ExplorationReport report = parse_exploration(out.text);
    if (!report.findings_digest.empty())
        state_.exploration_findings.push_back(report.findings_digest);

    switch (report.outcome) {
    case ExplorationOutcome::Solved: {
        state_.stats.solved_in_exploration = true;
        fsio::atomic_write(paths.solution_md(), out.text);
        state_.solution_drafted = true;
        enter_phase(Phase::SolutionGeneration);
        break;
    }
    case ExplorationOutcome::PartiallySolved: {
        if (state_.exploration_rounds_used < config_.max_exploration_rounds) {
            const std::string meta = meta_session();
            std::string review_instr = build_instruction(
                Purpose::ExplorationReview, {{"round", std::to_string(round)}});
            DispatchOutcome decision = dispatch(AgentRole::Meta, mode_for(meta), meta,
                                                Purpose::ExplorationReview, 0,
                                                std::move(review_instr));
            if (parse_exploration_review(decision.text) ==
                ExplorationReviewDecision::AnotherRound)
                break; // stay in Exploration; the next iteration runs round+1
        }
        enter_phase(Phase::Planning);
        break;
    }
    case ExplorationOutcome::NeedPlan:
    case ExplorationOutcome::Unknown:
        enter_phase(Phase::Planning);
        break;
    }
    checkpoint();
}

// ---------------------------------------------------------------------------
// Planning.
// ---------------------------------------------------------------------------

void Orchestrator::do_planning() {
    if (config_.pre_planning_analysis && !state_.pre_planning_done) {
        const std::string session = meta_session();
        DispatchOutcome out = dispatch(AgentRole::Meta, mode_for(session), session,
                                       Purpose::PrePlanning, 0,
                                       build_instruction(Purpose::PrePlanning, {}));
        state_.planning_hints = out.text;
        state_.pre_planning_done = true;
        checkpoint();
        return;
    }

    const std::string session = reasoner_session();
    std::string hints;
    if (!state_.planning_hints.empty())
        hints = "\n\nStrategic notes from the overseer:\n\n" + state_.planning_hints;
    std::string retry_note;
    if (!state_.last_plan_error.empty())
        retry_note = "\n\nYour previous plan was rejected: " + state_.last_plan_error +
                     ". Provide a corrected numbered plan.";
    std::string instr = build_instruction(
        Purpose::Planning,
        {{"lo", std::to_string(config_.recommended_steps[0])},
         {"hi", std::to_string(config_.recommended_steps[1])},
         {"max", std::to_string(config_.max_total_steps)},
         {"hints", hints},
         {"retry_note", retry_note}});
    DispatchOutcome out = dispatch(reasoner_role(), mode_for(session), session, Purpose::Planning,
                                   0, std::move(instr));
    state_.plan_attempts_used += 1;

    PlanResult parsed = parse_plan(out.text, config_.max_total_steps);
    if (std::holds_alternative<PlanStructuralError>(parsed)) {
        std::string why = describe_plan_error(std::get<PlanStructuralError>(parsed));
        if (out.timed_out) why = "the planning session timed out; " + why;
        if (state_.plan_attempts_used >= kMaxPlanAttempts) {
            abort_run("plan structurally invalid " + std::to_string(state_.plan_attempts_used) +
                      " times in a row; last error: " + why);
            return;
        }
        state_.last_plan_error = why;
        checkpoint();
        return;
    }

    const ParsedPlan& plan = std::get<ParsedPlan>(parsed);
    PlanState ps;
    ps.version = state_.plan_version;
    ps.steps = plan.steps;
    state_.plan = std::move(ps);
    state_.steps.clear();
    for (const PlanStep& step : plan.steps) {
        StepState st;
        st.number = step.number;
        state_.steps.push_back(std::move(st));
    }
    state_.current_step = 1;
    state_.plan_attempts_used = 0;
    state_.last_plan_error.clear();

    std::string plan_doc = "# Plan v" + std::to_string(state_.plan_version) + "\n\n";
    for (const PlanStep& step : plan.steps)
        plan_doc += std::to_string(step.number) + ". " + step.goal + "\n";
    fsio::atomic_write(WorkspacePaths{state_.workspace}.plan_md(), plan_doc);

    enter_phase(Phase::StepExecution);
    checkpoint();
}

// ---------------------------------------------------------------------------
// Step execution.
// ---------------------------------------------------------------------------

void Orchestrator::do_step_execution() {
    StepState* step = state_.find_step(state_.current_step);
    if (!step) throw InternalError("current step " + std::to_string(state_.current_step) +
                                   " has no step state");
    switch (step->status) {
    case StepStatus::Pending: do_execute_step(*step); break;
    case StepStatus::UnderReview: do_review_step(*step); break;
    case StepStatus::InChallenge: do_defense(*step); break;
    default:
        throw InternalError("step " + std::to_string(step->number) +
                            " in unexpected status during step execution");
    }
}

void Orchestrator::do_execute_step(StepState& step) {
    WorkspacePaths paths{state_.workspace};
    const PlanStep* goal = nullptr;
    for (const PlanStep& ps : state_.plan->steps)
        if (ps.number == step.number) goal = &ps;
    if (!goal) throw InternalError("no plan goal for step " + std::to_string(step.number));

    const std::string session = reasoner_session();
    std::string code_note =
        state_.pure_reasoning_mode
            ? "Code execution is disabled for this attempt: argue everything by hand and "
              "prefer claims a reviewer can check directly."
            : "Write code under code/ whenever computation settles a claim faster than prose.";
    std::string guidance;
    if (!state_.pending_guidance.empty())
        guidance = "\n\nGuidance from the overseer:\n\n" + state_.pending_guidance;
    char budget_minutes[32];
    std::snprintf(budget_minutes, sizeof(budget_minutes), "%.0f", config_.budgets.reasoner / 60.0);

    std::string instr = build_instruction(Purpose::StepReport,
                                          {{"step", std::to_string(step.number)},
                                           {"goal", goal->goal},
                                           {"code_note", std::move(code_note)},
                                           {"budget_minutes", budget_minutes},
                                           {"guidance", std::move(guidance)}});
    DispatchOutcome out = dispatch(reasoner_role(), mode_for(session), session,
                                   Purpose::StepReport, step.number, std::move(instr));
    if (out.timed_out) {
        handle_timeout(step, out.text);
        checkpoint();
        return;
    }

    step.consecutive_timeouts = 0;
    state_.pending_guidance.clear();
    fsio::atomic_write(paths.step_report(step.number), out.text);
    step.report_path = WorkspacePaths::step_report_name(step.number);

    if (detect_plan_blocked(out.text)) {
        emit(EventKind::ReplanProposed,
             json{{"trigger", replan_trigger_label(ReplanTrigger::PlanBlocked)},
                  {"step", step.number}}
                 .dump());
        decide_replan(ReplanTrigger::PlanBlocked, out.text, step.number);
        checkpoint();
        return;
    }

    step.status = StepStatus::UnderReview;
    checkpoint();
}

void Orchestrator::do_review_step(StepState& step) {
    WorkspacePaths paths{state_.workspace};
    const bool new_cycle = step.verifier_session.empty();
    const std::string session =
        new_cycle ? fresh_verifier_session(step.number) : step.verifier_session;
    const Purpose purpose =
        step.challenge_rounds > 0 ? Purpose::ChallengeReview : Purpose::StepReview;

    std::string instr;
    if (purpose == Purpose::StepReview) {
        std::string report = fsio::read_file(paths.step_report(step.number));
        instr = build_instruction(Purpose::StepReview, {{"step", std::to_string(step.number)},
                                                        {"report", std::move(report)}});
    } else {
        std::string debate;
        if (auto d = fsio::read_file_retry_once(paths.step_debate(step.number)))
            debate = std::move(*d);
        instr = build_instruction(Purpose::ChallengeReview,
                                  {{"step", std::to_string(step.number)},
                                   {"debate", std::move(debate)}});
    }

    DispatchOutcome out = dispatch(AgentRole::Verifier,
                                   new_cycle ? SessionMode::Fresh : SessionMode::Resume, session,
                                   purpose, step.number, std::move(instr));
    if (new_cycle) step.verifier_session = session;

    VerdictResult parsed =
        out.timed_out
            ? VerdictResult{Escalation{Escalation::Reason::MissingSection,
                                       "the review session timed out"}}
            : parse_verdict(out.text, state_.current_step, &warnings_);

    if (std::holds_alternative<Escalation>(parsed)) {
        const Escalation& esc = std::get<Escalation>(parsed);
        emit(EventKind::VerdictParsed,
             json{{"step", step.number}, {"verdict", "ESCALATION"}, {"reason", esc.detail}}
                 .dump());
        emit(EventKind::ReplanProposed,
             json{{"trigger", replan_trigger_label(ReplanTrigger::VerifierProposed)},
                  {"step", step.number},
                  {"reason", "unreadable verdict: " + esc.detail}}
                 .dump());
        decide_replan(ReplanTrigger::VerifierProposed,
                      "The verifier reply could not be parsed (" + esc.detail +
                          "). Full reply:\n\n" + out.text,
                      step.number);
        checkpoint();
        return;
    }

    const Verdict& verdict = std::get<Verdict>(parsed);
    switch (verdict.tag) {
    case VerdictTag::Accept: {
        std::string report = fsio::read_file(paths.step_report(step.number));
        TagTally tally = extract_tags(report);
        if (step.challenge_rounds > 0) step.challenge_rounds += 1; // the accepting round counts
        emit(EventKind::VerdictParsed,
             json{{"step", step.number},
                  {"verdict", "ACCEPT"},
                  {"tags",
                   json{{"verified", tally.verified},
                        {"easy_verify", tally.easy_verify},
                        {"hard_verify", tally.hard_verify}}},
                  {"entries", verdict.ledger_entries.size()}}
                 .dump());
        const Phase before = state_.phase;
        record_accepted_step(state_, step.number, verdict.ledger_entries, tally);
        if (state_.phase != before)
            emit(EventKind::PhaseEnter, json{{"phase", phase_label(state_.phase)}}.dump());
        break;
    }
    case VerdictTag::Challenge: {
        step.challenge_rounds += 1;
        emit(EventKind::VerdictParsed,
             json{{"step", step.number}, {"verdict", "CHALLENGE"}}.dump());
        emit(EventKind::ChallengeRound,
             json{{"step", step.number}, {"round", step.challenge_rounds}}.dump());
        if (step.challenge_rounds >= config_.challenge_round_bound()) {
            emit(EventKind::Stalemate,
                 json{{"step", step.number}, {"rounds", step.challenge_rounds}}.dump());
            emit(EventKind::ReplanProposed,
                 json{{"trigger", replan_trigger_label(ReplanTrigger::Stalemate)},
                      {"step", step.number}}
                     .dump());
            decide_replan(ReplanTrigger::Stalemate, verdict.objections, step.number);
            break;
        }
        state_.last_objections = verdict.objections;
        const std::string marker = "## Challenge round " + std::to_string(step.challenge_rounds);
        append_artifact(paths.step_debate(step.number), marker,
                        marker + "\n\n### Objections\n\n" + verdict.objections + "\n");
        step.status = StepStatus::InChallenge;
        break;
    }
    case VerdictTag::TraceBack: {
        emit(EventKind::VerdictParsed,
             json{{"step", step.number},
                  {"verdict", "TRACE_BACK"},
                  {"target", verdict.trace_back_target}}
                 .dump());
        emit(EventKind::TraceBack, json{{"from", step.number},
                                        {"to", verdict.trace_back_target},
                                        {"trigger", "verifier"}}
                                       .dump());
        apply_trace_back(state_, verdict.trace_back_target);
        break;
    }
    case VerdictTag::ProposeReplan: {
        emit(EventKind::VerdictParsed,
             json{{"step", step.number}, {"verdict", "PROPOSE_REPLAN"}}.dump());
        emit(EventKind::ReplanProposed,
             json{{"trigger", replan_trigger_label(ReplanTrigger::VerifierProposed)},
                  {"step", step.number}}
                 .dump());
        decide_replan(ReplanTrigger::VerifierProposed, verdict.objections, step.number);
        break;
    }
    }
    checkpoint();
}

void Orchestrator::do_defense(StepState& step) {
    WorkspacePaths paths{state_.workspace};
    const std::string session = reasoner_session();
    std::string instr = build_instruction(Purpose::Defense,
                                          {{"step", std::to_string(step.number)},
                                           {"objections", state_.last_objections}});
    DispatchOutcome out = dispatch(reasoner_role(), mode_for(session), session, Purpose::Defense,
                                   step.number, std::move(instr));
    if (out.timed_out)
        warnings_.push_back("defense on step " + std::to_string(step.number) +
                            " timed out; its partial text goes to the reviewer");

    const std::string marker = "### Defense (round " + std::to_string(step.challenge_rounds) + ")";
    append_artifact(paths.step_debate(step.number), marker, marker + "\n\n" + out.text + "\n");
    step.status = StepStatus::UnderReview;
    checkpoint();
}

// ---------------------------------------------------------------------------
// Timeouts and re-planning.
// ---------------------------------------------------------------------------

void Orchestrator::handle_timeout(StepState& step, const std::string& partial) {
    step.timeout_count += 1;
    step.consecutive_timeouts += 1;

    const std::string session = meta_session();
    std::string instr = build_instruction(
        Purpose::Intervention, {{"step", std::to_string(step.number)},
                                {"consecutive", std::to_string(step.consecutive_timeouts)},
                                {"partial", partial}});
    DispatchOutcome out = dispatch(AgentRole::Meta, mode_for(session), session,
                                   Purpose::Intervention, step.number, std::move(instr));

    InterventionResult parsed =
        out.timed_out ? InterventionResult{Escalation{Escalation::Reason::MissingSection,
                                                      "the intervention session timed out"}}
                      : parse_meta_intervention(out.text, state_.current_step, &warnings_);

    MetaIntervention mi; // defaults to RETRY_STEP without the pure switch
    if (std::holds_alternative<Escalation>(parsed)) {
        warnings_.push_back("unreadable intervention (" +
                            std::get<Escalation>(parsed).detail + "); defaulting to a retry");
        emit(EventKind::MetaIntervention,
             json{{"step", step.number}, {"action", "RETRY_STEP"}, {"note", "malformed reply"}}
                 .dump());
    } else {
        mi = std::get<MetaIntervention>(parsed);
        json payload{{"step", step.number}, {"pure", mi.use_pure_reasoning}};
        switch (mi.action) {
        case MetaAction::RetryStep: payload["action"] = "RETRY_STEP"; break;
        case MetaAction::TraceBack:
            payload["action"] = "TRACE_BACK";
            payload["target"] = mi.trace_back_target;
            break;
        case MetaAction::ProposeReplan: payload["action"] = "PROPOSE_REPLAN"; break;
        case MetaAction::Abort: payload["action"] = "ABORT"; break;
        }
        emit(EventKind::MetaIntervention, payload.dump());
    }

    std::string guidance = mi.guidance;
    if (!mi.extracted_partials.empty()) {
        if (!guidance.empty()) guidance += "\n\n";
        guidance += "Salvaged from the timed-out attempt:\n\n" + mi.extracted_partials;
    }

    switch (mi.action) {
    case MetaAction::RetryStep:
        if (mi.use_pure_reasoning && !state_.pure_reasoning_mode) {
            state_.pure_reasoning_mode = true;
            emit(EventKind::PureReasoningOn, json{{"step", step.number}}.dump());
        }
        state_.pending_guidance = guidance;
        break;
    case MetaAction::TraceBack:
        if (mi.use_pure_reasoning && !state_.pure_reasoning_mode) {
            state_.pure_reasoning_mode = true;
            emit(EventKind::PureReasoningOn, json{{"step", step.number}}.dump());
        }
        emit(EventKind::TraceBack, json{{"from", step.number},
                                        {"to", mi.trace_back_target},
                                        {"trigger", "meta"}}
                                       .dump());
        apply_trace_back(state_, mi.trace_back_target);
        state_.pending_guidance = guidance;
        break;
    case MetaAction::ProposeReplan:
        emit(EventKind::ReplanProposed,
             json{{"trigger", replan_trigger_label(ReplanTrigger::MetaRequested)},
                  {"step", step.number}}
                 .dump());
        decide_replan(ReplanTrigger::MetaRequested, out.text, step.number);
        return;
    case MetaAction::Abort:
        abort_run("meta intervention after a step timeout requested abort");
        return;
    }

    // Chronic timeouts: the intervention above still applies, then the replan
    // question is forced before the step is dispatched again.
    if (state_.outcome == Outcome::InProgress &&
        step.consecutive_timeouts >= config_.chronic_timeout_threshold) {
        emit(EventKind::ReplanProposed,
             json{{"trigger", replan_trigger_label(ReplanTrigger::ChronicTimeouts)},
                  {"step", step.number},
                  {"consecutive", step.consecutive_timeouts}}
                 .dump());
        ReplanTag tag = decide_replan(ReplanTrigger::ChronicTimeouts,
                                      "Step " + std::to_string(step.number) + " timed out " +
                                          std::to_string(step.consecutive_timeouts) +
                                          " times in a row despite interventions.",
                                      step.number);
        if (tag == ReplanTag::Continue || tag == ReplanTag::TraceBack)
            step.consecutive_timeouts = 0; // meta chose a fix; give it a fresh window
    }
}

ReplanTag Orchestrator::decide_replan(ReplanTrigger trigger, const std::string& context,
                                      int step_number) {
    const std::string session = meta_session();
    std::string instr = build_instruction(Purpose::ReplanDecision,
                                          {{"trigger", replan_trigger_label(trigger)},
                                           {"context", context}});
    DispatchOutcome out = dispatch(AgentRole::Meta, mode_for(session), session,
                                   Purpose::ReplanDecision, step_number, instr);
    ReplanResult parsed =
        out.timed_out ? ReplanResult{Escalation{Escalation::Reason::MissingSection,
                                                "the decision session timed out"}}
                      : parse_replan_decision(out.text, state_.current_step, &warnings_);

    if (std::holds_alternative<Escalation>(parsed)) {
        // One corrective re-dispatch; a second unreadable reply aborts.
        std::string retry = instr +
                            "\n\nYour previous reply could not be parsed (" +
                            std::get<Escalation>(parsed).detail +
                            "). Reply again using exactly the sections listed above.";
        out = dispatch(AgentRole::Meta, SessionMode::Resume, session, Purpose::ReplanDecision,
                       step_number, std::move(retry));
        parsed = out.timed_out
                     ? ReplanResult{Escalation{Escalation::Reason::MissingSection,
                                               "the decision session timed out"}}
                     : parse_replan_decision(out.text, state_.current_step, &warnings_);
        if (std::holds_alternative<Escalation>(parsed)) {
            abort_run("re-plan decision unreadable twice: " +
                      std::get<Escalation>(parsed).detail);
            return ReplanTag::Abort;
        }
    }

    const ReplanDecision& decision = std::get<ReplanDecision>(parsed);
    json payload{{"trigger", replan_trigger_label(trigger)}, {"step", step_number}};
    switch (decision.tag) {
    case ReplanTag::Continue: payload["decision"] = "CONTINUE"; break;
    case ReplanTag::TraceBack:
        payload["decision"] = "TRACE_BACK";
        payload["target"] = decision.trace_back_target;
        break;
    case ReplanTag::ApproveReplan:
        payload["decision"] = "APPROVE_REPLAN";
        payload["forbidden"] = decision.forbidden_directions.size();
        payload["reusable"] = decision.reusable_results.size();
        break;
    case ReplanTag::Abort: payload["decision"] = "ABORT"; break;
    }
    emit(EventKind::ReplanDecided, payload.dump());

    switch (decision.tag) {
    case ReplanTag::Continue:
        apply_continue(trigger, decision, step_number);
        return ReplanTag::Continue;
    case ReplanTag::TraceBack:
        emit(EventKind::TraceBack, json{{"from", state_.current_step},
                                        {"to", decision.trace_back_target},
                                        {"trigger", "replan_decision"}}
                                       .dump());
        apply_trace_back(state_, decision.trace_back_target);
        if (!decision.reason_summary.empty()) state_.pending_guidance = decision.reason_summary;
        return ReplanTag::TraceBack;
    case ReplanTag::Abort:
        abort_run("meta declined to continue" +
                  (decision.reason_summary.empty() ? std::string()
                                                   : ": " + decision.reason_summary));
        return ReplanTag::Abort;
    case ReplanTag::ApproveReplan: {
        if (state_.replan_count >= config_.max_replans) {
            abort_run("re-plan approved but the budget of " +
                      std::to_string(config_.max_replans) + " re-plans is exhausted");
            return ReplanTag::ApproveReplan;
        }
        apply_replan(state_, decision);
        emit(EventKind::PhaseEnter, json{{"phase", phase_label(state_.phase)}}.dump());
        return ReplanTag::ApproveReplan;
    }
    }
    return ReplanTag::Continue;
}

void Orchestrator::apply_continue(ReplanTrigger trigger, const ReplanDecision& decision,
                                  int step_number) {
    if (!decision.reason_summary.empty()) state_.pending_guidance = decision.reason_summary;
    StepState* step = state_.find_step(step_number);
    switch (trigger) {
    case ReplanTrigger::Stalemate:
        // Scrap the stuck review cycle and re-run the step from scratch.
        if (step) {
            step->status = StepStatus::Pending;
            step->challenge_rounds = 0;
            step->verifier_session.clear();
        }
        break;
    case ReplanTrigger::PlanBlocked:
    case ReplanTrigger::ChronicTimeouts:
    case ReplanTrigger::MetaRequested:
        // The step stays (or returns to) Pending and is retried.
        if (step && step->status != StepStatus::Pending) {
            step->status = StepStatus::Pending;
            step->challenge_rounds = 0;
            step->verifier_session.clear();
        }
        break;
    case ReplanTrigger::VerifierProposed:
        // Proposal declined: the review itself is re-run. For whole-solution
        // reviews (step 0) solution_drafted stays true, so the next solution
        // iteration re-reviews.
        break;
    }
}

// ---------------------------------------------------------------------------
// Solution generation.
// ---------------------------------------------------------------------------

void Orchestrator::do_solution() {
    WorkspacePaths paths{state_.workspace};
    if (!state_.solution_drafted) {
        const std::string session = reasoner_session();
        std::string rejection_note;
        if (!state_.last_solution_rejection.empty())
            rejection_note = "\n\nThe previous writeup was rejected: " +
                             state_.last_solution_rejection +
                             "\nAddress that directly in this version.";
        std::string instr = build_instruction(Purpose::Solution,
                                              {{"rejection_note", std::move(rejection_note)}});
        DispatchOutcome out = dispatch(reasoner_role(), mode_for(session), session,
                                       Purpose::Solution, 0, std::move(instr));
        if (out.timed_out) {
            reject_solution("the drafting session timed out", "timeout");
            return;
        }
        fsio::atomic_write(paths.solution_md(), out.text);
        state_.solution_drafted = true;
        checkpoint();
        return;
    }
    review_solution();
}

void Orchestrator::review_solution() {
    WorkspacePaths paths{state_.workspace};
    std::string solution = fsio::read_file(paths.solution_md());
    const std::string session = fresh_verifier_session(0);
    std::string instr = build_instruction(Purpose::SolutionReview, {{"solution", solution}});
    DispatchOutcome out = dispatch(AgentRole::Verifier, SessionMode::Fresh, session,
                                   Purpose::SolutionReview, 0, std::move(instr));

    // Whole-solution reviews run with no current step, so a TRACE_BACK verdict
    // here cannot resolve a target and lands in the escalation branch below:
    // it is treated as a rejection, not as a step trace-back.
    VerdictResult parsed =
        out.timed_out
            ? VerdictResult{Escalation{Escalation::Reason::MissingSection,
                                       "the review session timed out"}}
            : parse_verdict(out.text, 0, &warnings_);

    if (std::holds_alternative<Escalation>(parsed)) {
        const Escalation& esc = std::get<Escalation>(parsed);
        emit(EventKind::VerdictParsed,
             json{{"step", 0}, {"verdict", "ESCALATION"}, {"reason", esc.detail}}.dump());
        reject_solution("the review reply could not be used (" + esc.detail + ")", "escalation");
        return;
    }

    const Verdict& verdict = std::get<Verdict>(parsed);
    switch (verdict.tag) {
    case VerdictTag::Accept: {
        emit(EventKind::VerdictParsed, json{{"step", 0}, {"verdict", "ACCEPT"}}.dump());
        if (config_.meta_whole_solution_review) {
            const std::string meta = meta_session();
            std::string meta_instr = build_instruction(Purpose::MetaSolutionReview,
                                                       {{"solution", solution}});
            DispatchOutcome second = dispatch(AgentRole::Meta, mode_for(meta), meta,
                                              Purpose::MetaSolutionReview, 0,
                                              std::move(meta_instr));
            if (parse_solution_review(second.text, &warnings_) == SolutionReviewDecision::Reject) {
                reject_solution("the overseer rejected the accepted solution:\n\n" + second.text,
                                "meta_reject");
                return;
            }
        }
        emit(EventKind::SolutionAccepted, json{{"plan_version", state_.plan_version}}.dump());
        solve_run();
        return;
    }
    case VerdictTag::Challenge:
        emit(EventKind::VerdictParsed, json{{"step", 0}, {"verdict", "CHALLENGE"}}.dump());
        reject_solution(verdict.objections, "verifier_challenge");
        return;
    case VerdictTag::ProposeReplan:
        emit(EventKind::VerdictParsed, json{{"step", 0}, {"verdict", "PROPOSE_REPLAN"}}.dump());
        emit(EventKind::ReplanProposed,
             json{{"trigger", replan_trigger_label(ReplanTrigger::VerifierProposed)}, {"step", 0}}
                 .dump());
        decide_replan(ReplanTrigger::VerifierProposed, verdict.objections, 0);
        checkpoint();
        return;
    case VerdictTag::TraceBack:
        // Unreachable: resolve_target rejects every target when current_step
        // is 0, so TRACE_BACK surfaces as an escalation above.
        reject_solution("the reviewer asked for a step trace-back on the final writeup",
                        "trace_back");
        return;
    }
}

void Orchestrator::reject_solution(const std::string& why, const char* reason_key) {
    state_.solution_retries_used += 1;
    emit(EventKind::SolutionRejected,
         json{{"reason", reason_key}, {"rejection", state_.solution_retries_used}}.dump());
    state_.solution_drafted = false;
    state_.last_solution_rejection = why;
    if (state_.solution_retries_used > config_.max_solution_retries) {
        abort_run("solution rejected " + std::to_string(state_.solution_retries_used) +
                  " times (budget: 1 draft + " + std::to_string(config_.max_solution_retries) +
                  " retries)");
        return;
    }
    checkpoint();
}

} // namespace troika
