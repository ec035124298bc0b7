#include "troika/state.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstring>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "troika/errors.hpp"

namespace fs = std::filesystem;

namespace troika {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Small helpers.
// ---------------------------------------------------------------------------

const char* step_status_label(StepStatus s) {
    switch (s) {
    case StepStatus::Pending: return "pending";
    case StepStatus::Executing: return "executing";
    case StepStatus::UnderReview: return "under_review";
    case StepStatus::InChallenge: return "in_challenge";
    case StepStatus::Accepted: return "accepted";
    case StepStatus::Archived: return "archived";
    }
    return "pending";
}

std::optional<StepStatus> step_status_from_label(std::string_view label) {
    static constexpr StepStatus all[] = {StepStatus::Pending,     StepStatus::Executing,
                                         StepStatus::UnderReview, StepStatus::InChallenge,
                                         StepStatus::Accepted,    StepStatus::Archived};
    for (StepStatus s : all)
        if (label == step_status_label(s)) return s;
    return std::nullopt;
}

StepState* ProblemState::find_step(int number) {
    for (auto& s : steps)
        if (s.number == number) return &s;
    return nullptr;
}

const StepState* ProblemState::find_step(int number) const {
    for (const auto& s : steps)
        if (s.number == number) return &s;
    return nullptr;
}

bool ProblemState::session_created(std::string_view name) const {
    return std::find(created_sessions.begin(), created_sessions.end(), name) !=
           created_sessions.end();
}

bool ProblemState::operator==(const ProblemState& o) const {
    // The serialized mirror covers every persistent field; workspace is
    // runtime plumbing and deliberately excluded.
    return state_to_json(*this) == state_to_json(o);
}

std::string WorkspacePaths::step_report_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step-%02d-report.md", step);
    return buf;
}

std::string WorkspacePaths::step_debate_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "step-%02d-debate.md", step);
    return buf;
}

// ---------------------------------------------------------------------------
// Workspace lock.
// ---------------------------------------------------------------------------

WorkspaceLock::WorkspaceLock(const fs::path& workspace_root) {
    lock_path_ = WorkspacePaths{workspace_root}.lock_file();
    for (int attempt = 0; attempt < 2; ++attempt) {
        int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            std::string pid = std::to_string(::getpid()) + "\n";
            (void)!::write(fd, pid.data(), pid.size());
            ::close(fd);
            held_ = true;
            return;
        }
        if (errno != EEXIST) throw Error("cannot create lock file: " + lock_path_.string());
        // Reclaim a stale lock left by a dead process; otherwise refuse.
        long other = 0;
        if (auto text = fsio::read_file_retry_once(lock_path_)) other = std::atol(text->c_str());
        if (other > 0 && (::kill(static_cast<pid_t>(other), 0) == 0 || errno == EPERM))
            throw WorkspaceLocked(workspace_root.string());
        std::error_code ec;
        fs::remove(lock_path_, ec);
    }
    throw WorkspaceLocked(workspace_root.string());
}

WorkspaceLock::~WorkspaceLock() {
    if (held_) {
        std::error_code ec;
        fs::remove(lock_path_, ec);
    }
}

// ---------------------------------------------------------------------------
// JSON serialization.
// ---------------------------------------------------------------------------

namespace {

ojson result_to_json(const VerifiedResult& r) {
    return ojson{{"category", category_label(r.category)},
                 {"text", r.text},
                 {"source_step", r.source_step},
                 {"plan_version", r.plan_version},
                 {"rescued", r.rescued},
                 {"code_grounded", r.code_grounded}};
}

VerifiedResult result_from_json(const json& j) {
    VerifiedResult r;
    auto cat = category_from_label(j.at("category").get<std::string>());
    if (!cat) throw Error("bad ledger category");
    r.category = *cat;
    r.text = j.at("text").get<std::string>();
    r.source_step = j.at("source_step").get<int>();
    r.plan_version = j.at("plan_version").get<int>();
    r.rescued = j.at("rescued").get<bool>();
    r.code_grounded = j.at("code_grounded").get<bool>();
    return r;
}

ojson invocation_to_json(const AgentInvocation& inv) {
    return ojson{{"role", role_label(inv.role)},
                 {"purpose", purpose_label(inv.purpose)},
                 {"session", inv.session},
                 {"mode", session_mode_label(inv.mode)},
                 {"wall_seconds", inv.wall_seconds},
                 {"timed_out", inv.timed_out},
                 {"phase", phase_label(inv.phase)},
                 {"step", inv.step}};
}

AgentInvocation invocation_from_json(const json& j) {
    AgentInvocation inv;
    auto role = role_from_label(j.at("role").get<std::string>());
    auto purpose = purpose_from_label(j.at("purpose").get<std::string>());
    auto phase = phase_from_label(j.at("phase").get<std::string>());
    if (!role || !purpose || !phase) throw Error("bad invocation enum");
    inv.role = *role;
    inv.purpose = *purpose;
    inv.phase = *phase;
    inv.session = j.at("session").get<std::string>();
    inv.mode = j.at("mode").get<std::string>() == "fresh" ? SessionMode::Fresh : SessionMode::Resume;
    inv.wall_seconds = j.at("wall_seconds").get<double>();
    inv.timed_out = j.at("timed_out").get<bool>();
    inv.step = j.at("step").get<int>();
    return inv;
}

ojson stats_to_json(const RunStats& s) {
    ojson invs = ojson::array();
    for (const auto& inv : s.invocations) invs.push_back(invocation_to_json(inv));
    return ojson{{"invocations", std::move(invs)},
                 {"trace_backs", s.trace_backs},
                 {"replans", s.replans},
                 {"solved_in_exploration", s.solved_in_exploration},
                 {"wall_clock_total", s.wall_clock_total},
                 {"tag_tally",
                  ojson{{"verified", s.tag_tally.verified},
                        {"easy_verify", s.tag_tally.easy_verify},
                        {"hard_verify", s.tag_tally.hard_verify}}},
                 {"step_reports", s.step_reports}};
}

RunStats stats_from_json(const json& j) {
    RunStats s;
    for (const auto& e : j.at("invocations")) s.invocations.push_back(invocation_from_json(e));
    s.trace_backs = j.at("trace_backs").get<int>();
    s.replans = j.at("replans").get<int>();
    s.solved_in_exploration = j.at("solved_in_exploration").get<bool>();
    s.wall_clock_total = j.at("wall_clock_total").get<double>();
    const auto& t = j.at("tag_tally");
    s.tag_tally.verified = t.at("verified").get<long>();
    s.tag_tally.easy_verify = t.at("easy_verify").get<long>();
    s.tag_tally.hard_verify = t.at("hard_verify").get<long>();
    s.step_reports = j.at("step_reports").get<int>();
    return s;
}

ojson step_to_json(const StepState& s) {
    return ojson{{"number", s.number},
                 {"status", step_status_label(s.status)},
                 {"challenge_rounds", s.challenge_rounds},
                 {"trace_back_count", s.trace_back_count},
                 {"timeout_count", s.timeout_count},
                 {"consecutive_timeouts", s.consecutive_timeouts},
                 {"report_path", s.report_path},
                 {"verifier_session", s.verifier_session},
                 {"verifier_recreations", s.verifier_recreations}};
}

StepState step_from_json(const json& j) {
    StepState s;
    s.number = j.at("number").get<int>();
    auto status = step_status_from_label(j.at("status").get<std::string>());
    if (!status) throw Error("bad step status");
    s.status = *status;
    s.challenge_rounds = j.at("challenge_rounds").get<int>();
    s.trace_back_count = j.at("trace_back_count").get<int>();
    s.timeout_count = j.at("timeout_count").get<int>();
    s.consecutive_timeouts = j.at("consecutive_timeouts").get<int>();
    s.report_path = j.at("report_path").get<std::string>();
    s.verifier_session = j.at("verifier_session").get<std::string>();
    s.verifier_recreations = j.at("verifier_recreations").get<int>();
    return s;
}

ojson record_to_json(const FailureRecord& r) {
    ojson rescued = ojson::array();
    for (const auto& e : r.rescued_results) rescued.push_back(result_to_json(e));
    return ojson{{"plan_version_abandoned", r.plan_version_abandoned},
                 {"reason_summary", r.reason_summary},
                 {"plan_summary", r.plan_summary},
                 {"forbidden_directions", r.forbidden_directions},
                 {"rescued_results", std::move(rescued)}};
}

FailureRecord record_from_json(const json& j) {
    FailureRecord r;
    r.plan_version_abandoned = j.at("plan_version_abandoned").get<int>();
    r.reason_summary = j.at("reason_summary").get<std::string>();
    r.plan_summary = j.at("plan_summary").get<std::string>();
    r.forbidden_directions = j.at("forbidden_directions").get<std::vector<std::string>>();
    for (const auto& e : j.at("rescued_results")) r.rescued_results.push_back(result_from_json(e));
    return r;
}

ojson archive_to_json(const ArchiveEntry& a) {
    return ojson{{"plan_version", a.plan_version},
                 {"step_lo", a.step_lo},
                 {"step_hi", a.step_hi},
                 {"label", a.label},
                 {"artifacts", a.artifacts}};
}

ArchiveEntry archive_from_json(const json& j) {
    ArchiveEntry a;
    a.plan_version = j.at("plan_version").get<int>();
    a.step_lo = j.at("step_lo").get<int>();
    a.step_hi = j.at("step_hi").get<int>();
    a.label = j.at("label").get<std::string>();
    a.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    return a;
}

} // namespace

std::string state_to_json(const ProblemState& s) {
    ojson j;
    j["schema"] = 1;
    j["problem_id"] = s.problem_id;
    j["statement"] = s.statement;
    j["config"] = json::parse(s.config.to_json());
    j["phase"] = phase_label(s.phase);
    j["outcome"] = outcome_label(s.outcome);
    j["abort_reason"] = s.abort_reason;
    if (s.plan) {
        ojson steps = ojson::array();
        for (const auto& st : s.plan->steps)
            steps.push_back(ojson{{"number", st.number}, {"goal", st.goal}});
        j["plan"] = ojson{{"version", s.plan->version}, {"steps", std::move(steps)}};
    } else {
        j["plan"] = nullptr;
    }
    j["plan_version"] = s.plan_version;
    j["current_step"] = s.current_step;
    j["replan_count"] = s.replan_count;
    j["exploration_rounds_used"] = s.exploration_rounds_used;
    j["solution_retries_used"] = s.solution_retries_used;
    j["plan_attempts_used"] = s.plan_attempts_used;
    j["reasoner_attempt_index"] = s.reasoner_attempt_index;
    j["pure_reasoning_mode"] = s.pure_reasoning_mode;
    ojson steps = ojson::array();
    for (const auto& st : s.steps) steps.push_back(step_to_json(st));
    j["steps"] = std::move(steps);
    ojson results = ojson::array();
    for (const auto& r : s.verified_results) results.push_back(result_to_json(r));
    j["verified_results"] = std::move(results);
    ojson staging = ojson::array();
    for (const auto& r : s.rescued_staging) staging.push_back(result_to_json(r));
    j["rescued_staging"] = std::move(staging);
    ojson records = ojson::array();
    for (const auto& r : s.failed_records) records.push_back(record_to_json(r));
    j["failed_records"] = std::move(records);
    j["exploration_findings"] = s.exploration_findings;
    ojson archives = ojson::array();
    for (const auto& a : s.archives) archives.push_back(archive_to_json(a));
    j["archives"] = std::move(archives);
    j["created_sessions"] = s.created_sessions;
    j["pre_planning_done"] = s.pre_planning_done;
    j["planning_hints"] = s.planning_hints;
    j["last_plan_error"] = s.last_plan_error;
    j["last_objections"] = s.last_objections;
    j["pending_guidance"] = s.pending_guidance;
    j["solution_drafted"] = s.solution_drafted;
    j["last_solution_rejection"] = s.last_solution_rejection;
    j["events_logged"] = s.events_logged;
    j["stats"] = stats_to_json(s.stats);
    return j.dump(2) + "\n";
}

ProblemState state_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("state mirror is not valid JSON: ") + e.what());
    }
    ProblemState s;
    try {
        if (j.at("schema").get<int>() != 1) throw Error("unknown state schema version");
        s.problem_id = j.at("problem_id").get<std::string>();
        s.statement = j.at("statement").get<std::string>();
        s.config = Config::from_json(j.at("config").dump());
        auto phase = phase_from_label(j.at("phase").get<std::string>());
        auto outcome = outcome_from_label(j.at("outcome").get<std::string>());
        if (!phase || !outcome) throw Error("bad phase/outcome label");
        s.phase = *phase;
        s.outcome = *outcome;
        s.abort_reason = j.at("abort_reason").get<std::string>();
        if (!j.at("plan").is_null()) {
            PlanState plan;
            plan.version = j["plan"].at("version").get<int>();
            for (const auto& st : j["plan"].at("steps"))
                plan.steps.push_back(
                    PlanStep{st.at("number").get<int>(), st.at("goal").get<std::string>()});
            s.plan = std::move(plan);
        }
        s.plan_version = j.at("plan_version").get<int>();
        s.current_step = j.at("current_step").get<int>();
        s.replan_count = j.at("replan_count").get<int>();
        s.exploration_rounds_used = j.at("exploration_rounds_used").get<int>();
        s.solution_retries_used = j.at("solution_retries_used").get<int>();
        s.plan_attempts_used = j.at("plan_attempts_used").get<int>();
        s.reasoner_attempt_index = j.at("reasoner_attempt_index").get<int>();
        s.pure_reasoning_mode = j.at("pure_reasoning_mode").get<bool>();
        for (const auto& st : j.at("steps")) s.steps.push_back(step_from_json(st));
        for (const auto& r : j.at("verified_results")) s.verified_results.push_back(result_from_json(r));
        for (const auto& r : j.at("rescued_staging")) s.rescued_staging.push_back(result_from_json(r));
        for (const auto& r : j.at("failed_records")) s.failed_records.push_back(record_from_json(r));
        s.exploration_findings = j.at("exploration_findings").get<std::vector<std::string>>();
        for (const auto& a : j.at("archives")) s.archives.push_back(archive_from_json(a));
        s.created_sessions = j.at("created_sessions").get<std::vector<std::string>>();
        s.pre_planning_done = j.at("pre_planning_done").get<bool>();
        s.planning_hints = j.at("planning_hints").get<std::string>();
        s.last_plan_error = j.at("last_plan_error").get<std::string>();
        s.last_objections = j.at("last_objections").get<std::string>();
        s.pending_guidance = j.at("pending_guidance").get<std::string>();
        s.solution_drafted = j.at("solution_drafted").get<bool>();
        s.last_solution_rejection = j.at("last_solution_rejection").get<std::string>();
        s.events_logged = j.at("events_logged").get<long>();
        s.stats = stats_from_json(j.at("stats"));
    } catch (const json::exception& e) {
        throw Error(std::string("state mirror missing fields: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Live-state rendering.
// ---------------------------------------------------------------------------

namespace {

void render_entry(std::string& out, const VerifiedResult& r, bool with_plan_prefix) {
    out += "- [";
    out += category_label(r.category);
    out += "] ";
    out += r.text;
    if (with_plan_prefix) {
        out += " (plan v" + std::to_string(r.plan_version) + ", step " +
               std::to_string(r.source_step) + ")";
    } else {
        out += " (step " + std::to_string(r.source_step) + ", plan v" +
               std::to_string(r.plan_version) + (r.rescued ? ", rescued)" : ")");
    }
    out += '\n';
}

} // namespace

std::string render_live_state(const ProblemState& s, AgentRole role) {
    std::string out;
    out.reserve(4096);
    out += kLiveStateBanner;
    out += "\n\n## Problem\n";
    out += "id: " + s.problem_id + "\n\n";
    out += s.statement;
    if (out.back() != '\n') out += '\n';

    out += "\n## Phase\n";
    out += "phase: ";
    out += phase_label(s.phase);
    out += "\noutcome: ";
    out += outcome_label(s.outcome);
    out += "\nplan version: " + std::to_string(s.plan_version);
    if (s.plan && s.current_step >= 1) {
        out += "\ncurrent step: " + std::to_string(s.current_step) + " of " +
               std::to_string(s.total_steps());
    } else {
        out += "\ncurrent step: none";
    }
    out += "\nreasoner attempt: " + std::to_string(s.reasoner_attempt_index);
    out += "\npure reasoning mode: ";
    out += s.pure_reasoning_mode ? "on" : "off";
    out += "\nexploration rounds used: " + std::to_string(s.exploration_rounds_used);
    out += '\n';

    out += "\n## Plan\n";
    if (s.plan) {
        out += "version " + std::to_string(s.plan->version) + "\n";
        for (const auto& ps : s.plan->steps) {
            const StepState* st = s.find_step(ps.number);
            out += std::to_string(ps.number) + ". [";
            out += st ? step_status_label(st->status) : "pending";
            out += "] " + ps.goal + "\n";
        }
    } else {
        out += "no plan yet\n";
    }

    out += "\n## Verified Results Ledger\n";
    if (s.verified_results.empty()) {
        out += "none yet\n";
    } else {
        for (const auto& r : s.verified_results) render_entry(out, r, false);
    }
    if (!s.rescued_staging.empty() && role != AgentRole::Verifier) {
        out += "### Rescued pending confirmation\n";
        for (const auto& r : s.rescued_staging) render_entry(out, r, false);
    }

    out += "\n## Confirmed Failures\n";
    if (s.failed_records.empty()) {
        out += "none\n";
    } else {
        for (size_t i = 0; i < s.failed_records.size(); ++i) {
            const FailureRecord& r = s.failed_records[i];
            out += "### Failure " + std::to_string(i + 1) + ": plan v" +
                   std::to_string(r.plan_version_abandoned) + " abandoned\n";
            out += "Reason: " + r.reason_summary + "\n";
            if (!r.plan_summary.empty()) out += "Plan summary: " + r.plan_summary + "\n";
            out += "Forbidden directions:\n";
            for (const auto& f : r.forbidden_directions) out += "- " + f + "\n";
            if (!r.rescued_results.empty()) {
                out += "Rescued from earlier attempts:\n";
                for (const auto& e : r.rescued_results) render_entry(out, e, true);
            }
        }
    }

    if (role != AgentRole::Verifier) {
        out += "\n## Exploration Findings\n";
        if (s.exploration_findings.empty()) {
            out += "none yet\n";
        } else {
            for (size_t i = 0; i < s.exploration_findings.size(); ++i)
                out += "- [round " + std::to_string(i + 1) + "] " + s.exploration_findings[i] + "\n";
        }
    }

    if (role == AgentRole::Meta) {
        out += "\n## Run Counters\n";
        out += "trace-backs: " + std::to_string(s.stats.trace_backs) + "\n";
        out += "re-plans: " + std::to_string(s.stats.replans) + "\n";
        out += "invocations: " + std::to_string(s.stats.invocations.size()) + "\n";
        for (const auto& st : s.steps) {
            if (st.timeout_count > 0)
                out += "step " + std::to_string(st.number) + " timeouts: " +
                       std::to_string(st.timeout_count) + " (consecutive " +
                       std::to_string(st.consecutive_timeouts) + ")\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Creation, persistence, loading.
// ---------------------------------------------------------------------------

ProblemState new_problem_state(const std::string& problem_id, const std::string& statement,
                               const Config& config, const fs::path& scratch_root) {
    if (!valid_problem_id(problem_id)) throw UnsafeIdentifier(problem_id);
    fs::path root = scratch_root / problem_id;
    if (fs::exists(root)) {
        if (fs::exists(root / "state.json"))
            throw WorkspaceCollision(root.string() + " (already holds a run; use resume)");
        if (!fs::is_directory(root) || !fs::is_empty(root))
            throw WorkspaceCollision(root.string());
    }
    WorkspacePaths paths{root};
    fs::create_directories(paths.code_dir());
    fs::create_directories(paths.archive_dir());

    ProblemState s;
    s.problem_id = problem_id;
    s.statement = statement;
    s.config = config;
    s.phase = Phase::Setup;
    s.workspace = root;
    std::string body = statement;
    if (body.empty() || body.back() != '\n') body += '\n';
    fsio::atomic_write(paths.problem_md(), body);
    return s;
}

PersistHooks PersistHooks::real() {
    PersistHooks h;
    h.raw_write = [](const fs::path& p, const std::string& c) {
        std::FILE* f = std::fopen(p.c_str(), "wb");
        if (!f) throw Error("cannot open for write: " + p.string());
        if (!c.empty() && std::fwrite(c.data(), 1, c.size(), f) != c.size()) {
            std::fclose(f);
            throw Error("short write: " + p.string());
        }
        std::fclose(f);
    };
    h.raw_rename = [](const fs::path& from, const fs::path& to) { fs::rename(from, to); };
    h.raw_append = [](const fs::path& p, const std::string& c) { fsio::append(p, c); };
    return h;
}

void persist(ProblemState& state, EventBuffer* events, const PersistHooks& hooks) {
    if (state.workspace.empty()) throw InternalError("persist: state has no workspace");
    WorkspacePaths paths{state.workspace};

    // Events first. state.events_logged records how many lines the log is
    // supposed to hold after this checkpoint; if the mirror write below never
    // lands, resume truncates the log back to the previous count, so the
    // re-run of the interrupted segment cannot duplicate lines.
    if (events) {
        std::string chunk;
        for (const Event& e : events->pending()) chunk += format_event_line(e);
        if (!chunk.empty()) hooks.raw_append(paths.events_log(), chunk);
        state.events_logged += static_cast<long>(events->pending().size());
        events->clear();
    }

    fsio::atomic_write_hooked(paths.state_json(), state_to_json(state), hooks.raw_write,
                              hooks.raw_rename);
    fsio::atomic_write_hooked(paths.canonical(), render_live_state(state, AgentRole::Meta),
                              hooks.raw_write, hooks.raw_rename);

    ojson stats_doc;
    stats_doc["problem_id"] = state.problem_id;
    stats_doc["outcome"] = outcome_label(state.outcome);
    stats_doc["stats"] = json::parse(state_to_json(state))["stats"];
    fsio::atomic_write_hooked(paths.stats_json(), stats_doc.dump(2) + "\n", hooks.raw_write,
                              hooks.raw_rename);
}

LoadResult load_problem_state(const fs::path& workspace_root) {
    WorkspacePaths paths{workspace_root};
    auto mirror = fsio::read_file_retry_once(paths.state_json());
    if (!mirror) throw ResumeImpossible("no state.json in " + workspace_root.string());

    LoadResult result;
    try {
        result.state = state_from_json(*mirror);
    } catch (const Error& e) {
        throw ResumeImpossible(e.what());
    }
    result.state.workspace = workspace_root;

    // The canonical layer is a projection; the mirror wins on any mismatch.
    std::string expected = render_live_state(result.state, AgentRole::Meta);
    auto canonical = fsio::read_file_retry_once(paths.canonical());
    if (!canonical) {
        result.warnings.push_back("canonical PROBLEM_STATE.md missing; regenerated from mirror");
        fsio::atomic_write(paths.canonical(), expected);
    } else if (*canonical != expected) {
        result.warnings.push_back("canonical PROBLEM_STATE.md stale; mirror wins, regenerated");
        fsio::atomic_write(paths.canonical(), expected);
    }

    // Roll the event log back to the last checkpoint: lines past
    // events_logged belong to a segment whose mirror write never landed, and
    // the resumed run will re-emit them.
    if (auto log = fsio::read_file_retry_once(paths.events_log())) {
        long lines = 0;
        size_t keep = 0;
        for (size_t i = 0; i < log->size() && lines < result.state.events_logged; ++i) {
            if ((*log)[i] == '\n') {
                ++lines;
                keep = i + 1;
            }
        }
        if (lines < result.state.events_logged) {
            result.warnings.push_back("events.log shorter than the checkpoint recorded");
        } else if (keep < log->size()) {
            result.warnings.push_back("events.log carried lines past the checkpoint; truncated");
            fsio::atomic_write(paths.events_log(), log->substr(0, keep));
        }
    } else if (result.state.events_logged > 0) {
        result.warnings.push_back("events.log missing despite recorded events");
    }
    return result;
}

// ---------------------------------------------------------------------------
// State transitions.
// ---------------------------------------------------------------------------

void record_accepted_step(ProblemState& state, int step_number,
                          std::vector<VerifiedResult> entries, const TagTally& report_tags) {
    if (state.phase != Phase::StepExecution)
        throw InternalError("record_accepted_step outside step execution");
    if (!state.plan) throw InternalError("record_accepted_step without a plan");
    if (step_number != state.current_step)
        throw InternalError("record_accepted_step: step " + std::to_string(step_number) +
                            " is not the current step " + std::to_string(state.current_step));
    StepState* step = state.find_step(step_number);
    if (!step) throw InternalError("record_accepted_step: unknown step");
    if (step->status != StepStatus::UnderReview && step->status != StepStatus::InChallenge)
        throw InternalError("record_accepted_step: step not under review");

    for (VerifiedResult& e : entries) {
        e.source_step = step_number;
        e.plan_version = state.plan_version;
        e.rescued = false;
        e.code_grounded = e.category == VerifiedCategory::Computation &&
                          (report_tags.verified > 0 ||
                           e.text.find(kTagVerified) != std::string::npos);
        state.verified_results.push_back(std::move(e));
    }
    step->status = StepStatus::Accepted;
    state.stats.tag_tally += report_tags;
    state.stats.step_reports += 1;
    state.last_objections.clear();
    state.pending_guidance.clear();

    if (step_number == state.total_steps()) {
        state.phase = Phase::SolutionGeneration;
    } else {
        state.current_step = step_number + 1;
    }
}

namespace {

/// Move (or copy) a workspace file into an archive directory and record the
/// archived relative path. Idempotent: when a crashed earlier run already
/// moved the file, the existing archived copy is recorded as-is, so a
/// resumed transition produces the same artifact list.
void archive_file(const fs::path& from, const fs::path& dir, const fs::path& workspace,
                  std::vector<std::string>& artifacts, bool copy) {
    fs::path to = dir / from.filename();
    if (!fs::exists(from)) {
        if (!copy && fs::exists(to))
            artifacts.push_back(to.lexically_relative(workspace).generic_string());
        return;
    }
    fs::create_directories(dir);
    if (copy) {
        fs::copy_file(from, to, fs::copy_options::overwrite_existing);
    } else {
        fs::rename(from, to);
    }
    artifacts.push_back(to.lexically_relative(workspace).generic_string());
}

} // namespace

const ArchiveEntry& apply_trace_back(ProblemState& state, int target_step) {
    if (!state.plan) throw InternalError("trace-back without a plan");
    if (target_step < 1 || target_step > state.current_step)
        throw InternalError("trace-back target " + std::to_string(target_step) +
                            " outside 1.." + std::to_string(state.current_step));

    WorkspacePaths paths{state.workspace};
    int ordinal = state.stats.trace_backs + 1;
    char label[32];
    std::snprintf(label, sizeof(label), "traceback-%02d", ordinal);
    fs::path dir = paths.plan_archive_dir(state.plan_version) / label;
    fs::create_directories(dir);

    ArchiveEntry entry;
    entry.plan_version = state.plan_version;
    entry.step_lo = target_step;
    entry.step_hi = state.current_step;
    entry.label = label;
    for (int n = target_step; n <= state.current_step; ++n) {
        archive_file(paths.step_report(n), dir, state.workspace, entry.artifacts, false);
        archive_file(paths.step_debate(n), dir, state.workspace, entry.artifacts, false);
    }

    // Rescue rule: pre-target entries stay; rescued entries stay; grounded
    // Computations stay and get the rescued mark; everything else is staged
    // for the next failure record.
    std::vector<VerifiedResult> kept;
    kept.reserve(state.verified_results.size());
    for (VerifiedResult& r : state.verified_results) {
        if (r.source_step < target_step || r.rescued) {
            kept.push_back(std::move(r));
        } else if (r.category == VerifiedCategory::Computation && r.code_grounded) {
            r.rescued = true;
            kept.push_back(std::move(r));
        } else {
            state.rescued_staging.push_back(std::move(r));
        }
    }
    state.verified_results = std::move(kept);

    for (StepState& st : state.steps) {
        if (st.number < target_step || st.number > state.current_step) continue;
        st.status = StepStatus::Pending;
        st.challenge_rounds = 0;
        st.report_path.clear();
        st.verifier_session.clear();
    }
    if (StepState* target = state.find_step(target_step)) target->trace_back_count += 1;

    state.current_step = target_step;
    state.stats.trace_backs += 1;
    state.reasoner_attempt_index += 1;
    state.last_objections.clear();
    state.pending_guidance.clear();

    state.archives.push_back(std::move(entry));
    return state.archives.back();
}

const FailureRecord& apply_replan(ProblemState& state, const ReplanDecision& decision) {
    if (decision.tag != ReplanTag::ApproveReplan)
        throw InternalError("apply_replan on a non-approval decision");
    if (state.replan_count >= state.config.max_replans)
        throw InternalError("apply_replan beyond max_replans");

    FailureRecord record;
    record.plan_version_abandoned = state.plan_version;
    record.reason_summary = decision.reason_summary;
    record.plan_summary = decision.plan_summary;
    record.forbidden_directions = decision.forbidden_directions;

    auto push_rescued = [&record](VerifiedResult r) {
        r.rescued = true;
        for (const VerifiedResult& existing : record.rescued_results)
            if (existing.text == r.text) return;
        record.rescued_results.push_back(std::move(r));
    };
    for (VerifiedResult& r : state.verified_results) push_rescued(std::move(r));
    for (VerifiedResult& r : state.rescued_staging) push_rescued(std::move(r));
    // Reusable bullets that are themselves category-tagged become entries;
    // untagged text stays in the decision event payload only.
    for (const std::string& bullet : decision.reusable_results) {
        if (bullet.empty() || bullet.front() != '[') continue;
        size_t close = bullet.find(']');
        if (close == std::string::npos || close > 24) continue;
        auto cat = category_from_label(std::string_view(bullet).substr(1, close - 1));
        if (!cat) continue;
        VerifiedResult r;
        r.category = *cat;
        std::string_view rest(bullet);
        rest.remove_prefix(close + 1);
        while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
        r.text = std::string(rest);
        r.source_step = 0;
        r.plan_version = state.plan_version;
        push_rescued(std::move(r));
    }

    WorkspacePaths paths{state.workspace};
    fs::path dir = paths.plan_archive_dir(state.plan_version);
    fs::create_directories(dir);
    ArchiveEntry entry;
    entry.plan_version = state.plan_version;
    entry.label = "";
    archive_file(paths.plan_md(), dir, state.workspace, entry.artifacts, false);
    archive_file(paths.exploration_md(), dir, state.workspace, entry.artifacts, false);
    for (const StepState& st : state.steps) {
        archive_file(paths.step_report(st.number), dir, state.workspace, entry.artifacts, false);
        archive_file(paths.step_debate(st.number), dir, state.workspace, entry.artifacts, false);
    }
    state.archives.push_back(std::move(entry));

    state.failed_records.push_back(std::move(record));
    state.verified_results.clear();
    state.rescued_staging.clear();
    state.steps.clear();
    state.plan.reset();
    state.current_step = 0;
    state.replan_count += 1;
    state.plan_version += 1;
    state.reasoner_attempt_index += 1;
    state.stats.replans += 1;
    state.pure_reasoning_mode = false;
    state.exploration_rounds_used = 0;
    state.plan_attempts_used = 0;
    state.pre_planning_done = false;
    state.planning_hints.clear();
    state.last_plan_error.clear();
    state.last_objections.clear();
    state.pending_guidance.clear();
    state.solution_drafted = false;
    state.last_solution_rejection.clear();
    state.phase = state.config.re_explore_after_replan ? Phase::Exploration : Phase::Planning;
    return state.failed_records.back();
}

void archive_terminal(ProblemState& state) {
    WorkspacePaths paths{state.workspace};
    fs::path dir = paths.plan_archive_dir(state.plan_version);
    fs::create_directories(dir);
    ArchiveEntry entry;
    entry.plan_version = state.plan_version;
    entry.label = "terminal";
    archive_file(paths.plan_md(), dir, state.workspace, entry.artifacts, true);
    archive_file(paths.exploration_md(), dir, state.workspace, entry.artifacts, true);
    archive_file(paths.solution_md(), dir, state.workspace, entry.artifacts, true);
    for (const StepState& st : state.steps) {
        archive_file(paths.step_report(st.number), dir, state.workspace, entry.artifacts, true);
        archive_file(paths.step_debate(st.number), dir, state.workspace, entry.artifacts, true);
    }
    state.archives.push_back(std::move(entry));
}

} // namespace troika
