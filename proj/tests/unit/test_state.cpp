#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "troika/errors.hpp"
#include "troika/fsio.hpp"
#include "troika/state.hpp"

using namespace troika;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("troika-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

ProblemState make_planned_state(const fs::path& scratch, int n_steps = 4) {
    Config cfg;
    cfg.simulated_clock = true;
    ProblemState s = new_problem_state("unit-prob", "Find x.", cfg, scratch);
    s.phase = Phase::StepExecution;
    PlanState plan;
    plan.version = s.plan_version;
    for (int i = 1; i <= n_steps; ++i) plan.steps.push_back({i, "step goal " + std::to_string(i)});
    s.plan = plan;
    for (int i = 1; i <= n_steps; ++i) {
        StepState st;
        st.number = i;
        s.steps.push_back(st);
    }
    s.current_step = 1;
    return s;
}

VerifiedResult entry(VerifiedCategory cat, std::string text) {
    VerifiedResult r;
    r.category = cat;
    r.text = std::move(text);
    return r;
}

void accept_current(ProblemState& s, std::vector<VerifiedResult> entries, TagTally tags = {}) {
    StepState* st = s.find_step(s.current_step);
    REQUIRE(st != nullptr);
    st->status = StepStatus::UnderReview;
    record_accepted_step(s, s.current_step, std::move(entries), tags);
}

} // namespace

TEST_CASE("new_problem_state rejects unsafe ids and non-fresh targets") {
    TempDir tmp;
    Config cfg;
    CHECK_THROWS_AS(new_problem_state("../escape", "s", cfg, tmp.path), UnsafeIdentifier);
    CHECK_THROWS_AS(new_problem_state("has space", "s", cfg, tmp.path), UnsafeIdentifier);
    CHECK_THROWS_AS(new_problem_state("", "s", cfg, tmp.path), UnsafeIdentifier);

    ProblemState s = new_problem_state("p1", "statement", cfg, tmp.path);
    persist(s, nullptr);
    CHECK_THROWS_AS(new_problem_state("p1", "statement", cfg, tmp.path), WorkspaceCollision);
}

TEST_CASE("state json round-trips the full structure") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    s.exploration_findings.push_back("finding one");
    s.pending_guidance = "try the dual";
    accept_current(s, {entry(VerifiedCategory::Lemma, "L1")}, TagTally{1, 2, 3});
    s.created_sessions = {"reason-unit-prob-a1", "meta-unit-prob"};
    s.stats.invocations.push_back(AgentInvocation{AgentRole::Meta, Purpose::Intervention,
                                                  "meta-unit-prob", SessionMode::Resume, 12.5,
                                                  true, Phase::StepExecution, 2});

    ProblemState back = state_from_json(state_to_json(s));
    back.workspace = s.workspace; // runtime-only field, not serialized
    CHECK(back == s);
}

TEST_CASE("persist then load reproduces the state and truncates stray event lines") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    WorkspacePaths paths{s.workspace};

    EventBuffer events;
    events.emit("2026-01-01T00:00:00Z", EventKind::PhaseEnter, R"({"phase":"step_execution"})");
    events.emit("2026-01-01T00:00:01Z", EventKind::Dispatch, R"({"step":1})");
    persist(s, &events);
    CHECK(s.events_logged == 2);
    CHECK(events.pending().empty());

    // A crash after an append but before the next checkpoint leaves orphan
    // lines; load must drop them so resume re-emits deterministically.
    fsio::append(paths.events_log(),
                 "2026-01-01T00:00:02Z Dispatch {\"step\":2}\n");
    LoadResult loaded = load_problem_state(s.workspace);
    loaded.state.workspace = s.workspace;
    CHECK(loaded.state == s);
    bool truncated = false;
    for (const std::string& w : loaded.warnings)
        if (w.find("truncated") != std::string::npos) truncated = true;
    CHECK(truncated);
    auto log = read_event_log(paths.events_log());
    CHECK(log.size() == 2);
}

TEST_CASE("load regenerates a deleted canonical document with a warning") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    persist(s, nullptr);
    WorkspacePaths paths{s.workspace};
    fs::remove(paths.canonical());

    LoadResult loaded = load_problem_state(s.workspace);
    CHECK(fs::exists(paths.canonical()));
    CHECK(!loaded.warnings.empty());
    std::string canon = fsio::read_file(paths.canonical());
    CHECK(canon.find("[STAR-PolyaMath live problem state]") != std::string::npos);
}

TEST_CASE("load without a mirror is ResumeImpossible") {
    TempDir tmp;
    fs::create_directories(tmp.path / "empty");
    CHECK_THROWS_AS(load_problem_state(tmp.path / "empty"), ResumeImpossible);
}

TEST_CASE("record_accepted_step fills provenance and advances the cursor") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);

    TagTally tags;
    tags.verified = 1;
    accept_current(s, {entry(VerifiedCategory::Computation, "table checked")}, tags);

    REQUIRE(s.verified_results.size() == 1);
    const VerifiedResult& r = s.verified_results[0];
    CHECK(r.source_step == 1);
    CHECK(r.plan_version == 1);
    CHECK(r.code_grounded); // Computation + a [verified] tag in the report
    CHECK(s.current_step == 2);
    CHECK(s.stats.step_reports == 1);
    CHECK(s.stats.tag_tally.verified == 1);
}

TEST_CASE("record_accepted_step without code evidence leaves computations ungrounded") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    accept_current(s, {entry(VerifiedCategory::Computation, "hand count")}, TagTally{});
    CHECK_FALSE(s.verified_results[0].code_grounded);
}

TEST_CASE("accepting the final step moves to solution generation") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path, 2);
    accept_current(s, {});
    accept_current(s, {});
    CHECK(s.phase == Phase::SolutionGeneration);
    CHECK(s.current_step == 2); // cursor parks on the last step
}

TEST_CASE("record_accepted_step rejects out-of-order and unreviewed steps") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    CHECK_THROWS_AS(record_accepted_step(s, 2, {}, TagTally{}), InternalError);
    CHECK_THROWS_AS(record_accepted_step(s, 1, {}, TagTally{}), InternalError); // still Pending
}

TEST_CASE("trace-back rescue rule: pre-target and grounded entries stay, rest staged") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);

    accept_current(s, {entry(VerifiedCategory::Lemma, "early lemma")});
    TagTally grounded;
    grounded.verified = 1;
    accept_current(s, {entry(VerifiedCategory::Computation, "machine table"),
                       entry(VerifiedCategory::Lemma, "fragile lemma")},
                   grounded);
    accept_current(s, {entry(VerifiedCategory::Conjecture, "hunch")});
    REQUIRE(s.current_step == 4);

    int attempt_before = s.reasoner_attempt_index;
    const ArchiveEntry& archived = apply_trace_back(s, 2);

    CHECK(archived.plan_version == 1);
    CHECK(archived.step_lo == 2);
    CHECK(archived.step_hi == 4);
    CHECK(s.current_step == 2);
    CHECK(s.stats.trace_backs == 1);
    CHECK(s.reasoner_attempt_index == attempt_before + 1);

    REQUIRE(s.verified_results.size() == 2);
    CHECK(s.verified_results[0].text == "early lemma");
    CHECK_FALSE(s.verified_results[0].rescued);
    CHECK(s.verified_results[1].text == "machine table");
    CHECK(s.verified_results[1].rescued); // grounded Computation survives, marked

    REQUIRE(s.rescued_staging.size() == 2);
    CHECK(s.rescued_staging[0].text == "fragile lemma");
    CHECK(s.rescued_staging[1].text == "hunch");

    for (int n = 2; n <= 4; ++n) {
        const StepState* st = s.find_step(n);
        CHECK(st->status == StepStatus::Pending);
        CHECK(st->challenge_rounds == 0);
        CHECK(st->verifier_session.empty());
    }
    CHECK(s.find_step(1)->status == StepStatus::Accepted);
    CHECK(s.find_step(2)->trace_back_count == 1);
}

TEST_CASE("ledger length never decreases across accepted steps") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path, 4);
    size_t prev = 0;
    for (int i = 1; i <= 4; ++i) {
        accept_current(s, {entry(VerifiedCategory::Lemma, "L" + std::to_string(i))});
        CHECK(s.verified_results.size() >= prev);
        prev = s.verified_results.size();
    }
}

TEST_CASE("apply_replan folds ledger, staging and tagged reusable bullets into the record") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    accept_current(s, {entry(VerifiedCategory::Lemma, "kept lemma")});
    accept_current(s, {entry(VerifiedCategory::Lemma, "staged lemma")});
    apply_trace_back(s, 2); // "staged lemma" -> staging

    ReplanDecision d;
    d.tag = ReplanTag::ApproveReplan;
    d.reason_summary = "v1 is structurally dead";
    d.plan_summary = "attack the dual";
    d.forbidden_directions = {"Do not retry the primal bound.",
                              "Do not re-enumerate small cases."};
    d.reusable_results = {"[Computation] small cases table",
                          "[Lemma] kept lemma",   // dedup against the active ledger
                          "untagged remark stays out of the ledger"};

    int version_before = s.plan_version;
    int attempt_before = s.reasoner_attempt_index;
    s.pure_reasoning_mode = true;
    const FailureRecord& rec = apply_replan(s, d);

    CHECK(rec.plan_version_abandoned == version_before);
    CHECK(rec.forbidden_directions.size() == 2);
    // kept lemma (ledger) + staged lemma (staging) + the one new tagged bullet
    REQUIRE(rec.rescued_results.size() == 3);
    CHECK(rec.rescued_results[0].text == "kept lemma");
    CHECK(rec.rescued_results[1].text == "staged lemma");
    CHECK(rec.rescued_results[2].text == "small cases table");
    for (const VerifiedResult& r : rec.rescued_results) CHECK(r.rescued);

    CHECK(s.plan_version == version_before + 1);
    CHECK(s.replan_count == 1);
    CHECK(s.reasoner_attempt_index == attempt_before + 1);
    CHECK_FALSE(s.plan.has_value());
    CHECK(s.steps.empty());
    CHECK(s.verified_results.empty());
    CHECK(s.rescued_staging.empty());
    CHECK_FALSE(s.pure_reasoning_mode);
    CHECK(s.phase == Phase::Exploration);
    CHECK(s.exploration_rounds_used == 0);
}

TEST_CASE("apply_replan respects the re_explore_after_replan switch") {
    TempDir tmp;
    Config cfg;
    cfg.re_explore_after_replan = false;
    ProblemState s = new_problem_state("direct-replan", "x", cfg, tmp.path);
    s.phase = Phase::StepExecution;
    PlanState plan;
    plan.steps.push_back({1, "only step"});
    s.plan = plan;
    s.steps.push_back(StepState{.number = 1});
    s.current_step = 1;

    ReplanDecision d;
    d.tag = ReplanTag::ApproveReplan;
    d.reason_summary = "r";
    d.plan_summary = "p";
    d.forbidden_directions = {"Do not do that again."};
    apply_replan(s, d);
    CHECK(s.phase == Phase::Planning);
}

TEST_CASE("failure records are immutable across later replans") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    ReplanDecision d;
    d.tag = ReplanTag::ApproveReplan;
    d.reason_summary = "first";
    d.plan_summary = "p1";
    d.forbidden_directions = {"Do not A."};
    apply_replan(s, d);
    FailureRecord first = s.failed_records.at(0);

    // Rebuild a minimal plan so the second replan has something to abandon.
    s.phase = Phase::StepExecution;
    PlanState plan;
    plan.version = s.plan_version;
    plan.steps.push_back({1, "g"});
    s.plan = plan;
    s.steps.push_back(StepState{.number = 1});
    s.current_step = 1;

    d.reason_summary = "second";
    d.plan_summary = "p2";
    d.forbidden_directions = {"Do not B."};
    apply_replan(s, d);

    REQUIRE(s.failed_records.size() == 2);
    CHECK(s.failed_records[0] == first);
    CHECK(s.plan_version - 1 == static_cast<int>(s.failed_records.size()));
}

TEST_CASE("apply_replan past the cap is an internal error") {
    TempDir tmp;
    Config cfg;
    cfg.max_replans = 0;
    ProblemState s = new_problem_state("capped", "x", cfg, tmp.path);
    ReplanDecision d;
    d.tag = ReplanTag::ApproveReplan;
    d.reason_summary = "r";
    d.plan_summary = "p";
    d.forbidden_directions = {"Do not."};
    CHECK_THROWS_AS(apply_replan(s, d), InternalError);
}

TEST_CASE("workspace lock is exclusive and released on destruction") {
    TempDir tmp;
    fs::create_directories(tmp.path / "ws");
    {
        WorkspaceLock lock(tmp.path / "ws");
        CHECK_THROWS_AS(WorkspaceLock(tmp.path / "ws"), WorkspaceLocked);
    }
    WorkspaceLock relock(tmp.path / "ws"); // released, so this succeeds
}

TEST_CASE("a stale lock from a dead pid is reclaimed") {
    TempDir tmp;
    fs::create_directories(tmp.path / "ws");
    // An unparseable owner pid is treated as dead and the lock reclaimed.
    fsio::atomic_write(tmp.path / "ws" / ".lock", "not-a-pid\n");
    WorkspaceLock lock(tmp.path / "ws");
}

TEST_CASE("render_live_state is deterministic and role-sliced") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    s.exploration_findings.push_back("exploration saw a pattern");
    accept_current(s, {entry(VerifiedCategory::Lemma, "the key lemma")});
    s.stats.invocations.push_back(AgentInvocation{AgentRole::Reasoner, Purpose::StepReport,
                                                  "reason-unit-prob-a1", SessionMode::Fresh, 10.0,
                                                  false, Phase::StepExecution, 1});

    std::string reasoner = render_live_state(s, AgentRole::Reasoner);
    CHECK(reasoner == render_live_state(s, AgentRole::Reasoner));

    std::string verifier = render_live_state(s, AgentRole::Verifier);
    std::string meta = render_live_state(s, AgentRole::Meta);
    for (const std::string* doc : {&reasoner, &verifier, &meta}) {
        CHECK(doc->find("[STAR-PolyaMath live problem state]") != std::string::npos);
        CHECK(doc->find("the key lemma") != std::string::npos);
    }
    CHECK(reasoner.find("exploration saw a pattern") != std::string::npos);
    CHECK(verifier.find("exploration saw a pattern") == std::string::npos);
    CHECK(meta.find("Run Counters") != std::string::npos);
    CHECK(reasoner.find("Run Counters") == std::string::npos);
}

TEST_CASE("persisted canonical equals the meta render") {
    TempDir tmp;
    ProblemState s = make_planned_state(tmp.path);
    persist(s, nullptr);
    std::string canon = fsio::read_file(WorkspacePaths{s.workspace}.canonical());
    CHECK(canon == render_live_state(s, AgentRole::Meta));
}

TEST_CASE("persist survives a crash at any single write without tearing") {
    TempDir tmp;
    ProblemState good = make_planned_state(tmp.path);
    accept_current(good, {entry(VerifiedCategory::Lemma, "L")});

    // Count the writes a full checkpoint performs, then re-run with a fault
    // injected at each position in turn and prove load() still yields either
    // a complete old state or a complete new one.
    ProblemState probe = state_from_json(state_to_json(good));
    probe.workspace = good.workspace;
    int total_writes = 0;
    PersistHooks counting = PersistHooks::real();
    auto real_write = counting.raw_write;
    counting.raw_write = [&](const fs::path& p, const std::string& c) {
        ++total_writes;
        real_write(p, c);
    };
    persist(probe, nullptr, counting);
    REQUIRE(total_writes >= 2);

    for (int fault_at = 0; fault_at < total_writes; ++fault_at) {
        TempDir scratch;
        ProblemState base = make_planned_state(scratch.path);
        EventBuffer events;
        events.emit("2026-01-01T00:00:00Z", EventKind::PhaseEnter, "{}");
        persist(base, &events);

        ProblemState next = state_from_json(state_to_json(base));
        next.workspace = base.workspace;
        StepState* st = next.find_step(1);
        st->status = StepStatus::UnderReview;
        record_accepted_step(next, 1, {entry(VerifiedCategory::Lemma, "new")}, TagTally{});

        EventBuffer more;
        more.emit("2026-01-01T00:00:01Z", EventKind::VerdictParsed, "{}");
        int seen = 0;
        PersistHooks faulty = PersistHooks::real();
        auto fw = faulty.raw_write;
        faulty.raw_write = [&](const fs::path& p, const std::string& c) {
            if (seen++ == fault_at) throw Error("injected write fault");
            fw(p, c);
        };
        bool crashed = false;
        try {
            persist(next, &more, faulty);
        } catch (const Error&) {
            crashed = true;
        }
        CAPTURE(fault_at);
        LoadResult after = load_problem_state(base.workspace);
        bool is_old = after.state.verified_results.empty();
        bool is_new = after.state.verified_results.size() == 1;
        CHECK((is_old || is_new));
        if (!crashed) CHECK(is_new);
        // Whatever landed, the log agrees with the mirror's event count.
        auto log = read_event_log(WorkspacePaths{base.workspace}.events_log());
        CHECK(static_cast<long>(log.size()) >= after.state.events_logged);
    }
}
