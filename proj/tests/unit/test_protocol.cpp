#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "troika/fsio.hpp"
#include "troika/protocol.hpp"

using namespace troika;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path conformance_dir() {
    return fs::path(TROIKA_SOURCE_DIR) / "fixtures" / "conformance";
}

std::string escalation_key(Escalation::Reason r) {
    switch (r) {
    case Escalation::Reason::MissingSection: return "missing_section";
    case Escalation::Reason::BadToken: return "bad_token";
    case Escalation::Reason::MissingTraceBackTarget: return "missing_trace_back_target";
    case Escalation::Reason::TargetOutOfRange: return "target_out_of_range";
    case Escalation::Reason::BadForbiddenDirections: return "bad_forbidden_directions";
    case Escalation::Reason::EmptyField: return "empty_field";
    }
    return "?";
}

std::string plan_error_key(PlanStructuralError::Kind k) {
    switch (k) {
    case PlanStructuralError::Kind::Empty: return "empty";
    case PlanStructuralError::Kind::TooManySteps: return "too_many_steps";
    case PlanStructuralError::Kind::NonContiguous: return "non_contiguous";
    case PlanStructuralError::Kind::Duplicate: return "duplicate";
    }
    return "?";
}

void check_verdict(const std::string& doc, const json& spec, const json& expect) {
    int step = spec.value("current_step", 1);
    VerdictResult result = parse_verdict(doc, step);
    std::string kind = expect.at("kind");
    if (kind == "escalation") {
        REQUIRE(std::holds_alternative<Escalation>(result));
        CHECK(escalation_key(std::get<Escalation>(result).reason) ==
              expect.at("reason").get<std::string>());
        return;
    }
    REQUIRE_MESSAGE(std::holds_alternative<Verdict>(result),
                    std::get<Escalation>(result).detail);
    const Verdict& v = std::get<Verdict>(result);
    if (kind == "accept") {
        CHECK(v.tag == VerdictTag::Accept);
        if (expect.contains("entries")) {
            REQUIRE(v.ledger_entries.size() == expect.at("entries").size());
            for (size_t i = 0; i < v.ledger_entries.size(); ++i) {
                const json& e = expect.at("entries")[i];
                CHECK(category_label(v.ledger_entries[i].category) ==
                      e.at("category").get<std::string>());
                CHECK(v.ledger_entries[i].text == e.at("text").get<std::string>());
            }
        }
    } else if (kind == "challenge") {
        CHECK(v.tag == VerdictTag::Challenge);
        if (expect.contains("objections_contains"))
            CHECK(v.objections.find(expect.at("objections_contains").get<std::string>()) !=
                  std::string::npos);
    } else if (kind == "trace_back") {
        CHECK(v.tag == VerdictTag::TraceBack);
        CHECK(v.trace_back_target == expect.at("target").get<int>());
    } else if (kind == "propose_replan") {
        CHECK(v.tag == VerdictTag::ProposeReplan);
    } else {
        FAIL("unknown verdict kind ", kind);
    }
}

void check_replan(const std::string& doc, const json& spec, const json& expect) {
    int step = spec.value("current_step", 1);
    ReplanResult result = parse_replan_decision(doc, step);
    std::string kind = expect.at("kind");
    if (kind == "escalation") {
        REQUIRE(std::holds_alternative<Escalation>(result));
        CHECK(escalation_key(std::get<Escalation>(result).reason) ==
              expect.at("reason").get<std::string>());
        return;
    }
    REQUIRE_MESSAGE(std::holds_alternative<ReplanDecision>(result),
                    std::get<Escalation>(result).detail);
    const ReplanDecision& d = std::get<ReplanDecision>(result);
    if (kind == "approve") {
        CHECK(d.tag == ReplanTag::ApproveReplan);
        if (expect.contains("forbidden")) {
            REQUIRE(d.forbidden_directions.size() == expect.at("forbidden").size());
            for (size_t i = 0; i < d.forbidden_directions.size(); ++i)
                CHECK(d.forbidden_directions[i] == expect.at("forbidden")[i].get<std::string>());
        }
        if (expect.contains("reusable")) {
            REQUIRE(d.reusable_results.size() == expect.at("reusable").size());
            for (size_t i = 0; i < d.reusable_results.size(); ++i)
                CHECK(d.reusable_results[i] == expect.at("reusable")[i].get<std::string>());
        }
        if (expect.contains("reason_summary_contains"))
            CHECK(d.reason_summary.find(
                      expect.at("reason_summary_contains").get<std::string>()) !=
                  std::string::npos);
        if (expect.contains("plan_summary_contains"))
            CHECK(d.plan_summary.find(expect.at("plan_summary_contains").get<std::string>()) !=
                  std::string::npos);
    } else if (kind == "continue") {
        CHECK(d.tag == ReplanTag::Continue);
    } else if (kind == "trace_back") {
        CHECK(d.tag == ReplanTag::TraceBack);
        CHECK(d.trace_back_target == expect.at("target").get<int>());
    } else if (kind == "abort") {
        CHECK(d.tag == ReplanTag::Abort);
    } else {
        FAIL("unknown replan kind ", kind);
    }
}

void check_intervention(const std::string& doc, const json& spec, const json& expect) {
    int step = spec.value("current_step", 1);
    InterventionResult result = parse_meta_intervention(doc, step);
    if (expect.value("kind", "") == "escalation") {
        REQUIRE(std::holds_alternative<Escalation>(result));
        CHECK(escalation_key(std::get<Escalation>(result).reason) ==
              expect.at("reason").get<std::string>());
        return;
    }
    REQUIRE_MESSAGE(std::holds_alternative<MetaIntervention>(result),
                    std::get<Escalation>(result).detail);
    const MetaIntervention& mi = std::get<MetaIntervention>(result);
    std::map<std::string, MetaAction> actions{
        {"retry_step", MetaAction::RetryStep},
        {"trace_back", MetaAction::TraceBack},
        {"propose_replan", MetaAction::ProposeReplan},
        {"abort", MetaAction::Abort},
    };
    CHECK(mi.action == actions.at(expect.at("action").get<std::string>()));
    CHECK(mi.use_pure_reasoning == expect.value("pure", false));
    if (expect.contains("target")) CHECK(mi.trace_back_target == expect.at("target").get<int>());
    if (expect.contains("guidance_contains"))
        CHECK(mi.guidance.find(expect.at("guidance_contains").get<std::string>()) !=
              std::string::npos);
    if (expect.contains("partials_contains"))
        CHECK(mi.extracted_partials.find(expect.at("partials_contains").get<std::string>()) !=
              std::string::npos);
}

void check_plan(const std::string& doc, const json& spec, const json& expect) {
    int max_steps = spec.value("max_steps", 20);
    PlanResult result = parse_plan(doc, max_steps);
    if (expect.at("kind") == "error") {
        REQUIRE(std::holds_alternative<PlanStructuralError>(result));
        CHECK(plan_error_key(std::get<PlanStructuralError>(result).kind) ==
              expect.at("error").get<std::string>());
        return;
    }
    REQUIRE_MESSAGE(std::holds_alternative<ParsedPlan>(result),
                    std::get<PlanStructuralError>(result).detail);
    const ParsedPlan& plan = std::get<ParsedPlan>(result);
    REQUIRE(plan.steps.size() == expect.at("steps").size());
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        CHECK(plan.steps[i].number == static_cast<int>(i) + 1);
        CHECK(plan.steps[i].goal == expect.at("steps")[i].get<std::string>());
    }
}

} // namespace

TEST_CASE("conformance corpus parses to the expected structures") {
    int cases = 0;
    for (const auto& entry : fs::directory_iterator(conformance_dir())) {
        if (entry.path().extension() != ".md") continue;
        fs::path sidecar = entry.path();
        sidecar.replace_extension(".expected.json");
        REQUIRE_MESSAGE(fs::exists(sidecar), "missing sidecar for ", entry.path().filename());

        CAPTURE(entry.path().filename().string());
        std::string doc = fsio::read_file(entry.path());
        json spec = json::parse(fsio::read_file(sidecar));
        const json& expect = spec.at("expect");
        std::string parser = spec.at("parser");
        ++cases;

        if (parser == "verdict") {
            check_verdict(doc, spec, expect);
        } else if (parser == "replan") {
            check_replan(doc, spec, expect);
        } else if (parser == "intervention") {
            check_intervention(doc, spec, expect);
        } else if (parser == "exploration") {
            ExplorationReport rep = parse_exploration(doc);
            std::map<std::string, ExplorationOutcome> outcomes{
                {"solved", ExplorationOutcome::Solved},
                {"partially_solved", ExplorationOutcome::PartiallySolved},
                {"need_plan", ExplorationOutcome::NeedPlan},
                {"unknown", ExplorationOutcome::Unknown},
            };
            CHECK(rep.outcome == outcomes.at(expect.at("outcome").get<std::string>()));
            if (expect.contains("findings_contains"))
                CHECK(rep.findings_digest.find(
                          expect.at("findings_contains").get<std::string>()) !=
                      std::string::npos);
        } else if (parser == "exploration_review") {
            auto decision = parse_exploration_review(doc);
            bool another = expect.at("decision") == "another_round";
            CHECK(decision == (another ? ExplorationReviewDecision::AnotherRound
                                       : ExplorationReviewDecision::ProceedToPlanning));
        } else if (parser == "solution_review") {
            auto decision = parse_solution_review(doc);
            bool accept = expect.at("decision") == "accept";
            CHECK(decision == (accept ? SolutionReviewDecision::Accept
                                      : SolutionReviewDecision::Reject));
        } else if (parser == "plan") {
            check_plan(doc, spec, expect);
        } else if (parser == "tags") {
            TagTally tally = extract_tags(doc);
            CHECK(tally.verified == expect.at("verified").get<long>());
            CHECK(tally.easy_verify == expect.at("easy_verify").get<long>());
            CHECK(tally.hard_verify == expect.at("hard_verify").get<long>());
        } else if (parser == "plan_blocked") {
            CHECK(detect_plan_blocked(doc) == expect.at("blocked").get<bool>());
        } else {
            FAIL("unknown parser tag ", parser);
        }
    }
    // Guards against the corpus silently disappearing from the build tree.
    CHECK(cases >= 40);
}

TEST_CASE("normalize_token canonicalizes separators and case") {
    CHECK(normalize_token("trace back to") == "TRACE_BACK_TO");
    CHECK(normalize_token("  Trace-Back_To ") == "TRACE_BACK_TO");
    CHECK(normalize_token("VERDICT:") == "VERDICT");
    CHECK(normalize_token("__a__b__") == "A_B");
    CHECK(normalize_token("") == "");
}

TEST_CASE("split_sections keeps bodies and line numbers") {
    auto sections = split_sections("preamble\n## ONE\nbody a\n### two\nbody b\n");
    REQUIRE(sections.size() == 2);
    CHECK(sections[0].name == "ONE");
    CHECK(sections[0].body == "body a\n");
    CHECK(sections[0].line == 2);
    CHECK(sections[1].name == "TWO");
    CHECK(sections[1].line == 4);
}

TEST_CASE("headers indented four or more spaces are literal text") {
    auto sections = split_sections("## REAL\n    ## NOT_A_HEADER\nrest\n");
    REQUIRE(sections.size() == 1);
    CHECK(sections[0].body.find("NOT_A_HEADER") != std::string::npos);
}

TEST_CASE("verdict token survives bullet and emphasis decoration") {
    auto r = parse_verdict("## VERDICT\n- **ACCEPT**\n", 2);
    REQUIRE(std::holds_alternative<Verdict>(r));
    CHECK(std::get<Verdict>(r).tag == VerdictTag::Accept);
}

TEST_CASE("trace-back target accepts a trailing period, rejects wider prose") {
    auto ok = parse_verdict("## VERDICT\nTRACE_BACK\n## TRACE_BACK_TO\n3.\n", 5);
    REQUIRE(std::holds_alternative<Verdict>(ok));
    CHECK(std::get<Verdict>(ok).trace_back_target == 3);

    auto bad = parse_verdict("## VERDICT\nTRACE_BACK\n## TRACE_BACK_TO\nstep three\n", 5);
    REQUIRE(std::holds_alternative<Escalation>(bad));
    CHECK(std::get<Escalation>(bad).reason == Escalation::Reason::MissingTraceBackTarget);
}

TEST_CASE("trace-back target zero and beyond current step are out of range") {
    for (const char* target : {"0", "6"}) {
        auto r = parse_verdict(std::string("## VERDICT\nTRACE_BACK\n## TRACE_BACK_TO\n") +
                                   target + "\n",
                               5);
        CAPTURE(target);
        REQUIRE(std::holds_alternative<Escalation>(r));
        CHECK(std::get<Escalation>(r).reason == Escalation::Reason::TargetOutOfRange);
    }
}

TEST_CASE("duplicate control sections: first wins, warning recorded") {
    std::vector<std::string> warnings;
    auto r = parse_verdict("## VERDICT\nACCEPT\n## VERDICT\nCHALLENGE\n", 2, &warnings);
    REQUIRE(std::holds_alternative<Verdict>(r));
    CHECK(std::get<Verdict>(r).tag == VerdictTag::Accept);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("duplicate") != std::string::npos);
}

TEST_CASE("approve with out-of-band forbidden count escalates") {
    std::string doc = "## REPLAN_DECISION\nAPPROVE_REPLAN\n"
                      "## REASON_SUMMARY\nwhy\n## PLAN_SUMMARY\nhow\n"
                      "## FORBIDDEN_DIRECTIONS\n";
    auto none = parse_replan_decision(doc, 3);
    REQUIRE(std::holds_alternative<Escalation>(none));
    CHECK(std::get<Escalation>(none).reason == Escalation::Reason::BadForbiddenDirections);

    for (int i = 0; i < 11; ++i) doc += "- direction " + std::to_string(i) + "\n";
    auto eleven = parse_replan_decision(doc, 3);
    REQUIRE(std::holds_alternative<Escalation>(eleven));
    CHECK(std::get<Escalation>(eleven).reason == Escalation::Reason::BadForbiddenDirections);
}

TEST_CASE("forbidden-direction count outside 3..6 is a warning, not an error") {
    std::string doc = "## REPLAN_DECISION\nAPPROVE_REPLAN\n"
                      "## REASON_SUMMARY\nwhy\n## PLAN_SUMMARY\nhow\n"
                      "## FORBIDDEN_DIRECTIONS\n- only one\n";
    std::vector<std::string> warnings;
    auto r = parse_replan_decision(doc, 3, &warnings);
    REQUIRE(std::holds_alternative<ReplanDecision>(r));
    CHECK(std::get<ReplanDecision>(r).forbidden_directions.size() == 1);
    CHECK(!warnings.empty());
}

TEST_CASE("extract_verified_results folds continuations and drops untagged bullets") {
    std::vector<std::string> warnings;
    auto entries = extract_verified_results(
        "## VERIFIED_RESULTS\n"
        "- [Lemma] First line\n  continues here.\n"
        "- untagged bullet\n"
        "- [Answer] The value is 7.\n",
        &warnings);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].category == VerifiedCategory::Lemma);
    CHECK(entries[0].text == "First line continues here.");
    CHECK(entries[1].category == VerifiedCategory::Answer);
    CHECK(!warnings.empty());
}

TEST_CASE("tag counting is per occurrence and fence-aware") {
    std::string doc = "a [verified] b [verified]\n"
                      "```\n[verified] [easy-verify] [hard-verify]\n```\n"
                      "[easy-verify]\n"
                      "```python\n[hard-verify]\n```\n"
                      "[hard-verify] tail\n";
    TagTally tally = extract_tags(doc);
    CHECK(tally.verified == 2);
    CHECK(tally.easy_verify == 1);
    CHECK(tally.hard_verify == 1);
}

TEST_CASE("verdict extraction ignores prose outside recognized sections") {
    std::string core = "## VERDICT\nTRACE_BACK\n## TRACE_BACK_TO\n2\n";
    auto base = parse_verdict("intro prose\n" + core + "## NOTES\nfree text\n", 4);
    auto mutated = parse_verdict("ENTIRELY DIFFERENT PREAMBLE [verified]\n" + core +
                                     "## NOTES\nother text TRACE_BACK 9\n",
                                 4);
    REQUIRE(std::holds_alternative<Verdict>(base));
    REQUIRE(std::holds_alternative<Verdict>(mutated));
    CHECK(std::get<Verdict>(base) == std::get<Verdict>(mutated));
}

TEST_CASE("plan accepts N) and N: separators and the Step prefix") {
    auto r = parse_plan("## PLAN\n1) first\n2: second\nStep 3. third\n", 20);
    REQUIRE(std::holds_alternative<ParsedPlan>(r));
    const auto& steps = std::get<ParsedPlan>(r).steps;
    REQUIRE(steps.size() == 3);
    CHECK(steps[0].goal == "first");
    CHECK(steps[1].goal == "second");
    CHECK(steps[2].goal == "third");
}

TEST_CASE("plan duplicate step number reported before contiguity") {
    auto r = parse_plan("## PLAN\n1. a\n1. b\n3. c\n", 20);
    REQUIRE(std::holds_alternative<PlanStructuralError>(r));
    CHECK(std::get<PlanStructuralError>(r).kind == PlanStructuralError::Kind::Duplicate);
}

TEST_CASE("plan over max_steps is too many") {
    std::string doc = "## PLAN\n";
    for (int i = 1; i <= 21; ++i) doc += std::to_string(i) + ". step\n";
    auto r = parse_plan(doc, 20);
    REQUIRE(std::holds_alternative<PlanStructuralError>(r));
    CHECK(std::get<PlanStructuralError>(r).kind == PlanStructuralError::Kind::TooManySteps);
}

TEST_CASE("parsers are total over hostile bytes") {
    std::string hostile;
    for (int i = 0; i < 512; ++i) hostile.push_back(static_cast<char>((i * 37 + 11) % 256));
    CHECK_NOTHROW(parse_verdict(hostile, 3));
    CHECK_NOTHROW(parse_replan_decision(hostile, 3));
    CHECK_NOTHROW(parse_meta_intervention(hostile, 3));
    CHECK_NOTHROW(parse_exploration(hostile));
    CHECK_NOTHROW(parse_plan(hostile, 20));
    CHECK_NOTHROW(extract_tags(hostile));
    CHECK_NOTHROW(detect_plan_blocked(hostile));
    CHECK_NOTHROW(extract_verified_results(hostile));
}
