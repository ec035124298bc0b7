#include "troika/protocol.hpp"

#include <algorithm>
#include <cctype>

namespace troika {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    return lines;
}

std::string_view trim_view(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Header = up to 3 leading spaces, `##` or `###`, whitespace, non-empty name.
std::optional<std::string_view> header_name(std::string_view line) {
    size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    size_t hashes = 0;
    while (i + hashes < line.size() && line[i + hashes] == '#') ++hashes;
    if (hashes < 2 || hashes > 3) return std::nullopt;
    i += hashes;
    if (i >= line.size() || (line[i] != ' ' && line[i] != '\t')) return std::nullopt;
    std::string_view name = trim_view(line.substr(i));
    if (name.empty()) return std::nullopt;
    return name;
}

bool is_fence_line(std::string_view line) {
    size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    size_t ticks = 0;
    while (i + ticks < line.size() && line[i + ticks] == '`') ++ticks;
    return ticks >= 3;
}

/// Leading bullet marker: `-`, `*`, `+`, or a UTF-8 bullet dot, followed by
/// whitespace. Returns the content start or npos when not a bullet line.
size_t bullet_content_pos(std::string_view line) {
    size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) return std::string_view::npos;
    size_t marker_len = 0;
    char c = line[i];
    if (c == '-' || c == '*' || c == '+') {
        marker_len = 1;
    } else if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < line.size() &&
               static_cast<unsigned char>(line[i + 1]) == 0x80 &&
               static_cast<unsigned char>(line[i + 2]) == 0xA2) {
        marker_len = 3; // U+2022
    } else {
        return std::string_view::npos;
    }
    size_t after = i + marker_len;
    if (after >= line.size() || (line[after] != ' ' && line[after] != '\t'))
        return std::string_view::npos;
    while (after < line.size() && (line[after] == ' ' || line[after] == '\t')) ++after;
    return after;
}

/// First non-empty body line with edge decoration stripped, normalized.
std::string first_token(std::string_view body) {
    for (std::string_view line : split_lines(body)) {
        size_t pos = bullet_content_pos(line);
        std::string_view payload = (pos == std::string_view::npos) ? line : line.substr(pos);
        payload = trim_view(payload);
        while (!payload.empty() && (payload.front() == '*' || payload.front() == '`' ||
                                    payload.front() == '"' || payload.front() == '\''))
            payload.remove_prefix(1);
        while (!payload.empty() && (payload.back() == '*' || payload.back() == '`' ||
                                    payload.back() == '"' || payload.back() == '\''))
            payload.remove_suffix(1);
        payload = trim_view(payload);
        if (!payload.empty()) return normalize_token(payload);
    }
    return {};
}

/// Strict integer: the trimmed text must be all digits once markdown edge
/// decoration and one trailing period are removed.
std::optional<int> parse_strict_int(std::string_view text) {
    std::string_view s = trim_view(text);
    while (!s.empty() && (s.front() == '*' || s.front() == '`')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == '*' || s.back() == '`')) s.remove_suffix(1);
    s = trim_view(s);
    if (!s.empty() && s.back() == '.') s.remove_suffix(1);
    s = trim_view(s);
    if (s.empty() || s.size() > 6) return std::nullopt;
    long value = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        value = value * 10 + (c - '0');
    }
    return static_cast<int>(value);
}

/// First non-empty line of a section body parsed as a strict integer.
std::optional<int> strict_int_from_body(std::string_view body) {
    for (std::string_view line : split_lines(body)) {
        if (trim_view(line).empty()) continue;
        return parse_strict_int(line);
    }
    return std::nullopt;
}

const Section* find_section(const std::vector<Section>& sections, std::string_view name,
                            std::vector<std::string>* warnings) {
    const Section* found = nullptr;
    for (const Section& s : sections) {
        if (s.name != name) continue;
        if (!found) {
            found = &s;
        } else if (warnings) {
            warnings->push_back("duplicate section " + std::string(name) + " at line " +
                                std::to_string(s.line) + " ignored (first wins)");
        }
    }
    return found;
}

std::string section_text(const std::vector<Section>& sections, std::string_view name,
                         std::vector<std::string>* warnings) {
    const Section* s = find_section(sections, name, warnings);
    return s ? std::string(trim_view(s->body)) : std::string();
}

/// TRACE_BACK token with optional inline target: TRACE_BACK, TRACE_BACK_TO,
/// TRACE_BACK_4, TRACE_BACK_TO_4. Returns false when the token is something
/// else entirely; `inline_target` is set only when digits were present.
bool match_trace_back(const std::string& token, std::optional<int>& inline_target) {
    static constexpr std::string_view kBase = "TRACE_BACK";
    if (token.compare(0, kBase.size(), kBase) != 0) return false;
    std::string_view rest = std::string_view(token).substr(kBase.size());
    if (rest.rfind("_TO", 0) == 0) rest.remove_prefix(3);
    if (rest.empty()) return true;
    if (rest.front() != '_') return false;
    rest.remove_prefix(1);
    if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c));
        }))
        return false;
    if (rest.size() > 6) return false;
    int v = 0;
    for (char c : rest) v = v * 10 + (c - '0');
    inline_target = v;
    return true;
}

/// Resolve a trace-back target from an inline token suffix or the
/// TRACE_BACK_TO section, range-checked against the current step.
std::variant<int, Escalation> resolve_target(const std::vector<Section>& sections,
                                             std::optional<int> inline_target, int current_step,
                                             std::vector<std::string>* warnings) {
    std::optional<int> target = inline_target;
    if (!target) {
        const Section* s = find_section(sections, "TRACE_BACK_TO", warnings);
        if (!s)
            return Escalation{Escalation::Reason::MissingTraceBackTarget,
                              "TRACE_BACK without TRACE_BACK_TO"};
        target = strict_int_from_body(s->body);
        if (!target)
            return Escalation{Escalation::Reason::MissingTraceBackTarget,
                              "TRACE_BACK_TO body is not a single integer"};
    }
    if (*target < 1 || *target > current_step)
        return Escalation{Escalation::Reason::TargetOutOfRange,
                          "target " + std::to_string(*target) + " outside 1.." +
                              std::to_string(current_step)};
    return *target;
}

long count_occurrences(std::string_view line, std::string_view needle) {
    long n = 0;
    size_t pos = 0;
    while ((pos = line.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

/// Feed every line outside fenced code blocks to `fn`.
template <typename Fn>
void for_unfenced_lines(std::string_view document, Fn&& fn) {
    bool in_fence = false;
    for (std::string_view line : split_lines(document)) {
        if (is_fence_line(line)) {
            in_fence = !in_fence;
            continue;
        }
        if (!in_fence) fn(line);
    }
}

} // namespace

std::string normalize_token(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            out.push_back(static_cast<char>(std::toupper(u)));
        } else if (c == ' ' || c == '-' || c == '_' || c == '\t') {
            if (!out.empty() && out.back() != '_') out.push_back('_');
        }
        // Everything else (punctuation, control bytes) is dropped.
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::vector<Section> split_sections(std::string_view document) {
    std::vector<Section> sections;
    Section* current = nullptr;
    int line_no = 0;
    for (std::string_view line : split_lines(document)) {
        ++line_no;
        if (auto name = header_name(line)) {
            sections.push_back(Section{normalize_token(*name), {}, line_no});
            current = &sections.back();
        } else if (current) {
            current->body.append(line);
            current->body.push_back('\n');
        }
    }
    return sections;
}

const char* category_label(VerifiedCategory c) {
    switch (c) {
    case VerifiedCategory::Lemma: return "Lemma";
    case VerifiedCategory::Conjecture: return "Conjecture";
    case VerifiedCategory::Computation: return "Computation";
    case VerifiedCategory::Definition: return "Definition";
    case VerifiedCategory::Answer: return "Answer";
    }
    return "Lemma";
}

std::optional<VerifiedCategory> category_from_label(std::string_view label) {
    std::string t = normalize_token(label);
    if (t == "LEMMA") return VerifiedCategory::Lemma;
    if (t == "CONJECTURE") return VerifiedCategory::Conjecture;
    if (t == "COMPUTATION") return VerifiedCategory::Computation;
    if (t == "DEFINITION") return VerifiedCategory::Definition;
    if (t == "ANSWER") return VerifiedCategory::Answer;
    return std::nullopt;
}

TagTally& TagTally::operator+=(const TagTally& o) {
    verified += o.verified;
    easy_verify += o.easy_verify;
    hard_verify += o.hard_verify;
    return *this;
}

std::vector<std::string> parse_bullets(std::string_view body) {
    std::vector<std::string> bullets;
    bool open = false;
    for (std::string_view line : split_lines(body)) {
        if (trim_view(line).empty()) {
            open = false;
            continue;
        }
        if (header_name(line)) {
            open = false;
            continue;
        }
        size_t pos = bullet_content_pos(line);
        if (pos != std::string_view::npos) {
            bullets.emplace_back(trim_view(line.substr(pos)));
            open = true;
        } else if (open && !bullets.empty()) {
            bullets.back().push_back(' ');
            bullets.back().append(trim_view(line));
        }
    }
    return bullets;
}

std::vector<VerifiedResult> extract_verified_results(std::string_view document,
                                                     std::vector<std::string>* warnings) {
    std::vector<VerifiedResult> results;
    std::vector<Section> sections = split_sections(document);
    const Section* sec = find_section(sections, "VERIFIED_RESULTS", warnings);
    if (!sec) return results;

    bool open = false;
    for (std::string_view line : split_lines(sec->body)) {
        std::string_view t = trim_view(line);
        if (t.empty()) {
            open = false;
            continue;
        }
        size_t pos = bullet_content_pos(line);
        std::string_view payload = (pos == std::string_view::npos) ? t : trim_view(line.substr(pos));
        bool starts_entry = false;
        if (!payload.empty() && payload.front() == '[') {
            size_t close = payload.find(']');
            if (close != std::string_view::npos && close <= 24) {
                if (auto cat = category_from_label(payload.substr(1, close - 1))) {
                    VerifiedResult r;
                    r.category = *cat;
                    r.text = std::string(trim_view(payload.substr(close + 1)));
                    results.push_back(std::move(r));
                    open = true;
                    starts_entry = true;
                }
            }
        }
        if (starts_entry) continue;
        if (pos != std::string_view::npos) {
            // A bullet without a category tag is not a ledger entry.
            if (warnings) warnings->push_back("untagged ledger bullet dropped: " +
                                              std::string(payload.substr(0, 60)));
            open = false;
        } else if (open && !results.empty()) {
            results.back().text.push_back(' ');
            results.back().text.append(t);
        }
    }
    return results;
}

TagTally extract_tags(std::string_view document) {
    TagTally tally;
    for_unfenced_lines(document, [&](std::string_view line) {
        tally.verified += count_occurrences(line, kTagVerified);
        tally.easy_verify += count_occurrences(line, kTagEasyVerify);
        tally.hard_verify += count_occurrences(line, kTagHardVerify);
    });
    return tally;
}

bool detect_plan_blocked(std::string_view document) {
    bool found = false;
    for_unfenced_lines(document, [&](std::string_view line) {
        if (!found && line.find(kTagPlanBlocked) != std::string_view::npos) found = true;
    });
    return found;
}

VerdictResult parse_verdict(std::string_view document, int current_step,
                            std::vector<std::string>* warnings) {
    std::vector<Section> sections = split_sections(document);
    const Section* verdict_sec = find_section(sections, "VERDICT", warnings);
    if (!verdict_sec)
        return Escalation{Escalation::Reason::MissingSection, "no VERDICT section"};

    std::string token = first_token(verdict_sec->body);
    if (token.empty())
        return Escalation{Escalation::Reason::BadToken, "empty VERDICT section"};

    if (token == "ACCEPT") {
        Verdict v;
        v.tag = VerdictTag::Accept;
        v.ledger_entries = extract_verified_results(document, warnings);
        return v;
    }
    if (token == "CHALLENGE") {
        Verdict v;
        v.tag = VerdictTag::Challenge;
        v.objections = std::string(document);
        return v;
    }
    if (token == "PROPOSE_REPLAN") {
        Verdict v;
        v.tag = VerdictTag::ProposeReplan;
        v.objections = std::string(document);
        return v;
    }
    std::optional<int> inline_target;
    if (match_trace_back(token, inline_target)) {
        auto resolved = resolve_target(sections, inline_target, current_step, warnings);
        if (std::holds_alternative<Escalation>(resolved)) return std::get<Escalation>(resolved);
        Verdict v;
        v.tag = VerdictTag::TraceBack;
        v.trace_back_target = std::get<int>(resolved);
        return v;
    }
    return Escalation{Escalation::Reason::BadToken, "unrecognized verdict token: " + token};
}

ReplanResult parse_replan_decision(std::string_view document, int current_step,
                                   std::vector<std::string>* warnings) {
    std::vector<Section> sections = split_sections(document);
    const Section* decision_sec = find_section(sections, "REPLAN_DECISION", warnings);
    if (!decision_sec)
        return Escalation{Escalation::Reason::MissingSection, "no REPLAN_DECISION section"};

    std::string token = first_token(decision_sec->body);
    if (token.empty())
        return Escalation{Escalation::Reason::BadToken, "empty REPLAN_DECISION section"};

    ReplanDecision d;
    d.reason_summary = section_text(sections, "REASON_SUMMARY", warnings);
    d.reusable_results = parse_bullets(section_text(sections, "REUSABLE_RESULTS", warnings));

    if (token == "CONTINUE") {
        d.tag = ReplanTag::Continue;
        return d;
    }
    if (token == "ABORT") {
        d.tag = ReplanTag::Abort;
        return d;
    }
    std::optional<int> inline_target;
    if (match_trace_back(token, inline_target)) {
        auto resolved = resolve_target(sections, inline_target, current_step, warnings);
        if (std::holds_alternative<Escalation>(resolved)) return std::get<Escalation>(resolved);
        d.tag = ReplanTag::TraceBack;
        d.trace_back_target = std::get<int>(resolved);
        return d;
    }
    if (token == "APPROVE_REPLAN") {
        d.tag = ReplanTag::ApproveReplan;
        d.plan_summary = section_text(sections, "PLAN_SUMMARY", warnings);
        d.forbidden_directions =
            parse_bullets(section_text(sections, "FORBIDDEN_DIRECTIONS", warnings));
        if (d.reason_summary.empty())
            return Escalation{Escalation::Reason::EmptyField,
                              "APPROVE_REPLAN without REASON_SUMMARY"};
        if (d.plan_summary.empty())
            return Escalation{Escalation::Reason::EmptyField, "APPROVE_REPLAN without PLAN_SUMMARY"};
        size_t n = d.forbidden_directions.size();
        if (n < 1 || n > 10)
            return Escalation{Escalation::Reason::BadForbiddenDirections,
                              "FORBIDDEN_DIRECTIONS must carry 1..10 bullets, got " +
                                  std::to_string(n)};
        if (warnings && (n < 3 || n > 6))
            warnings->push_back("forbidden_directions count " + std::to_string(n) +
                                " outside the recommended 3..6");
        return d;
    }
    return Escalation{Escalation::Reason::BadToken, "unrecognized replan token: " + token};
}

InterventionResult parse_meta_intervention(std::string_view document, int current_step,
                                           std::vector<std::string>* warnings) {
    std::vector<Section> sections = split_sections(document);
    const Section* action_sec = find_section(sections, "ACTION_TYPE", warnings);
    if (!action_sec)
        return Escalation{Escalation::Reason::MissingSection, "no ACTION_TYPE section"};

    std::string token = first_token(action_sec->body);
    if (token.empty())
        return Escalation{Escalation::Reason::BadToken, "empty ACTION_TYPE section"};

    MetaIntervention mi;
    if (const Section* pure = find_section(sections, "USE_PURE_REASONING", warnings)) {
        std::string flag = first_token(pure->body);
        if (flag == "YES") {
            mi.use_pure_reasoning = true;
        } else if (flag != "NO" && warnings) {
            warnings->push_back("USE_PURE_REASONING value '" + flag + "' treated as NO");
        }
    }
    mi.guidance = section_text(sections, "GUIDANCE", warnings);
    if (mi.guidance.empty()) mi.guidance = section_text(sections, "STRATEGIC_GUIDANCE", warnings);
    mi.extracted_partials = section_text(sections, "EXTRACTED_PARTIALS", warnings);
    if (mi.extracted_partials.empty())
        mi.extracted_partials = section_text(sections, "PARTIAL_RESULTS", warnings);

    if (token == "RETRY_STEP") {
        mi.action = MetaAction::RetryStep;
        return mi;
    }
    if (token == "PROPOSE_REPLAN") {
        mi.action = MetaAction::ProposeReplan;
        return mi;
    }
    if (token == "ABORT") {
        mi.action = MetaAction::Abort;
        return mi;
    }
    std::optional<int> inline_target;
    if (match_trace_back(token, inline_target)) {
        auto resolved = resolve_target(sections, inline_target, current_step, warnings);
        if (std::holds_alternative<Escalation>(resolved)) return std::get<Escalation>(resolved);
        mi.action = MetaAction::TraceBack;
        mi.trace_back_target = std::get<int>(resolved);
        return mi;
    }
    return Escalation{Escalation::Reason::BadToken, "unrecognized action token: " + token};
}

ExplorationReport parse_exploration(std::string_view document) {
    ExplorationReport report;
    std::vector<Section> sections = split_sections(document);
    if (const Section* sec = find_section(sections, "ASSESSMENT", nullptr)) {
        std::string token = first_token(sec->body);
        if (token == "SOLVED") report.outcome = ExplorationOutcome::Solved;
        else if (token == "PARTIALLY_SOLVED") report.outcome = ExplorationOutcome::PartiallySolved;
        else if (token == "NEED_PLAN") report.outcome = ExplorationOutcome::NeedPlan;
        else report.outcome = ExplorationOutcome::Unknown;
    }
    if (const Section* sec = find_section(sections, "FINDINGS", nullptr)) {
        report.findings_digest = std::string(trim_view(sec->body));
    }
    if (report.findings_digest.empty())
        report.findings_digest = std::string(trim_view(document));
    return report;
}

ExplorationReviewDecision parse_exploration_review(std::string_view document) {
    std::vector<Section> sections = split_sections(document);
    if (const Section* sec = find_section(sections, "EXPLORATION_DECISION", nullptr)) {
        std::string token = first_token(sec->body);
        if (token == "CONTINUE_EXPLORATION" || token == "ANOTHER_ROUND")
            return ExplorationReviewDecision::AnotherRound;
    }
    return ExplorationReviewDecision::ProceedToPlanning;
}

SolutionReviewDecision parse_solution_review(std::string_view document,
                                             std::vector<std::string>* warnings) {
    std::vector<Section> sections = split_sections(document);
    if (const Section* sec = find_section(sections, "SOLUTION_REVIEW", warnings)) {
        std::string token = first_token(sec->body);
        if (token == "REJECT") return SolutionReviewDecision::Reject;
        if (token != "ACCEPT" && warnings)
            warnings->push_back("SOLUTION_REVIEW value '" + token + "' treated as ACCEPT");
    } else if (warnings) {
        warnings->push_back("no SOLUTION_REVIEW section; review treated as ACCEPT");
    }
    return SolutionReviewDecision::Accept;
}

PlanResult parse_plan(std::string_view document, int max_steps) {
    std::vector<Section> sections = split_sections(document);
    const Section* region = find_section(sections, "PLAN", nullptr);
    if (!region) region = find_section(sections, "STEPS", nullptr);
    std::string_view text = region ? std::string_view(region->body) : document;

    ParsedPlan plan;
    bool open = false;
    bool in_fence = false;
    for (std::string_view line : split_lines(text)) {
        if (is_fence_line(line)) {
            in_fence = !in_fence;
            open = false;
            continue;
        }
        if (in_fence) continue;
        if (header_name(line)) {
            open = false;
            continue;
        }
        std::string_view t = line;
        size_t indent = 0;
        while (indent < t.size() && (t[indent] == ' ' || t[indent] == '\t')) ++indent;
        std::string_view rest = t.substr(indent);

        // Optional "Step " prefix before the number.
        std::string_view after_word = rest;
        if (after_word.size() > 5) {
            std::string head(after_word.substr(0, 4));
            std::transform(head.begin(), head.end(), head.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (head == "step" && (after_word[4] == ' ' || after_word[4] == '\t'))
                after_word = trim_view(after_word.substr(5));
        }
        size_t d = 0;
        while (d < after_word.size() && std::isdigit(static_cast<unsigned char>(after_word[d])))
            ++d;
        bool is_step_line = false;
        if (d >= 1 && d <= 3 && d < after_word.size()) {
            char sep = after_word[d];
            if ((sep == '.' || sep == ')' || sep == ':') && d + 1 < after_word.size()) {
                std::string_view goal = trim_view(after_word.substr(d + 1));
                if (!goal.empty()) {
                    int number = 0;
                    for (size_t k = 0; k < d; ++k) number = number * 10 + (after_word[k] - '0');
                    plan.steps.push_back(PlanStep{number, std::string(goal)});
                    open = true;
                    is_step_line = true;
                }
            }
        }
        if (is_step_line) continue;
        if (trim_view(line).empty()) {
            open = false;
        } else if (open && indent > 0 && !plan.steps.empty()) {
            plan.steps.back().goal.push_back(' ');
            plan.steps.back().goal.append(trim_view(line));
        } else {
            open = false;
        }
    }

    if (plan.steps.empty())
        return PlanStructuralError{PlanStructuralError::Kind::Empty, "no numbered steps found"};
    if (static_cast<int>(plan.steps.size()) > max_steps)
        return PlanStructuralError{PlanStructuralError::Kind::TooManySteps,
                                   std::to_string(plan.steps.size()) + " steps exceed the cap of " +
                                       std::to_string(max_steps)};
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        for (size_t j = i + 1; j < plan.steps.size(); ++j) {
            if (plan.steps[i].number == plan.steps[j].number)
                return PlanStructuralError{PlanStructuralError::Kind::Duplicate,
                                           "step number " + std::to_string(plan.steps[i].number) +
                                               " appears twice"};
        }
    }
    for (size_t i = 0; i < plan.steps.size(); ++i) {
        if (plan.steps[i].number != static_cast<int>(i) + 1)
            return PlanStructuralError{PlanStructuralError::Kind::NonContiguous,
                                       "expected step " + std::to_string(i + 1) + ", found " +
                                           std::to_string(plan.steps[i].number)};
    }
    return plan;
}

} // namespace troika
