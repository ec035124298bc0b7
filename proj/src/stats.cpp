#include "troika/stats.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "troika/errors.hpp"
#include "troika/events.hpp"
#include "troika/fsio.hpp"
#include "troika/state.hpp"

namespace troika {

using nlohmann::json;

int RunStats::calls(AgentRole role) const {
    int n = 0;
    for (const auto& inv : invocations)
        if (inv.role == role) ++n;
    return n;
}

int RunStats::reasoner_calls() const {
    return calls(AgentRole::Reasoner) + calls(AgentRole::ReasonerNonCoding);
}

TagDistribution tag_distribution(const TagTally& tally) {
    TagDistribution d;
    long total = tally.total();
    if (total == 0) return d;
    d.zero_claims = false;
    d.pct_verified = 100.0 * static_cast<double>(tally.verified) / static_cast<double>(total);
    d.pct_easy_verify = 100.0 * static_cast<double>(tally.easy_verify) / static_cast<double>(total);
    d.pct_hard_verify = 100.0 * static_cast<double>(tally.hard_verify) / static_cast<double>(total);
    return d;
}

BenchmarkAggregate aggregate(const std::vector<RunSummary>& runs) {
    BenchmarkAggregate a;
    a.n_runs = static_cast<int>(runs.size());
    if (runs.empty()) return a;
    const double n = static_cast<double>(runs.size());

    int solved_expl = 0, with_tb = 0, with_rp = 0;
    long tb_sum = 0, rp_sum = 0;
    long calls_reasoner = 0, calls_verifier = 0, calls_meta = 0;
    TagTally tally;
    std::vector<std::pair<double, const RunSummary*>> wall;
    wall.reserve(runs.size());
    for (const RunSummary& r : runs) {
        if (r.stats.solved_in_exploration) ++solved_expl;
        if (r.stats.trace_backs > 0) ++with_tb;
        if (r.stats.replans > 0) ++with_rp;
        tb_sum += r.stats.trace_backs;
        rp_sum += r.stats.replans;
        calls_reasoner += r.stats.reasoner_calls();
        calls_verifier += r.stats.calls(AgentRole::Verifier);
        calls_meta += r.stats.calls(AgentRole::Meta);
        tally += r.stats.tag_tally;
        a.step_reports += r.stats.step_reports;
        wall.emplace_back(r.stats.wall_clock_total / 60.0, &r);
    }
    a.pct_solved_in_exploration = 100.0 * solved_expl / n;
    a.mean_trace_backs = static_cast<double>(tb_sum) / n;
    a.mean_replans = static_cast<double>(rp_sum) / n;
    a.pct_with_trace_back = 100.0 * with_tb / n;
    a.pct_with_replan = 100.0 * with_rp / n;
    a.mean_calls_reasoner = static_cast<double>(calls_reasoner) / n;
    a.mean_calls_verifier = static_cast<double>(calls_verifier) / n;
    a.mean_calls_meta = static_cast<double>(calls_meta) / n;

    std::stable_sort(wall.begin(), wall.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    double wall_sum = 0.0;
    for (const auto& [minutes, _] : wall) wall_sum += minutes;
    a.mean_wall_minutes = wall_sum / n;
    a.median_wall_minutes = wall[(wall.size() - 1) / 2].first;
    a.max_wall_minutes = wall.back().first;
    a.max_wall_problem = wall.back().second->problem_id;

    a.claims = tally.total();
    TagDistribution d = tag_distribution(tally);
    a.zero_claims = d.zero_claims;
    a.pct_verified = d.pct_verified;
    a.pct_easy_verify = d.pct_easy_verify;
    a.pct_hard_verify = d.pct_hard_verify;
    return a;
}

RunSummary summarize_run(const std::filesystem::path& workspace) {
    WorkspacePaths paths{workspace};
    auto mirror = fsio::read_file_retry_once(paths.state_json());
    if (!mirror) throw ResumeImpossible("no state.json in " + workspace.string());
    ProblemState state = state_from_json(*mirror);

    RunSummary summary;
    summary.problem_id = state.problem_id;
    summary.outcome = state.outcome;
    summary.stats = state.stats;

    auto flag = [&summary](const std::string& note) {
        summary.flagged = true;
        if (!summary.flag_note.empty()) summary.flag_note += "; ";
        summary.flag_note += note;
    };

    if (!std::filesystem::exists(paths.events_log())) {
        flag("events.log missing");
        return summary;
    }
    int corrupt = 0;
    std::vector<Event> events = read_event_log(paths.events_log(), &corrupt);
    if (corrupt > 0) flag(std::to_string(corrupt) + " corrupt event line(s)");

    int tb = 0, rp = 0;
    TagTally tally;
    int reports = 0;
    for (const Event& e : events) {
        switch (e.kind) {
        case EventKind::TraceBack:
            ++tb;
            break;
        case EventKind::ReplanDecided: {
            json p = json::parse(e.payload_json, nullptr, false);
            if (!p.is_discarded() && p.value("decision", "") == "APPROVE_REPLAN") ++rp;
            break;
        }
        case EventKind::VerdictParsed: {
            json p = json::parse(e.payload_json, nullptr, false);
            if (p.is_discarded() || p.value("verdict", "") != "ACCEPT") break;
            if (!p.contains("tags")) break; // whole-solution reviews carry no tally
            tally.verified += p["tags"].value("verified", 0L);
            tally.easy_verify += p["tags"].value("easy_verify", 0L);
            tally.hard_verify += p["tags"].value("hard_verify", 0L);
            ++reports;
            break;
        }
        default:
            break;
        }
    }
    if (tb != state.stats.trace_backs)
        flag("trace-back count mismatch (log " + std::to_string(tb) + ", mirror " +
             std::to_string(state.stats.trace_backs) + ")");
    if (rp != state.stats.replans)
        flag("re-plan count mismatch (log " + std::to_string(rp) + ", mirror " +
             std::to_string(state.stats.replans) + ")");
    if (!(tally == state.stats.tag_tally))
        flag("tag tally mismatch between log and mirror");
    if (reports != state.stats.step_reports)
        flag("step report count mismatch (log " + std::to_string(reports) + ", mirror " +
             std::to_string(state.stats.step_reports) + ")");
    return summary;
}

// ---------------------------------------------------------------------------
// Rendering.
// ---------------------------------------------------------------------------

std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string fmt_pct_process(double v) {
    if (v == 0.0) return "0.0";
    return fmt_fixed(v, v < 1.0 ? 2 : 1);
}

std::string fmt_pct_tag(double v) {
    return fmt_fixed(v, v < 0.1 ? 2 : 1);
}

namespace {

std::string join_row(const std::vector<std::string>& cells) {
    std::string row;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) row += '\t';
        row += cells[i];
    }
    row += '\n';
    return row;
}

} // namespace

std::string render_process_table(const std::vector<NamedAggregate>& rows) {
    std::string out = join_row({"benchmark", "n", "solved_in_exploration_pct", "mean_trace_backs",
                                "mean_replans", "runs_with_trace_back_pct", "runs_with_replan_pct"});
    for (const auto& [name, a] : rows) {
        out += join_row({name, std::to_string(a.n_runs), fmt_pct_process(a.pct_solved_in_exploration),
                         fmt_fixed(a.mean_trace_backs, 2), fmt_fixed(a.mean_replans, 2),
                         fmt_pct_process(a.pct_with_trace_back), fmt_pct_process(a.pct_with_replan)});
    }
    return out;
}

std::string render_cost_table(const std::vector<NamedAggregate>& rows) {
    std::string out =
        join_row({"benchmark", "n", "mean_reasoner_calls", "mean_verifier_calls", "mean_meta_calls",
                  "mean_wall_minutes", "median_wall_minutes", "max_wall_minutes", "max_wall_problem"});
    for (const auto& [name, a] : rows) {
        out += join_row({name, std::to_string(a.n_runs), fmt_fixed(a.mean_calls_reasoner, 2),
                         fmt_fixed(a.mean_calls_verifier, 2), fmt_fixed(a.mean_calls_meta, 2),
                         fmt_fixed(a.mean_wall_minutes, 1), fmt_fixed(a.median_wall_minutes, 1),
                         fmt_fixed(a.max_wall_minutes, 1),
                         a.max_wall_problem.empty() ? "-" : a.max_wall_problem});
    }
    return out;
}

std::string render_tag_table(const std::vector<NamedAggregate>& rows) {
    std::string out = join_row(
        {"benchmark", "step_reports", "claims", "verified_pct", "easy_verify_pct", "hard_verify_pct"});
    for (const auto& [name, a] : rows) {
        if (a.zero_claims) {
            out += join_row({name, std::to_string(a.step_reports), "0", "-", "-", "-"});
        } else {
            out += join_row({name, std::to_string(a.step_reports), std::to_string(a.claims),
                             fmt_pct_tag(a.pct_verified), fmt_pct_tag(a.pct_easy_verify),
                             fmt_pct_tag(a.pct_hard_verify)});
        }
    }
    return out;
}

} // namespace troika
