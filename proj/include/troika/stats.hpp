#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "troika/protocol.hpp"
#include "troika/types.hpp"

namespace troika {

/// One agent dispatch equals one premium request; sub-steps inside a call
/// (tool use, code runs) are deliberately not counted.
struct AgentInvocation {
    AgentRole role = AgentRole::Reasoner;
    Purpose purpose = Purpose::Exploration;
    std::string session;
    SessionMode mode = SessionMode::Fresh;
    double wall_seconds = 0.0;
    bool timed_out = false;
    Phase phase = Phase::Setup;
    int step = 0; ///< 0 when the dispatch is not tied to a plan step.

    bool operator==(const AgentInvocation&) const = default;
};

struct RunStats {
    std::vector<AgentInvocation> invocations;
    int trace_backs = 0;
    int replans = 0;
    bool solved_in_exploration = false;
    double wall_clock_total = 0.0; ///< Seconds.
    TagTally tag_tally;            ///< One contribution per accepted step report.
    int step_reports = 0;          ///< Acceptance events tallied; a step re-accepted
                                   ///< after a trace-back counts again.

    int calls(AgentRole role) const;
    int reasoner_calls() const; ///< Coding and non-coding variants combined.

    bool operator==(const RunStats&) const = default;
};

/// Per-run rollup used by aggregation and by the stats CLI.
struct RunSummary {
    std::string problem_id;
    Outcome outcome = Outcome::InProgress;
    RunStats stats;
    bool flagged = false;        ///< Event log disagreed with the mirror or was corrupt.
    std::string flag_note;

    bool operator==(const RunSummary&) const = default;
};

struct BenchmarkAggregate {
    int n_runs = 0;
    double pct_solved_in_exploration = 0.0;
    double mean_trace_backs = 0.0;
    double mean_replans = 0.0;
    double pct_with_trace_back = 0.0;
    double pct_with_replan = 0.0;
    double mean_wall_minutes = 0.0;
    double median_wall_minutes = 0.0; ///< Lower middle on even counts.
    double max_wall_minutes = 0.0;
    std::string max_wall_problem;
    double mean_calls_reasoner = 0.0;
    double mean_calls_verifier = 0.0;
    double mean_calls_meta = 0.0;
    long step_reports = 0;
    long claims = 0;
    double pct_verified = 0.0;
    double pct_easy_verify = 0.0;
    double pct_hard_verify = 0.0;
    bool zero_claims = true; ///< Explicit n=0 flag instead of NaN percentages.

    bool operator==(const BenchmarkAggregate&) const = default;
};

/// Percentage split of a tag tally; all zeros plus the zero flag when the
/// tally is empty.
struct TagDistribution {
    double pct_verified = 0.0;
    double pct_easy_verify = 0.0;
    double pct_hard_verify = 0.0;
    bool zero_claims = true;

    bool operator==(const TagDistribution&) const = default;
};

TagDistribution tag_distribution(const TagTally& tally);

BenchmarkAggregate aggregate(const std::vector<RunSummary>& runs);

/// Recompute a run's counters from its event log and persisted mirror.
/// Counter disagreement or corrupt log lines set `flagged` with a note.
RunSummary summarize_run(const std::filesystem::path& workspace);

// ---------------------------------------------------------------------------
// Table rendering: tab-separated, one header line, fixed decimal rules per
// table (documented in README). Rows render one benchmark each.
// ---------------------------------------------------------------------------

struct NamedAggregate {
    std::string name;
    BenchmarkAggregate agg;
};

std::string render_process_table(const std::vector<NamedAggregate>& rows);
std::string render_cost_table(const std::vector<NamedAggregate>& rows);
std::string render_tag_table(const std::vector<NamedAggregate>& rows);

// Formatting primitives exposed for tests.
std::string fmt_fixed(double v, int decimals);
/// Process-table percentages: exact zero "0.0", below 1 two decimals, else one.
std::string fmt_pct_process(double v);
/// Tag-table percentages: below 0.1 two decimals, else one.
std::string fmt_pct_tag(double v);

} // namespace troika
