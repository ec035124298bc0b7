#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

namespace troika {

/// Per-role dispatch budgets, in seconds.
struct Budgets {
    double reasoner = 1800.0;
    double verifier = 1200.0;
    double meta = 600.0;
    double code_exec = 600.0;

    bool operator==(const Budgets&) const = default;
};

/// Run configuration. Defaults are the production values; every field can be
/// overridden from a JSON config file and mirrored CLI flags.
struct Config {
    Budgets budgets;

    int max_challenge_rounds = 5;
    int max_replans = 3;
    int max_exploration_rounds = 2;
    int max_solution_retries = 2;
    /// Review rounds without an accept before the stalemate replan trigger.
    /// Kept equal to max_challenge_rounds by default; the effective cycle
    /// bound is the smaller of the two.
    int stalemate_round_budget = 5;
    std::array<int, 2> recommended_steps{6, 10};
    int max_total_steps = 20;

    bool re_explore_after_replan = true;
    bool meta_whole_solution_review = false;
    bool pre_planning_analysis = true;

    /// Seconds between the stop signal and forced termination of a
    /// timed-out agent process.
    double timeout_grace_seconds = 5.0;
    /// Consecutive timeouts on one step that trigger the chronic-timeout
    /// replan route.
    int chronic_timeout_threshold = 3;

    bool simulated_clock = false;

    /// Safety valve for simulations: abort after this many dispatches.
    /// 0 disables the cap (production default).
    int max_dispatches = 0;

    /// Optional overrides for the bundled instruction templates and the
    /// skill registry directory.
    std::optional<std::string> prompts_dir;
    std::optional<std::string> skills_dir;

    bool operator==(const Config&) const = default;

    /// Effective bound on Verifier review rounds within one step cycle.
    int challenge_round_bound() const;

    std::string to_json() const;
    static Config from_json(const std::string& text);
    static Config from_file(const std::filesystem::path& path);
};

} // namespace troika
