#include <random>
#include <sstream>

#include "troika/agents.hpp"
#include "troika/protocol.hpp"

namespace troika {

namespace {

/// Draws are hand-rolled over mt19937_64 (whose sequence the standard pins
/// down) instead of std distributions (whose mapping it does not), so a seed
/// produces the same trajectory on every platform and libstdc++ version.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double unit() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }
    bool chance(double p) { return p > 0.0 && unit() < p; }
    int uniform(int lo, int hi) { // inclusive; modulo bias is irrelevant here
        return lo + static_cast<int>(eng_() % static_cast<uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 eng_;
};

class StochasticBackend final : public Backend {
public:
    explicit StochasticBackend(BehaviorProfile profile) : profile_(profile), rng_(profile.seed) {}

    AgentResponse dispatch(const AgentRequest& request) override;
    const char* kind() const override { return "stochastic"; }

    /// The generator cannot replay its draw history (draw counts differ per
    /// dispatch), so resume repositions deterministically off (seed, n)
    /// instead: reproducible, but not equivalent to an uninterrupted run.
    void skip(size_t n) override {
        rng_ = Rng(profile_.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(n + 1)));
        serial_ = static_cast<int>(n);
    }

private:
    std::string exploration();
    std::string exploration_review();
    std::string planning();
    std::string step_report(int step, AgentResponse& out, double budget);
    std::string step_review(int step);
    std::string challenge_review(int step);
    std::string intervention(int step);
    std::string replan_decision();
    std::string solution_review();

    BehaviorProfile profile_;
    Rng rng_;
    int serial_ = 0; ///< Distinguishes generated text across dispatches.
};

std::string StochasticBackend::exploration() {
    std::ostringstream doc;
    doc << "## ASSESSMENT\n";
    if (rng_.chance(profile_.exploration_solved)) {
        doc << "SOLVED\n\n## FINDINGS\n- direct argument #" << serial_
            << " closes the problem\n\n## SOLUTION\nThe immediate approach works end to end; "
               "the final answer follows from the direct computation above.\n";
        return doc.str();
    }
    doc << (rng_.chance(0.25) ? "PARTIALLY_SOLVED" : "NEED_PLAN");
    doc << "\n\n## FINDINGS\n";
    int n = rng_.uniform(1, 3);
    for (int i = 0; i < n; ++i)
        doc << "- observation " << serial_ << "." << i << ": small cases behave regularly\n";
    return doc.str();
}

std::string StochasticBackend::exploration_review() {
    std::ostringstream doc;
    doc << "## EXPLORATION_DECISION\n"
        << (rng_.chance(0.75) ? "PROCEED_TO_PLANNING" : "ANOTHER_ROUND") << "\n";
    return doc.str();
}

std::string StochasticBackend::planning() {
    std::ostringstream doc;
    int n = rng_.uniform(5, 9);
    doc << "## PLAN\n";
    for (int i = 1; i <= n; ++i)
        doc << i << ". Establish intermediate claim " << serial_ << "." << i << "\n";
    return doc.str();
}

std::string StochasticBackend::step_report(int step, AgentResponse& out, double budget) {
    if (rng_.chance(profile_.step_timeout)) {
        out.wall_seconds = budget + 60.0;
        return "partial work on step " + std::to_string(step) + "; ran out of budget mid";
    }
    std::ostringstream doc;
    doc << "## REPORT\nWork for step " << step << " (batch " << serial_ << ").\n";
    int claims = rng_.uniform(2, 8);
    for (int i = 0; i < claims; ++i) {
        int roll = rng_.uniform(0, 9);
        const char* tag = roll < 6   ? "[verified]"
                          : roll < 7 ? "[easy-verify]"
                                     : "[hard-verify]";
        doc << "- claim " << step << "." << i << " checked " << tag << "\n";
    }
    doc << "\nDONE\n";
    return doc.str();
}

std::string StochasticBackend::step_review(int step) {
    if (step > 1 && rng_.chance(profile_.verdict_trace_back)) {
        int target = rng_.uniform(1, step - 1);
        return "## VERDICT\nTRACE_BACK\n\n## TRACE_BACK_TO\n" + std::to_string(target) + "\n";
    }
    if (rng_.chance(profile_.verdict_propose_replan))
        return "## VERDICT\nPROPOSE_REPLAN\n\nThe current plan direction cannot close step " +
               std::to_string(step) + "; the approach needs rethinking.\n";
    if (rng_.chance(profile_.step_challenge))
        return "## VERDICT\nCHALLENGE\n\nThe justification for the key inequality in step " +
               std::to_string(step) + " is incomplete (round " + std::to_string(serial_) + ").\n";
    std::ostringstream doc;
    doc << "## VERDICT\nACCEPT\n\n## VERIFIED_RESULTS\n";
    int n = rng_.uniform(0, 2);
    for (int i = 0; i < n; ++i) {
        const char* cat = rng_.chance(0.5) ? "Lemma" : "Computation";
        doc << "- [" << cat << "] step " << step << " fact " << serial_ << "." << i
            << " holds as stated\n";
    }
    return doc.str();
}

std::string StochasticBackend::challenge_review(int step) {
    if (rng_.chance(profile_.challenge_resolves_per_round)) {
        return "## VERDICT\nACCEPT\n\n## VERIFIED_RESULTS\n- [Lemma] step " +
               std::to_string(step) + " claim survives the challenge\n";
    }
    return "## VERDICT\nCHALLENGE\n\nThe defense did not address the gap (round " +
           std::to_string(serial_) + ").\n";
}

std::string StochasticBackend::intervention(int step) {
    std::ostringstream doc;
    doc << "## ACTION_TYPE\n";
    if (step > 1 && rng_.chance(0.3)) {
        doc << "TRACE_BACK\n\n## TRACE_BACK_TO\n" << rng_.uniform(1, step - 1) << "\n";
    } else {
        doc << "RETRY_STEP\n\n## USE_PURE_REASONING\n" << (rng_.chance(0.4) ? "YES" : "NO")
            << "\n\n## GUIDANCE\nSplit the computation into smaller pieces and verify each "
               "before moving on.\n";
    }
    doc << "\n## EXTRACTED_PARTIALS\n- partial bound from the timed-out attempt " << serial_ << "\n";
    return doc.str();
}

std::string StochasticBackend::replan_decision() {
    int roll = rng_.uniform(0, 9);
    if (roll < 7) {
        std::ostringstream doc;
        doc << "## REPLAN_DECISION\nAPPROVE_REPLAN\n\n## REASON_SUMMARY\nThe current plan "
               "stalled (decision "
            << serial_ << ").\n\n## PLAN_SUMMARY\nSwitch to the alternative decomposition "
               "sketched during exploration.\n\n## FORBIDDEN_DIRECTIONS\n";
        int n = rng_.uniform(3, 5);
        for (int i = 0; i < n; ++i)
            doc << "- Do not retry dead-end direction " << serial_ << "." << i << "\n";
        doc << "\n## REUSABLE_RESULTS\n";
        int m = rng_.uniform(0, 2);
        for (int i = 0; i < m; ++i)
            doc << "- [Lemma] salvaged fact " << serial_ << "." << i << " remains valid\n";
        return doc.str();
    }
    if (roll < 9) return "## REPLAN_DECISION\nCONTINUE\n\n## REASON_SUMMARY\nRecoverable.\n";
    return "## REPLAN_DECISION\nABORT\n\n## REASON_SUMMARY\nNo viable direction remains.\n";
}

std::string StochasticBackend::solution_review() {
    if (rng_.chance(0.8)) return "## VERDICT\nACCEPT\n";
    return "## VERDICT\nCHALLENGE\n\nThe final writeup skips the justification of the key "
           "bound.\n";
}

AgentResponse StochasticBackend::dispatch(const AgentRequest& request) {
    serial_ += 1;
    AgentResponse out;
    out.wall_seconds = rng_.uniform(30, 300);
    if (rng_.chance(profile_.malformed)) {
        out.text = "completely unstructured text " + std::to_string(serial_) + "\nno sections\n";
        return out;
    }
    switch (request.purpose) {
    case Purpose::Exploration:
        out.text = exploration();
        break;
    case Purpose::ExplorationReview:
        out.text = exploration_review();
        break;
    case Purpose::PrePlanning:
        out.text = "## ANALYSIS\nFavor an incremental decomposition; verify numerics early.\n";
        break;
    case Purpose::Planning:
        out.text = planning();
        break;
    case Purpose::StepReport:
        out.text = step_report(request.step, out, request.budget_seconds);
        break;
    case Purpose::StepReview:
        out.text = step_review(request.step);
        break;
    case Purpose::Defense:
        out.text = "## DEFENSE\nThe objection conflates the two cases; they are handled "
                   "separately above.\n";
        break;
    case Purpose::ChallengeReview:
        out.text = challenge_review(request.step);
        break;
    case Purpose::Intervention:
        out.text = intervention(request.step);
        break;
    case Purpose::ReplanDecision:
        out.text = replan_decision();
        break;
    case Purpose::Solution:
        out.text = "## SOLUTION\nAssembled from the accepted step reports; every claim is "
                   "backed by a ledger entry.\n";
        break;
    case Purpose::SolutionReview:
        out.text = solution_review();
        break;
    case Purpose::MetaSolutionReview:
        out.text = "## SOLUTION_REVIEW\n" + std::string(rng_.chance(0.9) ? "ACCEPT" : "REJECT") +
                   "\n";
        break;
    }
    return out;
}

} // namespace

std::unique_ptr<Backend> make_stochastic_backend(const BehaviorProfile& profile) {
    return std::make_unique<StochasticBackend>(profile);
}

} // namespace troika
