// Python bindings for the main operations: run/resume a problem against a
// backend, parse protocol documents, tally tags, and summarize workspaces.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "troika/agents.hpp"
#include "troika/config.hpp"
#include "troika/orchestrator.hpp"
#include "troika/protocol.hpp"
#include "troika/state.hpp"
#include "troika/stats.hpp"

namespace py = pybind11;

namespace {

std::unique_ptr<troika::Backend> make_backend(const std::string& spec, bool& force_sim,
                                              std::optional<troika::Config>& script_config) {
    auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("backend spec must be kind:path, got '" + spec + "'");
    std::string kind = spec.substr(0, colon);
    std::filesystem::path path = spec.substr(colon + 1);
    if (kind == "scripted") {
        troika::Script script = troika::Script::from_file(path);
        script_config = script.config;
        force_sim = true;
        return std::make_unique<troika::ScriptedBackend>(std::move(script));
    }
    if (kind == "stochastic") {
        force_sim = true;
        return troika::make_stochastic_backend(troika::BehaviorProfile::from_file(path));
    }
    if (kind == "process")
        return troika::make_process_backend(troika::ProcessBackendConfig::from_file(path));
    throw std::invalid_argument("unknown backend kind '" + kind + "'");
}

py::dict result_dict(const troika::Orchestrator& orch, const troika::RunResult& result) {
    py::dict out;
    out["outcome"] = std::string(troika::outcome_label(result.outcome));
    out["abort_reason"] = result.abort_reason;
    out["workspace"] = result.workspace.string();
    out["summary"] = troika::outcome_summary(orch.state());
    out["plan_version"] = orch.state().plan_version;
    out["trace_backs"] = orch.state().stats.trace_backs;
    out["replans"] = orch.state().stats.replans;
    out["dispatches"] = orch.state().stats.invocations.size();
    return out;
}

py::dict run_problem(const std::string& problem_id, const std::string& statement,
                     const std::string& scratch_root, const std::string& backend_spec,
                     const std::string& config_json) {
    bool force_sim = false;
    std::optional<troika::Config> script_config;
    auto backend = make_backend(backend_spec, force_sim, script_config);
    troika::Config cfg = script_config.value_or(troika::Config{});
    if (!config_json.empty()) cfg = troika::Config::from_json(config_json);
    if (force_sim) cfg.simulated_clock = true;
    troika::Orchestrator orch(*backend, cfg);
    troika::RunResult result = orch.run(problem_id, statement, scratch_root);
    return result_dict(orch, result);
}

py::dict resume_problem(const std::string& workspace, const std::string& backend_spec) {
    bool force_sim = false;
    std::optional<troika::Config> script_config;
    auto backend = make_backend(backend_spec, force_sim, script_config);
    troika::Orchestrator orch(*backend, troika::Config{});
    troika::RunResult result = orch.resume(workspace);
    return result_dict(orch, result);
}

py::dict tags_dict(const troika::TagTally& tally) {
    py::dict out;
    out["verified"] = tally.verified;
    out["easy_verify"] = tally.easy_verify;
    out["hard_verify"] = tally.hard_verify;
    return out;
}

py::dict verdict_dict(const std::string& text, int current_step) {
    troika::VerdictResult parsed = troika::parse_verdict(text, current_step);
    py::dict out;
    if (std::holds_alternative<troika::Escalation>(parsed)) {
        out["kind"] = "escalation";
        out["detail"] = std::get<troika::Escalation>(parsed).detail;
        return out;
    }
    const troika::Verdict& v = std::get<troika::Verdict>(parsed);
    switch (v.tag) {
    case troika::VerdictTag::Accept: out["kind"] = "accept"; break;
    case troika::VerdictTag::Challenge: out["kind"] = "challenge"; break;
    case troika::VerdictTag::TraceBack:
        out["kind"] = "trace_back";
        out["target"] = v.trace_back_target;
        break;
    case troika::VerdictTag::ProposeReplan: out["kind"] = "propose_replan"; break;
    }
    out["objections"] = v.objections;
    py::list entries;
    for (const troika::VerifiedResult& e : v.ledger_entries) {
        py::dict d;
        d["category"] = std::string(troika::category_label(e.category));
        d["text"] = e.text;
        entries.append(d);
    }
    out["ledger_entries"] = entries;
    return out;
}

py::dict summarize_workspace(const std::string& workspace) {
    troika::RunSummary s = troika::summarize_run(workspace);
    py::dict out;
    out["problem_id"] = s.problem_id;
    out["outcome"] = std::string(troika::outcome_label(s.outcome));
    out["trace_backs"] = s.stats.trace_backs;
    out["replans"] = s.stats.replans;
    out["solved_in_exploration"] = s.stats.solved_in_exploration;
    out["wall_clock_total"] = s.stats.wall_clock_total;
    out["dispatches"] = s.stats.invocations.size();
    out["tag_tally"] = tags_dict(s.stats.tag_tally);
    out["flagged"] = s.flagged;
    out["flag_note"] = s.flag_note;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Control plane for long-horizon problem solving: orchestration, "
              "protocol parsing, persistence, and statistics.";

    m.def("default_config", [] { return troika::Config{}.to_json(); },
          "Default configuration as a JSON string.");
    m.def("validate_config",
          [](const std::string& text) { return troika::Config::from_json(text).to_json(); },
          py::arg("config_json"),
          "Parse and validate a config JSON string; returns the normalized form.");

    m.def("run", &run_problem, py::arg("problem_id"), py::arg("statement"),
          py::arg("scratch_root"), py::arg("backend_spec"), py::arg("config_json") = "",
          "Run a problem to a terminal state. Backend spec: scripted:<file> | "
          "stochastic:<file> | process:<file>.");
    m.def("resume", &resume_problem, py::arg("workspace"), py::arg("backend_spec"),
          "Continue an interrupted run from its workspace.");

    m.def("parse_verdict", &verdict_dict, py::arg("text"), py::arg("current_step"),
          "Parse a review reply into its control decision.");
    m.def("extract_tags",
          [](const std::string& text) { return tags_dict(troika::extract_tags(text)); },
          py::arg("text"), "Count [verified]/[easy-verify]/[hard-verify] claim tags.");
    m.def("detect_plan_blocked", &troika::detect_plan_blocked, py::arg("text"),
          "True when a step report declares the plan itself unworkable.");

    m.def("summarize", &summarize_workspace, py::arg("workspace"),
          "Recompute a workspace's run counters, cross-checked against its event log.");
}
