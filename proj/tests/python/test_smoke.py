"""Smoke tests for the compiled troika extension.

Run them against the CMake-built module::

    PYTHONPATH=build/python python -m pytest tests/python
"""

import json
import pathlib

import pytest

import troika

ROOT = pathlib.Path(__file__).resolve().parents[2]


def test_default_config_round_trips():
    cfg = json.loads(troika.default_config())
    assert cfg["budgets"]["reasoner"] == 1800
    assert cfg["budgets"]["verifier"] == 1200
    assert cfg["max_challenge_rounds"] == 5
    assert cfg["max_replans"] == 3
    assert troika.validate_config(troika.default_config()) == troika.default_config()


def test_validate_config_rejects_unknown_keys():
    with pytest.raises(RuntimeError, match="config error"):
        troika.validate_config(json.dumps({"no_such_knob": 1}))


def test_extract_tags_ignores_fenced_code():
    text = (
        "- [verified] The base case holds.\n"
        "- [easy-verify] Direct expansion.\n"
        "```\n"
        "print('[verified] not a claim')\n"
        "```\n"
    )
    assert troika.extract_tags(text) == {
        "verified": 1,
        "easy_verify": 1,
        "hard_verify": 0,
    }


def test_parse_verdict_trace_back():
    doc = "## VERDICT\nTRACE_BACK\n\n## TRACE_BACK_TO\n2\n"
    parsed = troika.parse_verdict(doc, current_step=4)
    assert parsed["kind"] == "trace_back"
    assert parsed["target"] == 2


def test_parse_verdict_escalates_garbage():
    parsed = troika.parse_verdict("no recognizable sections here", current_step=1)
    assert parsed["kind"] == "escalation"
    assert parsed["detail"]


def test_detect_plan_blocked():
    assert troika.detect_plan_blocked("[plan-blocked] Step 5 cannot be reached.")
    assert not troika.detect_plan_blocked("```\n[plan-blocked] quoted\n```\n")


def test_scripted_run_and_summarize(tmp_path):
    script = ROOT / "fixtures" / "scripts" / "quickwin.json"
    result = troika.run(
        problem_id="warmup-sum",
        statement="Determine the sum of the first 2026 positive odd integers.",
        scratch_root=str(tmp_path),
        backend_spec=f"scripted:{script}",
    )
    assert result["outcome"] == "solved"
    assert result["trace_backs"] == 0
    assert result["replans"] == 0
    assert result["dispatches"] == 2

    summary = troika.summarize(result["workspace"])
    assert summary["problem_id"] == "warmup-sum"
    assert summary["outcome"] == "solved"
    assert summary["solved_in_exploration"] is True
    assert summary["flagged"] is False
    assert summary["dispatches"] == 2


def test_stochastic_run(tmp_path):
    profile = ROOT / "fixtures" / "profiles" / "easy.json"
    result = troika.run(
        problem_id="py-smoke",
        statement="Sum the telescoping series.",
        scratch_root=str(tmp_path),
        backend_spec=f"stochastic:{profile}",
    )
    assert result["outcome"] in {"solved", "aborted"}
    assert result["dispatches"] >= 1
    summary = troika.summarize(result["workspace"])
    assert summary["flagged"] is False
