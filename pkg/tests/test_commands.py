import json

import pytest
from click.testing import CliRunner

from app.main import cli
from app.services.llm_service import LlmClient

ON_TOP_QUERY = "Is the pillow located on top of the white couch?"


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def run_json(runner: CliRunner, *args, **kwargs):
    result = runner.invoke(cli, ["--format", "json", *map(str, args)], **kwargs)
    return result, json.loads(result.stdout)


class RecordingBackend:
    name = "recording"
    supports_concurrency = False

    def __init__(self, response: str):
        self.response = response
        self.requests = []

    def complete(self, request) -> str:
        self.requests.append(request)
        return self.response


# ---------- validate ----------

def test_validate_ok(runner, listing1_path):
    result = runner.invoke(cli, ["validate", str(listing1_path)])
    assert result.exit_code == 0
    assert result.stdout.strip() == "2 nodes, 0 issues"


def test_validate_lists_issues(runner, data_dir):
    result, payload = run_json(runner, "validate", data_dir / "duplicate_ids_scene.json")
    assert result.exit_code == 1
    assert payload["valid"] is False
    assert payload["issues"][0]["field"] == "id"
    assert "duplicate id 3" in payload["issues"][0]["message"]


def test_validate_missing_file(runner, tmp_path):
    result, payload = run_json(runner, "validate", tmp_path / "nope.json")
    assert result.exit_code == 2
    assert payload["exit_code"] == 2


# ---------- describe ----------

def test_describe_with_relations(runner, couch_pillow_path):
    result = runner.invoke(cli, ["describe", str(couch_pillow_path), "--relations"])
    assert result.exit_code == 0
    assert result.stdout.startswith("2 nodes")
    assert "Relations:\n  27 Near 28\n  27 OnTopOf 28\n  28 Near 27" in result.stdout


def test_describe_single_node(runner, data_dir):
    result = runner.invoke(cli, ["describe", str(data_dir / "single_node_scene.json"), "--relations"])
    assert result.exit_code == 0
    assert result.stdout.startswith("1 node\n")
    assert "(none)" in result.stdout


def test_describe_json(runner, listing1_path):
    result, payload = run_json(runner, "describe", listing1_path)
    assert result.exit_code == 0
    assert [node["object_tag"] for node in payload["nodes"]] == ["vase", "mirror"]
    assert "edges" not in payload


# ---------- ask ----------

def test_ask_with_oracle(runner, couch_pillow_path):
    result, payload = run_json(runner, "ask", couch_pillow_path, ON_TOP_QUERY, "--backend", "oracle")
    assert result.exit_code == 0
    assert payload["grounded"] is True
    assert payload["answer"]["final_verdict"] is True
    assert payload["answer"]["final_object_id"] == 27
    assert payload["issues"] == []


def test_ask_text_output(runner, couch_pillow_path):
    result = runner.invoke(cli, ["ask", str(couch_pillow_path), ON_TOP_QUERY, "--backend", "oracle"])
    assert result.exit_code == 0
    assert "object: pillow (id: 27)  answer: yes" in result.stdout
    assert result.stdout.rstrip().endswith("grounding: ok")


def test_ask_garbage_answer_is_unparseable(runner, listing1_path, data_dir):
    result, payload = run_json(
        runner, "ask", listing1_path, "Where is the vase?",
        "--backend", "mock", "--mock-script", data_dir / "mock_garbage.json",
    )
    assert result.exit_code == 3
    assert payload["error"] == "UnparseableResponse"


def test_ask_ungrounded_answer(runner, listing1_path, data_dir):
    result = runner.invoke(cli, [
        "ask", str(listing1_path), "Where is the lamp?",
        "--backend", "mock", "--mock-script", str(data_dir / "mock_unknown_object.json"),
    ])
    assert result.exit_code == 1
    assert "STEP2 UnknownId" in result.stdout
    assert "STEP4 UnknownId" in result.stdout


def test_ask_live_without_key(runner, listing1_path):
    result, payload = run_json(runner, "ask", listing1_path, "Where is the vase?")
    assert result.exit_code == 2
    assert payload["error"] == "AuthMissing"
    assert "SCENEGPT_API_KEY" in payload["message"]


def test_ask_bad_scene(runner, data_dir):
    result = runner.invoke(cli, ["ask", str(data_dir / "duplicate_ids_scene.json"), "q", "--backend", "oracle"])
    assert result.exit_code == 1
    assert "duplicate id 3" in result.stderr


# ---------- repl ----------

def test_repl_quits(runner, listing1_path):
    result = runner.invoke(cli, ["repl", str(listing1_path), "--backend", "oracle"], input=":quit\nWhere is the vase?\n")
    assert result.exit_code == 0
    assert result.stdout == ""


def test_repl_sends_each_query_on_its_own(runner, monkeypatch, couch_pillow_path):
    answer = (
        "STEP1 - inferred_query: MARKER-QUERY\nSTEP2 - relevant_objects: [27]\n"
        "STEP3 - reason for relevance: MARKER-REASON\nSTEP4 - Final Answer: MARKER-ANSWER\n"
        '{"object_tag": "pillow", "object_id": 27}\nSTEP5 - Explanation: MARKER-EXPLANATION\n'
    )
    backend = RecordingBackend(answer)
    monkeypatch.setattr("app.commands.commands_repl.make_client", lambda *args: LlmClient(backend))

    queries = [ON_TOP_QUERY, "Which is bigger the white couch or the pillow (id:27)", ON_TOP_QUERY]
    result = runner.invoke(cli, ["repl", str(couch_pillow_path), "--backend", "mock"], input="\n".join(queries) + "\n")

    assert result.exit_code == 0
    assert [r.prompt.user_text for r in backend.requests] == queries
    for request in backend.requests:
        assert "MARKER" not in request.prompt.system_text
    assert backend.requests[0].prompt == backend.requests[2].prompt
    assert result.stdout.count("grounding: ok") == 3


def test_repl_reports_unknown_objects_and_continues(runner, listing1_path, data_dir):
    result = runner.invoke(
        cli,
        ["repl", str(listing1_path), "--backend", "mock", "--mock-script", str(data_dir / "mock_unknown_object.json")],
        input="Where is the lamp?\nWhere is the vase?\n:quit\n",
    )
    assert result.exit_code == 0
    first, second = result.stdout.split("STEP1 inferred query:")[1:]
    assert "grounding issues:" in first
    assert "UnknownId: object id 9 is not in the scene" in first
    assert "grounding: ok" in second


def test_repl_keeps_going_after_errors(runner, listing1_path):
    result = runner.invoke(cli, ["repl", str(listing1_path)], input="Where is the vase?\nWhere is the mirror?\n")
    assert result.exit_code == 0
    assert result.stderr.count("SCENEGPT_API_KEY") == 2


def test_repl_oracle_toggle(runner, couch_pillow_path, data_dir):
    result = runner.invoke(
        cli,
        ["repl", str(couch_pillow_path), "--backend", "mock", "--mock-script", str(data_dir / "mock_garbage.json")],
        input=f"{ON_TOP_QUERY}\n:oracle on\n{ON_TOP_QUERY}\n:oracle maybe\n",
    )
    assert result.exit_code == 0
    assert "no STEP headers" in result.stderr
    assert "oracle backend on" in result.stdout
    assert "answer: yes" in result.stdout
    assert "usage: :oracle on|off" in result.stdout


# ---------- eval ----------

def test_eval_with_oracle(runner, tmp_path):
    result, payload = run_json(
        runner, "eval", "--seed", 1, "--scenes", 5, "--backend", "oracle",
        "--category", "SizeCompare", "--category", "Containment",
        "--category", "OnTopOf", "--category", "RelativePosition",
        "--out", tmp_path / "report", "--pdf",
    )
    assert result.exit_code == 0
    assert payload["accuracy"] == 1.0
    assert payload["scene_count"] == 5
    assert "records" not in payload
    assert (tmp_path / "report" / "report.pdf").exists()
    assert (tmp_path / "report" / "records.jsonl").read_text(encoding="utf-8").count("\n") == payload["total"]


def test_eval_text_output(runner, tmp_path, data_dir):
    result = runner.invoke(cli, [
        "eval", "--scenes", "2", "--backend", "mock", "--mock-script", str(data_dir / "mock_garbage.json"),
        "--out", str(tmp_path),
    ])
    assert result.exit_code == 0
    assert "overall accuracy: 0.0%" in result.stdout
    assert "Report written to" in result.stdout


# ---------- generate and compact ----------

def test_generate_is_deterministic(runner, tmp_path):
    for name in ("a.json", "b.json"):
        result = runner.invoke(cli, ["generate", "--seed", "9", "--nodes", "10", "--out", str(tmp_path / name)])
        assert result.exit_code == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    result = runner.invoke(cli, ["validate", str(tmp_path / "a.json")])
    assert result.stdout.strip() == "10 nodes, 0 issues"


def test_generated_large_scene_is_compacted(runner, tmp_path):
    path = tmp_path / "large.json"
    result, generated = run_json(runner, "generate", "--seed", 3, "--nodes", 150, "--captions", 300, "--out", path)
    assert result.exit_code == 0
    assert generated["nodes"] == 150

    result, payload = run_json(runner, "compact", path, "--budget", 16000, "--query", "Where is the door?")
    assert result.exit_code == 0
    assert payload["before"] > 16000
    assert payload["after"] <= 16000
    assert payload["actions"][0]["kind"] == "drop_captions"


def test_compact_infeasible_budget(runner, listing1_path):
    result, payload = run_json(runner, "compact", listing1_path, "--budget", 10)
    assert result.exit_code == 1
    assert payload["error"] == "BudgetInfeasible"


# ---------- configuration ----------

def test_missing_config_file(runner, tmp_path, listing1_path):
    result = runner.invoke(cli, ["--config", str(tmp_path / "missing.json"), "validate", str(listing1_path)])
    assert result.exit_code == 1
    assert "Config file not found" in result.stderr


def test_config_file_sets_the_budget(runner, tmp_path, listing1_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"token_budget": 10}), encoding="utf-8")
    result = runner.invoke(cli, ["--config", str(config), "compact", str(listing1_path)])
    assert result.exit_code == 1
    assert "exceeds token budget" in result.stderr


# ---------- usage errors ----------

def test_usage_errors_in_json(runner, listing1_path):
    result, payload = run_json(runner, "describe", listing1_path, "--no-such-option")
    assert result.exit_code == 1
    assert payload["error"] == "NoSuchOption"
    assert payload["exit_code"] == 1
    assert "--no-such-option" in payload["message"]

    result, payload = run_json(runner, "frobnicate")
    assert result.exit_code == 1
    assert "frobnicate" in payload["message"]


def test_usage_errors_in_text(runner, listing1_path):
    result = runner.invoke(cli, ["describe", str(listing1_path), "--no-such-option"])
    assert result.exit_code == 1
    assert result.stdout == ""
    assert "No such option" in result.stderr


def test_help_exits_cleanly(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    assert "describe" in result.stdout
