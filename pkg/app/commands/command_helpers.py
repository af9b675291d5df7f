"""
Shared plumbing for the command modules: the per-invocation state, output
in text or JSON, and the mapping from exceptions to exit codes.
"""
import json
from dataclasses import dataclass
from typing import Any, NoReturn

import click

from app.core.config import AppConfig
from app.core.constants import EXIT_INVALID, EXIT_IO, EXIT_UNPARSEABLE
from app.core.exceptions import LlmError, SceneParseError, UnparseableResponseError
from app.models.parsed_response import GroundingIssue
from app.services.llm_service import BackendKind, LlmClient, load_mock_script, make_backend
from app.services.pipeline_service import PipelineResult


@dataclass
class CliState:
    config: AppConfig

    @property
    def json_output(self) -> bool:
        return self.config.output_format == "json"

    def with_budget(self, budget: int | None) -> AppConfig:
        if budget is None:
            return self.config
        return self.config.model_copy(update={"token_budget": budget})


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, UnparseableResponseError):
        return EXIT_UNPARSEABLE
    if isinstance(error, (LlmError, OSError)):
        return EXIT_IO
    return EXIT_INVALID


def error_kind(error: BaseException) -> str:
    return type(error).__name__.removesuffix("Error") or type(error).__name__


def emit(state: CliState, payload: Any, text: str) -> None:
    if state.json_output:
        click.echo(json.dumps(payload, ensure_ascii=False))
    else:
        click.echo(text)


def report_error(error: BaseException, json_output: bool) -> int:
    code = exit_code_for(error)
    if json_output:
        payload = {"error": error_kind(error), "message": str(error), "exit_code": code}
        if isinstance(error, SceneParseError):
            payload["issues"] = [issue.model_dump() for issue in error.issues]
        click.echo(json.dumps(payload, ensure_ascii=False))
    else:
        click.echo(f"error: {error}", err=True)
        if isinstance(error, SceneParseError):
            for issue in error.issues[1:]:
                click.echo(f"  - {issue.describe()}", err=True)
    return code


def fail(ctx: click.Context, error: BaseException) -> NoReturn:
    state = ctx.find_object(CliState)
    code = report_error(error, state.json_output if state else False)
    ctx.exit(code)


def make_client(config: AppConfig, backend: str, mock_script: str | None = None) -> LlmClient:
    script = load_mock_script(mock_script) if mock_script else None
    return LlmClient(make_backend(backend, config.llm, config.oracle, script), config.llm)


def backend_option(default: str = BackendKind.LIVE.value):
    return click.option(
        "--backend",
        type=click.Choice([kind.value for kind in BackendKind]),
        default=default,
        show_default=True,
        help="live: chat-completions endpoint; mock: canned answers; oracle: geometric answers.",
    )


def mock_script_option():
    return click.option(
        "--mock-script",
        type=click.Path(dir_okay=False),
        default=None,
        help="JSON file with canned responses for the mock backend.",
    )


# ---------- Rendering ----------

def issue_payload(issue: GroundingIssue) -> dict:
    return {"kind": issue.kind.value, "step": issue.step, "detail": issue.detail}


def result_payload(result: PipelineResult) -> dict:
    parsed = result.parsed
    return {
        "query": result.query,
        "answer": parsed.structured_fields(),
        "notes": [issue_payload(note) for note in parsed.notes],
        "issues": [issue_payload(issue) for issue in result.issues],
        "grounded": result.grounded,
        "prompt": {
            "token_estimate": result.prompt.token_estimate,
            "original_estimate": result.prompt.original_estimate,
            "included_nodes": len(result.prompt.included_node_ids),
            "compaction": [action.model_dump(mode="json") for action in result.prompt.compaction_report],
        },
    }


def render_result(result: PipelineResult) -> str:
    parsed = result.parsed
    ids = ", ".join(str(object_id) for object_id in parsed.relevant_object_ids)

    answer = []
    if parsed.final_object_id is not None:
        answer.append(f"object: {parsed.final_object_tag or '?'} (id: {parsed.final_object_id})")
    if parsed.final_verdict is not None:
        answer.append(f"answer: {'yes' if parsed.final_verdict else 'no'}")
    if parsed.final_relations:
        answer.append("relations: " + ", ".join(r.value for r in parsed.final_relations))

    lines = [
        f"STEP1 inferred query: {parsed.inferred_query}",
        f"STEP2 relevant objects: [{ids}]",
        f"STEP3 reason: {parsed.relevance_reason}",
        f"STEP4 final answer: {parsed.final_text}",
    ]
    if answer:
        lines.append("      " + "  ".join(answer))
    lines.append(f"STEP5 explanation: {parsed.explanation}")

    if result.prompt.compacted:
        lines.append(
            f"prompt compacted: {result.prompt.original_estimate} -> {result.prompt.token_estimate} tokens"
        )
    if result.issues:
        lines.append("grounding issues:")
        lines.extend(f"  - {issue.describe()}" for issue in result.issues)
    else:
        lines.append("grounding: ok" if result.grounded else "grounding: no object cited")
    return "\n".join(lines)
