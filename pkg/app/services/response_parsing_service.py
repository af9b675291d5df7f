import json
import re
from typing import Any

from app.core.constants import MAX_RELEVANT_OBJECTS
from app.core.exceptions import JsonBlockNotFoundError, UnparseableResponseError
from app.core.logger import get_logger
from app.models.parsed_response import GroundingIssue, GroundingIssueKind, ParsedResponse
from app.models.scene_graph import SceneGraph, SpatialRelation

logger = get_logger(__name__)

_STEP_LABELS = (
    r"inferred[_ ]query|relevant[_ ]objects|reason for relevance|reason"
    r"|final[_ ]answer|answer|explanation"
)

# "STEP1 - inferred_query:", "STEP-5 - Explanation:", "**Step 4:** ..." and similar drift
_STEP_HEADER = re.compile(
    r"^[ \t>#*_]*STEP[ \t]*-?[ \t]*(?P<number>[1-5])(?![0-9])[ \t*_]*"
    r"(?:[-:–—][ \t]*)?"
    r"(?:(?:" + _STEP_LABELS + r")[ \t*_]*:)?[ \t*_]*",
    re.IGNORECASE | re.MULTILINE,
)
_FENCE = re.compile(r"^[ \t]*```[A-Za-z]*[ \t]*$", re.MULTILINE)
_BRACKETED = re.compile(r"\[([^\[\]]*)\]")
_LEADING_VERDICT = re.compile(r"^\W*(yes|no)\b", re.IGNORECASE)
_INTEGER = re.compile(r"-?[0-9]+")

_VERDICT_WORDS = {"yes": True, "true": True, "no": False, "false": False}


def _balanced_end(text: str, start: int) -> int | None:
    """End index (exclusive) of the brace group opening at start."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def _scan_json_object(text: str) -> tuple[dict, int, int]:
    pos = text.find("{")
    while pos != -1:
        end = _balanced_end(text, pos)
        if end is not None:
            try:
                value = json.loads(text[pos:end])
            except ValueError:
                value = None
            if isinstance(value, dict):
                return value, pos, end
        pos = text.find("{", pos + 1)
    raise JsonBlockNotFoundError("no valid JSON object found")


def extract_json_block(text: str) -> dict:
    """
    First syntactically valid JSON object in text, found by balanced-brace
    scanning; surrounding prose and code fences are ignored.
    """
    value, _, _ = _scan_json_object(text)
    return value


def _split_steps(text: str) -> dict[int, str]:
    headers = []
    seen = set()
    for match in _STEP_HEADER.finditer(text):
        number = int(match.group("number"))
        if number in seen:
            continue
        seen.add(number)
        headers.append(match)

    sections = {}
    for i, match in enumerate(headers):
        end = headers[i + 1].start() if i + 1 < len(headers) else len(text)
        sections[int(match.group("number"))] = text[match.end():end].strip()
    return sections


def _parse_id_list(body: str) -> tuple[tuple[int, ...], list[GroundingIssue]]:
    match = _BRACKETED.search(body)
    if match is None:
        return (), [GroundingIssue(
            kind=GroundingIssueKind.MALFORMED_JSON, step=2, detail="no bracketed list of object ids",
        )]

    ids: list[int] = []
    notes: list[GroundingIssue] = []
    for token in match.group(1).split(","):
        token = token.strip().strip("'\"")
        if not token:
            continue
        try:
            ids.append(int(token))
        except ValueError:
            notes.append(GroundingIssue(
                kind=GroundingIssueKind.MALFORMED_JSON, step=2, detail=f"'{token}' is not an object id",
            ))
    return tuple(ids), notes


def _as_object_id(value: Any) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str) and _INTEGER.fullmatch(value.strip()):
        return int(value.strip())
    return None


def _as_verdict(value: Any) -> bool | None:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        return _VERDICT_WORDS.get(value.strip().lower())
    return None


def _parse_final_answer(body: str) -> dict:
    fields: dict[str, Any] = {"final_text": body, "notes": []}
    notes = fields["notes"]

    try:
        payload, start, end = _scan_json_object(body)
    except JsonBlockNotFoundError:
        notes.append(GroundingIssue(
            kind=GroundingIssueKind.MISSING_STEP, step=4, detail="final answer has no JSON object",
        ))
        payload = None
    else:
        fields["final_text"] = body[:start] + body[end:]

    fields["final_text"] = _FENCE.sub("", fields["final_text"]).strip()

    if payload is not None:
        if "object_id" in payload:
            object_id = _as_object_id(payload["object_id"])
            if object_id is None:
                notes.append(GroundingIssue(
                    kind=GroundingIssueKind.MALFORMED_JSON, step=4,
                    detail=f"object_id {payload['object_id']!r} is not an integer",
                ))
            fields["final_object_id"] = object_id
        else:
            notes.append(GroundingIssue(
                kind=GroundingIssueKind.MALFORMED_JSON, step=4, detail="JSON has no object_id",
            ))

        tag = payload.get("object_tag")
        if isinstance(tag, str):
            fields["final_object_tag"] = tag

        if "answer" in payload:
            fields["final_verdict"] = _as_verdict(payload["answer"])

        relations = payload.get("relations")
        if isinstance(relations, list):
            parsed = []
            for name in relations:
                try:
                    parsed.append(SpatialRelation(name))
                except ValueError:
                    notes.append(GroundingIssue(
                        kind=GroundingIssueKind.MALFORMED_JSON, step=4, detail=f"unknown relation {name!r}",
                    ))
            fields["final_relations"] = tuple(parsed)

    if fields.get("final_verdict") is None:
        match = _LEADING_VERDICT.match(fields["final_text"])
        if match:
            fields["final_verdict"] = _VERDICT_WORDS[match.group(1).lower()]

    return fields


def parse_response(text: str, strict: bool = False) -> ParsedResponse:
    """
    Splits a model answer into its five steps.

    Header matching is lenient about case, hyphens and spacing. A missing
    STEP4 JSON leaves final_object_id unset and adds a note. With strict=True
    any missing step or malformed JSON makes the response unparseable.
    """
    if not isinstance(text, str):
        text = "" if text is None else str(text)

    sections = _split_steps(text)
    if not sections:
        raise UnparseableResponseError("no STEP headers found in response", raw=text)

    notes: list[GroundingIssue] = []
    for number in range(1, 6):
        if number not in sections:
            notes.append(GroundingIssue(
                kind=GroundingIssueKind.MISSING_STEP, step=number, detail=f"STEP{number} not found",
            ))

    fields: dict[str, Any] = {
        "inferred_query": sections.get(1, ""),
        "relevance_reason": sections.get(3, ""),
        "explanation": sections.get(5, ""),
        "raw": text,
    }

    if 2 in sections:
        ids, id_notes = _parse_id_list(sections[2])
        fields["relevant_object_ids"] = ids
        notes.extend(id_notes)

    if 4 in sections:
        final = _parse_final_answer(sections[4])
        notes.extend(final.pop("notes"))
        fields.update(final)

    notes.sort(key=lambda issue: issue.step)
    if strict and notes:
        raise UnparseableResponseError(
            "strict parse failed: " + "; ".join(issue.describe() for issue in notes), raw=text,
        )
    if notes:
        logger.warning("Parsed response with %d note(s): %s", len(notes), notes[0].describe())

    return ParsedResponse(**fields, notes=tuple(notes))


def validate_grounding(resp: ParsedResponse, scene: SceneGraph) -> list[GroundingIssue]:
    """
    Checks that every cited id exists, at most two objects are listed as
    relevant, and the final tag matches the cited node. Issues are ordered
    by step.
    """
    issues: list[GroundingIssue] = []

    for object_id in resp.relevant_object_ids:
        if not scene.has(object_id):
            issues.append(GroundingIssue(
                kind=GroundingIssueKind.UNKNOWN_ID, step=2, detail=f"object id {object_id} is not in the scene",
            ))
    if len(resp.relevant_object_ids) > MAX_RELEVANT_OBJECTS:
        issues.append(GroundingIssue(
            kind=GroundingIssueKind.TOO_MANY_RELEVANT,
            step=2,
            detail=f"{len(resp.relevant_object_ids)} relevant objects listed, at most {MAX_RELEVANT_OBJECTS} allowed",
        ))

    if resp.final_object_id is not None:
        if not scene.has(resp.final_object_id):
            issues.append(GroundingIssue(
                kind=GroundingIssueKind.UNKNOWN_ID,
                step=4,
                detail=f"object id {resp.final_object_id} is not in the scene",
            ))
        else:
            expected = scene.node(resp.final_object_id).object_tag
            given = resp.final_object_tag
            if given and given.strip().lower() != expected.strip().lower():
                issues.append(GroundingIssue(
                    kind=GroundingIssueKind.TAG_MISMATCH,
                    step=4,
                    detail=f"object {resp.final_object_id} is a '{expected}', not a '{given}'",
                ))

    issues.sort(key=lambda issue: issue.step)
    return issues


def render_response(resp: ParsedResponse) -> str:
    """
    Writes a ParsedResponse in the five-step output format; parse_response
    reads it back to the same structured fields.
    """
    ids = ", ".join(str(object_id) for object_id in resp.relevant_object_ids)
    final = resp.final_text
    if resp.final_object_id is not None:
        payload: dict[str, Any] = {"object_tag": resp.final_object_tag, "object_id": resp.final_object_id}
        if resp.final_verdict is not None:
            payload["answer"] = "yes" if resp.final_verdict else "no"
        if resp.final_relations:
            payload["relations"] = [relation.value for relation in resp.final_relations]
        final = f"{final}\n{json.dumps(payload)}"

    return (
        f"STEP1 - inferred_query: {resp.inferred_query}\n"
        f"STEP2 - relevant_objects: [{ids}]\n"
        f"STEP3 - reason for relevance: {resp.relevance_reason}\n"
        f"STEP4 - Final Answer: {final}\n"
        f"STEP-5 - Explanation: {resp.explanation}\n"
    )
