import json
import math
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from app.core.constants import NODE_FIELDS, REQUIRED_NODE_FIELDS
from app.core.exceptions import SceneParseError
from app.core.logger import get_logger
from app.models.scene_graph import Aabb, ObjectNode, SceneGraph, SceneIssue, Vec3
from app.utils.helpers import round_number

logger = get_logger(__name__)


class SerializeOptions(BaseModel):
    """
    Controls how a scene is written in the scene JSON format.
    """
    model_config = ConfigDict(frozen=True)

    precision: int | None = 1
    omit_fields: frozenset[str] = frozenset()
    include_extras: bool = True
    indent: int | None = None

    @field_validator("omit_fields")
    @classmethod
    def _only_optional_fields(cls, value: frozenset[str]) -> frozenset[str]:
        required = value.intersection(REQUIRED_NODE_FIELDS)
        if required:
            raise ValueError(f"required fields cannot be omitted: {sorted(required)}")
        return value


def _issues_from_validation(index: int, error: ValidationError) -> list[SceneIssue]:
    issues = []
    for err in error.errors():
        loc = err.get("loc", ())
        field = str(loc[0]) if loc else None
        if err.get("type") == "missing":
            message = "missing required field"
        else:
            message = err.get("msg", "invalid value").removeprefix("Value error, ")
            if len(loc) > 1:
                message = f"{message} (component {loc[1]})"
        issues.append(SceneIssue(node_index=index, field=field, message=message))
    return issues


def _has_non_finite(value: Any) -> bool:
    if isinstance(value, float):
        return not math.isfinite(value)
    if isinstance(value, list):
        return any(_has_non_finite(v) for v in value)
    if isinstance(value, dict):
        return any(_has_non_finite(v) for v in value.values())
    return False


def find_scene_issues(data: Any) -> tuple[list[ObjectNode], list[SceneIssue]]:
    """
    Validates a decoded scene document. Returns the nodes that validated
    and every issue found, so callers can report all problems at once.
    """
    if not isinstance(data, list):
        return [], [SceneIssue(message="top-level value must be a JSON array")]

    nodes: list[ObjectNode] = []
    issues: list[SceneIssue] = []
    first_index: dict[int, int] = {}

    for index, item in enumerate(data):
        if not isinstance(item, dict):
            issues.append(SceneIssue(node_index=index, message="entry must be a JSON object"))
            continue
        try:
            node = ObjectNode.model_validate(item)
        except ValidationError as e:
            issues.extend(_issues_from_validation(index, e))
            continue

        bad_extras = [key for key, value in node.extras.items() if _has_non_finite(value)]
        if bad_extras:
            issues.extend(
                SceneIssue(node_index=index, field=key, message="non-finite number (NaN or Infinity)")
                for key in bad_extras
            )
            continue

        if node.id in first_index:
            issues.append(SceneIssue(
                node_index=index,
                field="id",
                message=f"duplicate id {node.id} (also used by node {first_index[node.id]})",
            ))
            continue
        first_index[node.id] = index
        nodes.append(node)

    return nodes, issues


def decode_scene_text(json_text: str | bytes) -> Any:
    if isinstance(json_text, bytes):
        try:
            json_text = json_text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SceneParseError([SceneIssue(message=f"input is not UTF-8: {e}")]) from e
    try:
        return json.loads(json_text)
    except json.JSONDecodeError as e:
        raise SceneParseError([SceneIssue(
            message=f"malformed JSON: {e.msg} at line {e.lineno} column {e.colno}"
        )]) from e


def parse_scene(json_text: str | bytes) -> SceneGraph:
    """
    Parses scene JSON. Never returns a partial scene:
    any problem raises SceneParseError listing every issue found.
    """
    data = decode_scene_text(json_text)
    nodes, issues = find_scene_issues(data)
    if issues:
        raise SceneParseError(issues)
    return SceneGraph(nodes=tuple(nodes))


def load_scene_file(path: str | Path) -> SceneGraph:
    with open(path, "rb") as f:
        raw = f.read()
    scene = parse_scene(raw)
    logger.info("Loaded scene %s with %d nodes", path, len(scene))
    return scene


def node_to_record(node: ObjectNode, opts: SerializeOptions | None = None) -> dict[str, Any]:
    opts = opts or SerializeOptions()

    def vec(v: Vec3) -> list[float]:
        return [round_number(c, opts.precision) for c in v.as_list()]

    values = {
        "id": node.id,
        "bbox_extent": vec(node.bbox_extent),
        "bbox_center": vec(node.bbox_center),
        "object_tag": node.object_tag,
        "caption": node.caption,
        "color": node.color,
        "material": node.material,
    }
    record = {key: values[key] for key in NODE_FIELDS if key not in opts.omit_fields}

    if opts.include_extras:
        for key, value in node.extras.items():
            if key not in record and key not in NODE_FIELDS:
                record[key] = value
    return record


def serialize_scene(scene: SceneGraph, opts: SerializeOptions | None = None) -> str:
    """
    Writes the scene as a JSON array with the seven keys in canonical order.
    Edges are derived data and are never serialized.
    """
    opts = opts or SerializeOptions()
    records = [node_to_record(node, opts) for node in scene.nodes]
    return json.dumps(records, indent=opts.indent, ensure_ascii=False, allow_nan=False)


def save_scene_file(scene: SceneGraph, path: str | Path, opts: SerializeOptions | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_scene(scene, opts))
        f.write("\n")


def aabb_of(node: ObjectNode) -> Aabb:
    center = node.bbox_center.as_array()
    half = node.bbox_extent.as_array() / 2
    return Aabb(min=Vec3.model_validate(center - half), max=Vec3.model_validate(center + half))
