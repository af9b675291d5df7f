from __future__ import annotations

from collections.abc import Sequence
from enum import Enum
from typing import Annotated, Any, NamedTuple

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    PrivateAttr,
    field_validator,
    model_validator,
)

from app.core.exceptions import UnknownObjectError
from app.utils.validators import finite_number, non_negative_id, strict_text

FiniteNumber = Annotated[float, BeforeValidator(finite_number)]
ObjectId = Annotated[int, BeforeValidator(non_negative_id)]
Text = Annotated[str, BeforeValidator(strict_text)]


class Vec3(BaseModel):
    """
    Point or size in scene units (meters), z is height.
    Validates from a 3-element JSON array.
    """
    model_config = ConfigDict(frozen=True)

    x: FiniteNumber
    y: FiniteNumber
    z: FiniteNumber

    @model_validator(mode="before")
    @classmethod
    def _from_sequence(cls, value: Any) -> Any:
        if isinstance(value, (dict, Vec3)):
            return value
        if isinstance(value, (str, bytes)) or not isinstance(value, Sequence):
            if isinstance(value, np.ndarray):
                value = value.tolist()
            else:
                raise ValueError("must be an array of 3 numbers")
        if len(value) != 3:
            raise ValueError(f"must have exactly 3 components, got {len(value)}")
        return {"x": value[0], "y": value[1], "z": value[2]}

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


class ObjectNode(BaseModel):
    """
    One scene object. Unknown JSON keys are kept in ``model_extra``.
    """
    model_config = ConfigDict(frozen=True, extra="allow")

    id: ObjectId
    bbox_extent: Vec3
    bbox_center: Vec3
    object_tag: Text
    caption: Text = ""
    color: Text = ""
    material: Text = ""

    @field_validator("bbox_extent")
    @classmethod
    def _extent_non_negative(cls, value: Vec3) -> Vec3:
        if min(value.x, value.y, value.z) < 0:
            raise ValueError("extent components must be >= 0")
        return value

    @field_validator("object_tag")
    @classmethod
    def _tag_non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("object_tag must be non-empty")
        return value

    @property
    def extras(self) -> dict[str, Any]:
        return dict(self.model_extra or {})

    @property
    def volume(self) -> float:
        e = self.bbox_extent
        return e.x * e.y * e.z

    def label(self) -> str:
        return f"{self.object_tag} (id: {self.id})"


class Aabb(BaseModel):
    model_config = ConfigDict(frozen=True)

    min: Vec3
    max: Vec3


class SpatialRelation(str, Enum):
    ON_TOP_OF = "OnTopOf"
    ABOVE = "Above"
    BELOW = "Below"
    NEAR = "Near"
    OVERLAPPING = "Overlapping"
    POSITIVE_X = "PositiveX"
    NEGATIVE_X = "NegativeX"
    POSITIVE_Y = "PositiveY"
    NEGATIVE_Y = "NegativeY"


DIRECTIONAL_RELATIONS = frozenset({
    SpatialRelation.ABOVE,
    SpatialRelation.BELOW,
    SpatialRelation.POSITIVE_X,
    SpatialRelation.NEGATIVE_X,
    SpatialRelation.POSITIVE_Y,
    SpatialRelation.NEGATIVE_Y,
})


class Edge(NamedTuple):
    subject_id: int
    relation: SpatialRelation
    object_id: int

    def sort_key(self) -> tuple[int, str, int]:
        return (self.subject_id, self.relation.value, self.object_id)

    def describe(self) -> str:
        return f"{self.subject_id} {self.relation.value} {self.object_id}"


class SceneIssue(BaseModel):
    """
    One validation problem, located by node index and field name.
    """
    node_index: int | None = None
    field: str | None = None
    message: str

    def describe(self) -> str:
        parts = []
        if self.node_index is not None:
            parts.append(f"node {self.node_index}")
        if self.field:
            parts.append(f"field '{self.field}'")
        location = ", ".join(parts)
        return f"{location}: {self.message}" if location else self.message


class SceneGraph(BaseModel):
    """
    Ordered object nodes plus derived spatial edges. Immutable.
    """
    model_config = ConfigDict(frozen=True)

    nodes: tuple[ObjectNode, ...] = ()
    edges: tuple[Edge, ...] = ()

    _index: dict[int, ObjectNode] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_ids(self):
        seen: set[int] = set()
        for node in self.nodes:
            if node.id in seen:
                raise ValueError(f"duplicate id {node.id}")
            seen.add(node.id)
        for edge in self.edges:
            for endpoint in (edge.subject_id, edge.object_id):
                if endpoint not in seen:
                    raise ValueError(f"edge {edge.describe()} refers to unknown id {endpoint}")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._index = {node.id: node for node in self.nodes}

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def ids(self) -> list[int]:
        return [node.id for node in self.nodes]

    def has(self, object_id: int) -> bool:
        return object_id in self._index

    def node(self, object_id: int) -> ObjectNode:
        try:
            return self._index[object_id]
        except KeyError:
            raise UnknownObjectError(object_id) from None

    def with_edges(self, edges: Sequence[Edge]) -> "SceneGraph":
        return SceneGraph(nodes=self.nodes, edges=tuple(edges))
