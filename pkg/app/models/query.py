from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict

from app.models.scene_graph import SpatialRelation, Vec3


class QueryCategory(str, Enum):
    AFFORDANCE = "Affordance"
    NEGATION = "Negation"
    SIZE_COMPARE = "SizeCompare"
    CONTAINMENT = "Containment"
    ON_TOP_OF = "OnTopOf"
    RELATIVE_POSITION = "RelativePosition"
    FREEFORM = "Freeform"


# categories the geometric oracle can decide
DECIDABLE_CATEGORIES = (
    QueryCategory.SIZE_COMPARE,
    QueryCategory.CONTAINMENT,
    QueryCategory.ON_TOP_OF,
    QueryCategory.RELATIVE_POSITION,
)

PREDICATE_CATEGORIES = (QueryCategory.CONTAINMENT, QueryCategory.ON_TOP_OF)


class SizeOrdering(str, Enum):
    BIGGER = "Bigger"
    SMALLER = "Smaller"
    SIMILAR = "Similar"


class SizeComparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    ordering: SizeOrdering
    # volume(a) / volume(b); None when a zero or overflowing volume forced the ranked-extent fallback
    ratio: float | None = None


class RelativePosition(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta: Vec3
    distance: float
    relations: tuple[SpatialRelation, ...]
    near: bool


class StructuredQuery(BaseModel):
    """
    A query mapped onto the taxonomy. subject/object ids are the first and
    second objects the query mentions.
    """
    model_config = ConfigDict(frozen=True)

    category: QueryCategory
    subject_id: int | None = None
    object_id: int | None = None
    text: str = ""


class AnswerStatus(str, Enum):
    ANSWERED = "answered"
    UNSUPPORTED_CATEGORY = "unsupported_category"


class OracleAnswer(BaseModel):
    model_config = ConfigDict(frozen=True)

    query: StructuredQuery
    status: AnswerStatus = AnswerStatus.ANSWERED
    verdict: bool | None = None
    ordering: SizeOrdering | None = None
    relations: tuple[SpatialRelation, ...] = ()
    answer_object_id: int | None = None
    answer_object_tag: str | None = None
    evidence: dict[str, Any] = {}
    summary: str = ""

    @property
    def supported(self) -> bool:
        return self.status == AnswerStatus.ANSWERED
