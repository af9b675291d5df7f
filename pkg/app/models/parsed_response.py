from enum import Enum

from pydantic import BaseModel, ConfigDict

from app.models.scene_graph import SpatialRelation


class GroundingIssueKind(str, Enum):
    UNKNOWN_ID = "UnknownId"
    TOO_MANY_RELEVANT = "TooManyRelevant"
    TAG_MISMATCH = "TagMismatch"
    MISSING_STEP = "MissingStep"
    MALFORMED_JSON = "MalformedJson"


class GroundingIssue(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: GroundingIssueKind
    step: int
    detail: str

    def describe(self) -> str:
        return f"STEP{self.step} {self.kind.value}: {self.detail}"


class ParsedResponse(BaseModel):
    """
    The five chain-of-thought steps of a model answer.

    STEP1 inferred_query, STEP2 relevant_object_ids, STEP3 relevance_reason,
    STEP4 final_text plus the JSON fields, STEP5 explanation.
    """
    model_config = ConfigDict(frozen=True)

    inferred_query: str = ""
    relevant_object_ids: tuple[int, ...] = ()
    relevance_reason: str = ""
    final_text: str = ""
    final_object_tag: str = ""
    final_object_id: int | None = None
    final_verdict: bool | None = None
    final_relations: tuple[SpatialRelation, ...] = ()
    explanation: str = ""
    raw: str = ""
    notes: tuple[GroundingIssue, ...] = ()

    def structured_fields(self) -> dict:
        """Everything except the raw text and parse notes."""
        return self.model_dump(exclude={"raw", "notes"})
