from enum import Enum

from pydantic import BaseModel, ConfigDict, field_validator

from app.models.query import QueryCategory


class InContextExample(BaseModel):
    model_config = ConfigDict(frozen=True)

    question: str
    answer: str
    category: QueryCategory

    @field_validator("question", "answer")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must be non-empty")
        return value


class CompactionKind(str, Enum):
    DROP_CAPTIONS = "drop_captions"
    DROP_ATTRIBUTES = "drop_attributes"
    ROUND_NUMERICS = "round_numerics"
    PRUNE_NODES = "prune_nodes"


class CompactionAction(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: CompactionKind
    tokens_before: int
    tokens_after: int
    pruned_ids: tuple[int, ...] = ()
    detail: str = ""


class PromptBundle(BaseModel):
    """
    A fully assembled prompt. system_text holds the whole template with the
    scene, demonstrations and question filled in; user_text is the bare query.
    """
    model_config = ConfigDict(frozen=True)

    system_text: str
    user_text: str
    token_estimate: int
    # estimate of the same prompt before any compaction
    original_estimate: int | None = None
    included_node_ids: tuple[int, ...] = ()
    compaction_report: tuple[CompactionAction, ...] = ()

    @property
    def compacted(self) -> bool:
        return bool(self.compaction_report)
