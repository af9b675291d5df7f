from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from app.models.query import QueryCategory, StructuredQuery
from app.models.scene_graph import SceneGraph, SpatialRelation


class Layout(str, Enum):
    STACKS = "Stacks"
    CLUSTERS = "Clusters"
    CONTAINERS = "Containers"
    MIXED = "Mixed"


class LexiconEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: str
    affordances: tuple[str, ...] = ()
    properties: tuple[str, ...] = ()
    roles: tuple[str, ...] = ()
    extent: tuple[float, float, float] = (0.5, 0.5, 0.5)
    colors: tuple[str, ...] = ()
    materials: tuple[str, ...] = ()


class SceneRecipe(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    node_count: int = Field(default=12, ge=1)
    layout: Layout = Layout.MIXED
    caption_length: int = Field(default=0, ge=0)


class FactKind(str, Enum):
    ON_TOP_OF = "OnTopOf"
    CONTAINS = "Contains"
    RELATIVE = "Relative"


class PlantedFact(BaseModel):
    """A relation true by construction: subject <kind> object."""
    model_config = ConfigDict(frozen=True)

    kind: FactKind
    subject_id: int
    object_id: int
    relations: tuple[SpatialRelation, ...] = ()


class GeneratedScene(BaseModel):
    model_config = ConfigDict(frozen=True)

    recipe: SceneRecipe
    scene: SceneGraph
    facts: tuple[PlantedFact, ...] = ()


class GroundTruthQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    query_text: str
    category: QueryCategory
    expected_object_ids: tuple[int, ...] = ()
    expected_verdict: bool | None = None
    expected_relations: tuple[SpatialRelation, ...] | None = None
    structured: StructuredQuery


class EvalCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    generated: GeneratedScene
    queries: tuple[GroundTruthQuery, ...] = ()


class Outcome(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    UNGROUNDED = "ungrounded"
    UNPARSEABLE = "unparseable"


class EvalRecord(BaseModel):
    """One scored query: scene, query, ground truth, oracle answer, model answer, verdict."""
    scene_seed: int
    query_text: str
    category: QueryCategory
    expected_object_ids: tuple[int, ...] = ()
    expected_verdict: bool | None = None
    expected_relations: tuple[SpatialRelation, ...] | None = None
    oracle_answer: str = ""
    oracle_object_id: int | None = None
    answer_object_id: int | None = None
    answer_verdict: bool | None = None
    answer_relations: tuple[SpatialRelation, ...] = ()
    grounding_issues: tuple[str, ...] = ()
    outcome: Outcome
    raw_response: str | None = None
    error: str | None = None
    prompt_tokens: int | None = None


class CategoryCounts(BaseModel):
    correct: int = 0
    incorrect: int = 0
    ungrounded: int = 0
    unparseable: int = 0

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.ungrounded + self.unparseable

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


class EvalReport(BaseModel):
    backend: str
    seed: int
    scene_count: int
    per_category: dict[str, CategoryCounts] = {}
    overall: CategoryCounts = CategoryCounts()
    records: list[EvalRecord] = []

    @property
    def accuracy(self) -> float:
        return self.overall.accuracy
