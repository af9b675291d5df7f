"""
Synthetic scenes with spatial facts planted by construction, plus the
templated ground-truth queries that go with them.

All geometry is laid out on a 0.1 m integer grid with even extents, so
every center, half-extent and face is an exact multiple of 0.1 before it
is converted to meters. Planted facts therefore hold exactly.
"""
import json
import math
from pathlib import Path

import numpy as np
from pydantic import TypeAdapter

from app.core.constants import TAG_LEXICON_PATH
from app.core.exceptions import ConfigError
from app.core.logger import get_logger
from app.models.evaluation import (
    FactKind,
    GeneratedScene,
    GroundTruthQuery,
    Layout,
    LexiconEntry,
    PlantedFact,
    SceneRecipe,
)
from app.models.query import QueryCategory, StructuredQuery
from app.models.scene_graph import ObjectNode, SceneGraph, SpatialRelation
from app.services.spatial_oracle_service import sort_relations

logger = get_logger(__name__)

_LEXICON_ADAPTER = TypeAdapter(list[LexiconEntry])

# grid units per meter
UNITS_PER_METER = 10
# spacing between group origins; wide enough that groups never touch
CELL_UNITS = 50

_LAYOUT_GROUPS = {
    Layout.STACKS: ("stack",),
    Layout.CLUSTERS: ("cluster",),
    Layout.CONTAINERS: ("container",),
    Layout.MIXED: ("stack", "container", "cluster", "single"),
}
_GROUP_SIZE = {"stack": 2, "container": 2, "cluster": 3, "single": 1}

_CAPTION_FILLER = (
    "It stands close to one of the walls.",
    "The surface looks clean and well kept.",
    "Light from the window falls across it.",
    "Nothing unusual is visible around it.",
    "It appears to be in everyday use.",
    "Its edges are slightly worn.",
    "A few small objects are scattered nearby.",
)


def load_lexicon(path: str | Path | None = None) -> list[LexiconEntry]:
    """
    Reads the tag lexicon: a JSON array of {tag, affordances, properties}
    with optional roles, extent, colors and materials.
    """
    with open(path or TAG_LEXICON_PATH, "r", encoding="utf-8") as f:
        entries = _LEXICON_ADAPTER.validate_python(json.load(f))
    if not entries:
        raise ConfigError(f"Tag lexicon {path or TAG_LEXICON_PATH} is empty")
    return entries


def _to_meters(units: int) -> float:
    return round(units / UNITS_PER_METER, 1)


def _directional(delta: tuple[int, int, int]) -> tuple[SpatialRelation, ...]:
    dx, dy, dz = delta
    relations = []
    if dx:
        relations.append(SpatialRelation.POSITIVE_X if dx > 0 else SpatialRelation.NEGATIVE_X)
    if dy:
        relations.append(SpatialRelation.POSITIVE_Y if dy > 0 else SpatialRelation.NEGATIVE_Y)
    if dz:
        relations.append(SpatialRelation.ABOVE if dz > 0 else SpatialRelation.BELOW)
    return sort_relations(relations)


class _SceneBuilder:
    def __init__(self, recipe: SceneRecipe, lexicon: list[LexiconEntry]):
        self.recipe = recipe
        self.lexicon = lexicon
        self.rng = np.random.default_rng(recipe.seed)
        self.nodes: list[ObjectNode] = []
        self.facts: list[PlantedFact] = []
        # whole-scene shift, z included, so coordinates are not all positive
        self.shift = (
            int(self.rng.integers(-30, 31)),
            int(self.rng.integers(-30, 31)),
            int(self.rng.integers(-15, 6)),
        )

    def pick(self, role: str | None = None, avoid: str | None = None) -> LexiconEntry:
        pool = [e for e in self.lexicon if role is None or role in e.roles] or self.lexicon
        if avoid is not None and len(pool) > 1:
            pool = [e for e in pool if e.tag != avoid] or pool
        return pool[int(self.rng.integers(len(pool)))]

    def extent_units(self, meters: float) -> int:
        units = meters * UNITS_PER_METER * self.rng.uniform(0.8, 1.2)
        return max(2, int(round(units / 2)) * 2)

    def choose(self, options: tuple[str, ...]) -> str:
        return options[int(self.rng.integers(len(options)))] if options else ""

    def caption(self, entry: LexiconEntry, color: str) -> str:
        text = f"A {color} {entry.tag}." if color else f"A {entry.tag}."
        while len(text) < self.recipe.caption_length:
            text = f"{text} {self.choose(_CAPTION_FILLER)}"
        return text

    def add(self, entry: LexiconEntry, center: tuple[int, int, int], extent: list[int]) -> int:
        node_id = len(self.nodes)
        color = self.choose(entry.colors)
        shifted = [c + s for c, s in zip(center, self.shift)]
        self.nodes.append(ObjectNode(
            id=node_id,
            bbox_extent=[_to_meters(int(u)) for u in extent],
            bbox_center=[_to_meters(u) for u in shifted],
            object_tag=entry.tag,
            caption=self.caption(entry, color),
            color=color,
            material=self.choose(entry.materials),
        ))
        return node_id

    # ---------- Groups ----------

    def stack(self, ox: int, oy: int) -> None:
        lower = self.pick("support")
        upper = self.pick("item", avoid=lower.tag)

        low = [self.extent_units(v) for v in lower.extent]
        up = [min(self.extent_units(v), limit) for v, limit in zip(upper.extent[:2], low[:2])]
        up.append(self.extent_units(upper.extent[2]))

        # upper footprint stays inside the lower one
        offset = [int(self.rng.integers(-((l - u) // 2), (l - u) // 2 + 1)) for l, u in zip(low[:2], up[:2])]

        lower_id = self.add(lower, (ox, oy, low[2] // 2), low)
        upper_id = self.add(upper, (ox + offset[0], oy + offset[1], low[2] + up[2] // 2), up)
        self.facts.append(PlantedFact(kind=FactKind.ON_TOP_OF, subject_id=upper_id, object_id=lower_id))

    def container(self, ox: int, oy: int) -> None:
        outer = self.pick("container")
        inner = self.pick("item", avoid=outer.tag)

        outer_ext = [max(4, self.extent_units(v)) for v in outer.extent]
        # every sorted side of the inner box is strictly smaller than the outer one
        inner_sides = [max(2, int(0.7 * side / 2) * 2) for side in sorted(outer_ext)]
        inner_ext = [int(v) for v in self.rng.permutation(inner_sides)]

        outer_id = self.add(outer, (ox, oy, outer_ext[2] // 2), outer_ext)
        inner_x = ox + outer_ext[0] // 2 + 2 + inner_ext[0] // 2
        inner_id = self.add(inner, (inner_x, oy, inner_ext[2] // 2), inner_ext)
        self.facts.append(PlantedFact(kind=FactKind.CONTAINS, subject_id=outer_id, object_id=inner_id))

    def cluster(self, ox: int, oy: int, size: int) -> None:
        anchor = self.pick()
        anchor_ext = [self.extent_units(v) for v in anchor.extent]
        anchor_center = (ox, oy, anchor_ext[2] // 2)
        anchor_id = self.add(anchor, anchor_center, anchor_ext)

        for _ in range(size - 1):
            satellite = self.pick("item", avoid=anchor.tag)
            ext = [self.extent_units(v) for v in satellite.extent]
            center = (
                ox + int(self.rng.integers(-12, 13)),
                oy + int(self.rng.integers(-12, 13)),
                ext[2] // 2 + int(self.rng.integers(0, 10)),
            )
            satellite_id = self.add(satellite, center, ext)
            delta = tuple(c - a for c, a in zip(center, anchor_center))
            self.facts.append(PlantedFact(
                kind=FactKind.RELATIVE,
                subject_id=satellite_id,
                object_id=anchor_id,
                relations=_directional(delta),
            ))

    def single(self, ox: int, oy: int) -> None:
        entry = self.pick()
        ext = [self.extent_units(v) for v in entry.extent]
        self.add(entry, (ox, oy, ext[2] // 2), ext)

    def build(self) -> GeneratedScene:
        kinds = _LAYOUT_GROUPS[self.recipe.layout]
        groups: list[tuple[str, int]] = []
        remaining = self.recipe.node_count
        while remaining > 0:
            kind = kinds[len(groups) % len(kinds)]
            size = min(_GROUP_SIZE[kind], remaining)
            if size < 2:
                kind, size = "single", 1
            groups.append((kind, size))
            remaining -= size

        columns = math.ceil(math.sqrt(len(groups)))
        for index, (kind, size) in enumerate(groups):
            ox = (index % columns) * CELL_UNITS
            oy = (index // columns) * CELL_UNITS
            if kind == "cluster":
                self.cluster(ox, oy, size)
            else:
                getattr(self, kind)(ox, oy)

        return GeneratedScene(
            recipe=self.recipe,
            scene=SceneGraph(nodes=tuple(self.nodes)),
            facts=tuple(self.facts),
        )


def generate_scene(recipe: SceneRecipe, lexicon: list[LexiconEntry] | None = None) -> GeneratedScene:
    """
    Deterministic in recipe.seed. Stacks plant on-top-of pairs (upper
    footprint inside the lower one, bottom touching top), Containers plant
    strict sorted-extent dominance pairs, Clusters plant relative positions
    around an anchor. Mixed cycles through all of them.
    """
    generated = _SceneBuilder(recipe, lexicon or load_lexicon()).build()
    logger.debug(
        "Generated scene seed=%d layout=%s: %d nodes, %d facts",
        recipe.seed, recipe.layout.value, len(generated.scene), len(generated.facts),
    )
    return generated


# ---------- Queries ----------

def _ref(node: ObjectNode) -> str:
    return f"the {node.object_tag} (id: {node.id})"


def _predicate_query(
    category: QueryCategory,
    text: str,
    subject: ObjectNode,
    obj: ObjectNode,
    verdict: bool,
) -> GroundTruthQuery:
    return GroundTruthQuery(
        query_text=text,
        category=category,
        expected_object_ids=(subject.id,),
        expected_verdict=verdict,
        structured=StructuredQuery(category=category, subject_id=subject.id, object_id=obj.id, text=text),
    )


def _on_top_of_queries(scene: SceneGraph, facts: list[PlantedFact]) -> list[GroundTruthQuery]:
    queries = []
    for fact in facts:
        upper, lower = scene.node(fact.subject_id), scene.node(fact.object_id)
        for a, b, verdict in ((upper, lower, True), (lower, upper, False)):
            text = f"Is {_ref(a)} located on top of {_ref(b)}?"
            queries.append(_predicate_query(QueryCategory.ON_TOP_OF, text, a, b, verdict))
    return queries


def _containment_queries(scene: SceneGraph, facts: list[PlantedFact]) -> list[GroundTruthQuery]:
    queries = []
    for fact in facts:
        outer, inner = scene.node(fact.subject_id), scene.node(fact.object_id)
        for a, b, verdict in ((outer, inner, True), (inner, outer, False)):
            text = f"Can {_ref(a)} contain {_ref(b)}?"
            queries.append(_predicate_query(QueryCategory.CONTAINMENT, text, a, b, verdict))
    return queries


def _size_queries(scene: SceneGraph, facts: list[PlantedFact]) -> list[GroundTruthQuery]:
    queries = []
    for index, fact in enumerate(facts):
        outer, inner = scene.node(fact.subject_id), scene.node(fact.object_id)
        a, b = (outer, inner) if index % 2 == 0 else (inner, outer)
        text = f"Which is bigger, {_ref(a)} or {_ref(b)}?"
        queries.append(GroundTruthQuery(
            query_text=text,
            category=QueryCategory.SIZE_COMPARE,
            expected_object_ids=(outer.id,),
            structured=StructuredQuery(
                category=QueryCategory.SIZE_COMPARE, subject_id=a.id, object_id=b.id, text=text,
            ),
        ))
    return queries


def _relative_queries(scene: SceneGraph, facts: list[PlantedFact]) -> list[GroundTruthQuery]:
    queries = []
    for fact in facts:
        subject, anchor = scene.node(fact.subject_id), scene.node(fact.object_id)
        text = f"Where is {_ref(subject)} with respect to {_ref(anchor)}?"
        queries.append(GroundTruthQuery(
            query_text=text,
            category=QueryCategory.RELATIVE_POSITION,
            expected_object_ids=(subject.id,),
            expected_relations=fact.relations,
            structured=StructuredQuery(
                category=QueryCategory.RELATIVE_POSITION,
                subject_id=subject.id,
                object_id=anchor.id,
                text=text,
            ),
        ))
    return queries


def _retrieval_query(category: QueryCategory, text: str, expected: list[int]) -> GroundTruthQuery:
    return GroundTruthQuery(
        query_text=text,
        category=category,
        expected_object_ids=tuple(expected),
        structured=StructuredQuery(category=category, text=text),
    )


def _affordance_queries(scene: SceneGraph, entries: dict[str, LexiconEntry]) -> list[GroundTruthQuery]:
    known = [(node, entries[node.object_tag]) for node in scene.nodes if node.object_tag in entries]
    queries, used = [], set()
    for _, entry in known:
        for affordance in entry.affordances:
            if affordance in used:
                continue
            used.add(affordance)
            expected = [n.id for n, e in known if affordance in e.affordances]
            queries.append(_retrieval_query(
                QueryCategory.AFFORDANCE, f"Something that can be used to {affordance}", expected,
            ))
    return queries


def _negation_queries(scene: SceneGraph, entries: dict[str, LexiconEntry]) -> list[GroundTruthQuery]:
    known = [(node, entries[node.object_tag]) for node in scene.nodes if node.object_tag in entries]
    properties = sorted({p for _, e in known for p in e.properties}, key=lambda p: (p != "opaque", p))
    queries = []
    for prop in properties:
        lacking = [n.id for n, e in known if prop not in e.properties]
        if lacking and len(lacking) < len(known):
            queries.append(_retrieval_query(QueryCategory.NEGATION, f"Something that is not {prop}", lacking))
    return queries


def generate_queries(
    generated: GeneratedScene,
    lexicon: list[LexiconEntry] | None = None,
    max_per_category: int = 2,
) -> list[GroundTruthQuery]:
    """
    Templated queries for every category the scene supports. Affordance and
    negation answers come from the lexicon annotations; geometric and
    spatial answers come from the planted facts. Predicate queries
    alternate a true pair with its swapped, false counterpart.
    """
    scene = generated.scene
    entries = {entry.tag: entry for entry in (lexicon or load_lexicon())}
    by_kind = {kind: [f for f in generated.facts if f.kind == kind] for kind in FactKind}

    groups = [
        _affordance_queries(scene, entries),
        _negation_queries(scene, entries),
        _size_queries(scene, by_kind[FactKind.CONTAINS]),
        _containment_queries(scene, by_kind[FactKind.CONTAINS]),
        _on_top_of_queries(scene, by_kind[FactKind.ON_TOP_OF]),
        _relative_queries(scene, by_kind[FactKind.RELATIVE]),
    ]
    return [query for group in groups for query in group[:max_per_category]]
