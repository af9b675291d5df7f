import json
import re
from pathlib import Path

from pydantic import BaseModel, ConfigDict, TypeAdapter

from app.core.constants import (
    CHARS_PER_TOKEN,
    DEFAULT_TOKEN_BUDGET,
    IN_CONTEXT_EXAMPLES_PATH,
    SYSTEM_PROMPT_PATH,
)
from app.core.exceptions import BudgetInfeasibleError
from app.core.logger import get_logger
from app.models.prompt_bundle import (
    CompactionAction,
    CompactionKind,
    InContextExample,
    PromptBundle,
)
from app.models.query import QueryCategory
from app.models.scene_graph import ObjectNode, SceneGraph, Vec3
from app.services.scene_service import SerializeOptions, serialize_scene
from app.utils.helpers import mentions, round_number, words

logger = get_logger(__name__)

_PLACEHOLDER = re.compile(r"\{(scenegraph|examples|input)\}")
_EXAMPLES_ADAPTER = TypeAdapter(list[InContextExample])


def estimate_tokens(text: str) -> int:
    """ceil(characters / 4)"""
    return -(-len(text) // CHARS_PER_TOKEN)


def load_template(path: str | Path | None = None) -> str:
    with open(path or SYSTEM_PROMPT_PATH, "r", encoding="utf-8") as f:
        return f.read()


def load_examples(path: str | Path) -> list[InContextExample]:
    with open(path, "r", encoding="utf-8") as f:
        return _EXAMPLES_ADAPTER.validate_python(json.load(f))


class ExampleLibrary:
    """
    Built-in demonstrations (always included) plus user-registered ones
    that are added for their own category.
    """

    def __init__(self, builtins: list[InContextExample], custom: list[InContextExample] | None = None):
        self.builtins = list(builtins)
        self.custom = list(custom or [])

    @classmethod
    def default(cls, extra_path: str | Path | None = None) -> "ExampleLibrary":
        custom = load_examples(extra_path) if extra_path else []
        return cls(load_examples(IN_CONTEXT_EXAMPLES_PATH), custom)

    def register(self, example: InContextExample) -> None:
        self.custom.append(example)

    def select_examples(self, category: QueryCategory) -> list[InContextExample]:
        return self.builtins + [ex for ex in self.custom if ex.category == category]


def select_examples(category: QueryCategory, library: ExampleLibrary | None = None) -> list[InContextExample]:
    library = library or ExampleLibrary.default()
    return library.select_examples(category)


def format_examples(examples: list[InContextExample]) -> str:
    blocks = [
        f'QUESTION = "{example.question}"\n\nANSWER = "{example.answer}"'
        for example in examples
    ]
    return "\n\n".join(blocks)


def render_template(template: str, scenegraph: str, examples: str, query: str) -> str:
    # single pass, so placeholder text inside the scene or query stays literal
    values = {"scenegraph": scenegraph, "examples": examples, "input": query}
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)


class CompactionResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    scene: SceneGraph
    options: SerializeOptions
    actions: tuple[CompactionAction, ...] = ()


def relevance(node: ObjectNode, query_words: set[str]) -> int:
    """Number of query words found in the node's tag and caption."""
    return len(query_words & words(f"{node.object_tag} {node.caption}"))


def _reduce_node(node: ObjectNode, opts: SerializeOptions) -> ObjectNode:
    def vec(v: Vec3) -> Vec3:
        return Vec3(**{axis: round_number(getattr(v, axis), opts.precision) for axis in "xyz"})

    values = {
        "id": node.id,
        "bbox_extent": vec(node.bbox_extent),
        "bbox_center": vec(node.bbox_center),
        "object_tag": node.object_tag,
        "caption": "" if "caption" in opts.omit_fields else node.caption,
        "color": "" if "color" in opts.omit_fields else node.color,
        "material": "" if "material" in opts.omit_fields else node.material,
    }
    if opts.include_extras:
        values.update(node.extras)
    return ObjectNode(**values)


def compact_scene(
    scene: SceneGraph,
    query: str,
    budget: int,
    template_overhead: int,
    opts: SerializeOptions | None = None,
) -> CompactionResult:
    """
    Shrinks the serialized scene until it fits in budget - template_overhead
    tokens. Reductions run in a fixed order and stop as soon as the scene
    fits: drop captions, drop color/material (and unknown keys), round to
    one decimal, prune the least relevant nodes. Nodes whose tag appears in
    the query are never pruned.
    """
    opts = opts or SerializeOptions()
    available = budget - template_overhead

    def tokens_for(nodes, options) -> int:
        return estimate_tokens(serialize_scene(SceneGraph(nodes=tuple(nodes)), options))

    tokens = tokens_for(scene.nodes, opts)
    if tokens <= available:
        return CompactionResult(scene=scene, options=opts)

    actions: list[CompactionAction] = []

    attribute_steps = []
    if "caption" not in opts.omit_fields:
        attribute_steps.append((
            CompactionKind.DROP_CAPTIONS,
            lambda o: {"omit_fields": o.omit_fields | {"caption"}},
            "captions removed",
        ))
    if not {"color", "material"} <= opts.omit_fields or opts.include_extras:
        attribute_steps.append((
            CompactionKind.DROP_ATTRIBUTES,
            lambda o: {"omit_fields": o.omit_fields | {"color", "material"}, "include_extras": False},
            "color, material and extra keys removed",
        ))
    if opts.precision is None or opts.precision > 1:
        attribute_steps.append((
            CompactionKind.ROUND_NUMERICS,
            lambda o: {"precision": 1},
            "numbers rounded to 1 decimal",
        ))

    for kind, update, detail in attribute_steps:
        if tokens <= available:
            break
        opts = opts.model_copy(update=update(opts))
        after = tokens_for(scene.nodes, opts)
        actions.append(CompactionAction(kind=kind, tokens_before=tokens, tokens_after=after, detail=detail))
        logger.info("Compaction %s: %d -> %d tokens", kind.value, tokens, after)
        tokens = after

    kept = list(scene.nodes)
    if tokens > available:
        query_words = words(query)
        protected = {node.id for node in scene.nodes if mentions(query, node.object_tag)}
        prunable = sorted(
            (node for node in scene.nodes if node.id not in protected),
            key=lambda node: (relevance(node, query_words), node.id),
        )

        def survivors(k: int) -> list[ObjectNode]:
            dropped = {node.id for node in prunable[:k]}
            return [node for node in scene.nodes if node.id not in dropped]

        floor = tokens_for(survivors(len(prunable)), opts)
        if floor > available:
            raise BudgetInfeasibleError(
                overflow=floor - available,
                detail=f"{len(protected)} query-mentioned node(s) do not fit after maximal compaction",
            )

        # smallest number of pruned nodes that fits
        lo, hi = 1, len(prunable)
        while lo < hi:
            mid = (lo + hi) // 2
            if tokens_for(survivors(mid), opts) <= available:
                hi = mid
            else:
                lo = mid + 1

        kept = survivors(lo)
        after = tokens_for(kept, opts)
        pruned = tuple(node.id for node in prunable[:lo])
        actions.append(CompactionAction(
            kind=CompactionKind.PRUNE_NODES,
            tokens_before=tokens,
            tokens_after=after,
            pruned_ids=pruned,
            detail=f"pruned {len(pruned)} of {len(scene)} nodes",
        ))
        logger.info("Compaction prune_nodes: %d -> %d tokens, %d nodes pruned", tokens, after, len(pruned))

    compacted = SceneGraph(nodes=tuple(_reduce_node(node, opts) for node in kept))
    return CompactionResult(scene=compacted, options=opts, actions=tuple(actions))


def build_prompt(
    scene: SceneGraph,
    query: str,
    examples: list[InContextExample],
    budget: int = DEFAULT_TOKEN_BUDGET,
    template: str | None = None,
    opts: SerializeOptions | None = None,
) -> PromptBundle:
    """
    Fills the system prompt template with the scene, the demonstrations and
    the query. Compacts the scene when the full prompt is over budget.
    """
    template = template if template is not None else load_template()
    opts = opts or SerializeOptions()
    examples_text = format_examples(examples)

    scene_text = serialize_scene(scene, opts)
    system_text = render_template(template, scene_text, examples_text, query)
    estimate = original = estimate_tokens(system_text)
    included = tuple(scene.ids)
    report: tuple[CompactionAction, ...] = ()

    if estimate > budget:
        overhead = estimate_tokens(render_template(template, "", examples_text, query))
        result = compact_scene(scene, query, budget, overhead, opts)
        scene_text = serialize_scene(result.scene, result.options)
        system_text = render_template(template, scene_text, examples_text, query)
        estimate = estimate_tokens(system_text)
        included = tuple(result.scene.ids)
        report = result.actions

    logger.info(
        "Built prompt: %d tokens, %d nodes, %d compaction actions",
        estimate, len(included), len(report),
    )
    return PromptBundle(
        system_text=system_text,
        user_text=query,
        token_estimate=estimate,
        original_estimate=original,
        included_node_ids=included,
        compaction_report=report,
    )
