import pytest

from conftest import make_node
from app.core.exceptions import BudgetInfeasibleError
from app.models.evaluation import SceneRecipe
from app.models.prompt_bundle import CompactionKind, InContextExample
from app.models.query import QueryCategory
from app.models.scene_graph import SceneGraph
from app.services.prompt_service import (
    ExampleLibrary,
    build_prompt,
    compact_scene,
    estimate_tokens,
    format_examples,
    load_template,
    render_template,
    select_examples,
)
from app.services.scene_generation_service import generate_scene
from app.services.scene_service import SerializeOptions, serialize_scene

ACTION_ORDER = [
    CompactionKind.DROP_CAPTIONS,
    CompactionKind.DROP_ATTRIBUTES,
    CompactionKind.ROUND_NUMERICS,
    CompactionKind.PRUNE_NODES,
]


@pytest.mark.parametrize("text, tokens", [("", 0), ("abcd", 1), ("abcde", 2), ("x" * 4000, 1000)])
def test_estimate_tokens(text, tokens):
    assert estimate_tokens(text) == tokens


def test_template_has_all_placeholders():
    template = load_template()
    for placeholder in ("{scenegraph}", "{examples}", "{input}"):
        assert template.count(placeholder) == 1


def test_builtin_examples_are_always_selected():
    examples = select_examples(QueryCategory.ON_TOP_OF)
    assert [e.category for e in examples] == [QueryCategory.RELATIVE_POSITION, QueryCategory.SIZE_COMPARE]
    assert examples[0].question.startswith("Where is the white couch (id: 28)")


def test_registered_examples_join_their_category_only():
    library = ExampleLibrary.default()
    extra = InContextExample(
        question="Is the cup on the table?", answer="Yes, it rests on it.", category=QueryCategory.ON_TOP_OF,
    )
    library.register(extra)

    assert library.select_examples(QueryCategory.ON_TOP_OF)[-1] == extra
    assert extra not in library.select_examples(QueryCategory.CONTAINMENT)


def test_empty_example_text_is_rejected():
    with pytest.raises(ValueError):
        InContextExample(question=" ", answer="a", category=QueryCategory.FREEFORM)


def test_format_examples():
    example = InContextExample(question="Q?", answer="A.", category=QueryCategory.FREEFORM)
    assert format_examples([example, example]) == 'QUESTION = "Q?"\n\nANSWER = "A."\n\nQUESTION = "Q?"\n\nANSWER = "A."'


def test_render_is_single_pass():
    out = render_template("S:{scenegraph} Q:{input}", "[{input}]", "", "{scenegraph}")
    assert out == "S:[{input}] Q:{scenegraph}"


def test_build_prompt_fills_template(listing1_scene):
    query = "Something that can be used to hold flowers"
    bundle = build_prompt(listing1_scene, query, select_examples(QueryCategory.AFFORDANCE))

    assert serialize_scene(listing1_scene) in bundle.system_text
    assert 'QUESTION = "Where is the white couch (id: 28)' in bundle.system_text
    assert bundle.system_text.rstrip().endswith(f"Question: {query}")
    for placeholder in ("{scenegraph}", "{examples}", "{input}"):
        assert placeholder not in bundle.system_text
    assert bundle.user_text == query
    assert bundle.token_estimate == estimate_tokens(bundle.system_text)
    assert bundle.original_estimate == bundle.token_estimate
    assert bundle.included_node_ids == (0, 5)
    assert not bundle.compacted


def test_build_prompt_is_deterministic(listing1_scene):
    examples = select_examples(QueryCategory.FREEFORM)
    assert build_prompt(listing1_scene, "q", examples) == build_prompt(listing1_scene, "q", examples)


def test_large_scene_is_compacted_under_budget(lexicon):
    scene = generate_scene(SceneRecipe(seed=3, node_count=150, caption_length=300), lexicon).scene
    target = scene.nodes[75]
    query = f"Where is the {target.object_tag} with respect to the door?"

    bundle = build_prompt(scene, query, select_examples(QueryCategory.RELATIVE_POSITION), budget=16000)

    assert bundle.original_estimate > 16000
    assert bundle.token_estimate <= 16000
    assert bundle.compacted
    kinds = [action.kind for action in bundle.compaction_report]
    assert kinds == sorted(kinds, key=ACTION_ORDER.index)
    assert kinds[0] == CompactionKind.DROP_CAPTIONS
    assert target.id in bundle.included_node_ids
    for action in bundle.compaction_report:
        assert action.tokens_after <= action.tokens_before


def _boxes_with_a_vase(count: int = 40, vase_id: int = 17) -> SceneGraph:
    return SceneGraph(nodes=tuple(
        make_node(i, "vase" if i == vase_id else "box", [i * 0.5, 0.0, 0.0], [0.4, 0.4, 0.4])
        for i in range(count)
    ))


def test_pruning_is_minimal_and_keeps_mentioned_nodes():
    scene = _boxes_with_a_vase()
    query = "Where is the vase?"
    overhead = 500
    budget = overhead + 300

    result = compact_scene(scene, query, budget, overhead)

    prune = result.actions[-1]
    assert prune.kind == CompactionKind.PRUNE_NODES
    assert 17 not in prune.pruned_ids
    assert 17 in result.scene.ids
    # equal relevance, so the lowest ids go first
    assert list(prune.pruned_ids) == [i for i in range(40) if i != 17][:len(prune.pruned_ids)]
    assert estimate_tokens(serialize_scene(result.scene, result.options)) <= budget - overhead

    # one node fewer pruned would not fit
    last = prune.pruned_ids[-1]
    nodes = [n for n in scene.nodes if n.id in result.scene.ids or n.id == last]
    assert estimate_tokens(serialize_scene(SceneGraph(nodes=tuple(nodes)), result.options)) > budget - overhead


def test_round_numerics_only_when_finer_precision():
    scene = SceneGraph(nodes=tuple(
        make_node(i, "box", [i * 0.123456, 1.987654, -0.5], [0.4, 0.4, 0.4]) for i in range(30)
    ))
    opts = SerializeOptions(precision=6)
    stripped = SerializeOptions(
        precision=1, omit_fields=frozenset({"caption", "color", "material"}), include_extras=False,
    )
    budget = estimate_tokens(serialize_scene(scene, stripped))

    result = compact_scene(scene, "", budget=budget, template_overhead=0, opts=opts)

    assert [a.kind for a in result.actions] == [
        CompactionKind.DROP_CAPTIONS, CompactionKind.DROP_ATTRIBUTES, CompactionKind.ROUND_NUMERICS,
    ]
    assert result.options.precision == 1
    assert len(result.scene) == 30

    # at the default precision there is nothing to round
    default = compact_scene(scene, "", budget=budget, template_overhead=0)
    assert CompactionKind.ROUND_NUMERICS not in [a.kind for a in default.actions]


def test_infeasible_budget():
    scene = _boxes_with_a_vase()
    with pytest.raises(BudgetInfeasibleError) as e:
        build_prompt(scene, "Where is the vase?", select_examples(QueryCategory.FREEFORM), budget=10)
    assert e.value.overflow > 0
