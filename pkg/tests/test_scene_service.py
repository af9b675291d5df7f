import json

import pytest

from app.core.exceptions import SceneParseError, UnknownObjectError
from app.models.scene_graph import Edge, SceneGraph, SpatialRelation
from app.services.scene_service import (
    SerializeOptions,
    aabb_of,
    find_scene_issues,
    load_scene_file,
    parse_scene,
    save_scene_file,
    serialize_scene,
)


def _node(**overrides) -> dict:
    node = {"id": 0, "bbox_extent": [1.0, 1.0, 1.0], "bbox_center": [0.0, 0.0, 0.0], "object_tag": "box"}
    node.update(overrides)
    return node


def test_listing_scene_fields(listing1_scene):
    assert listing1_scene.ids == [0, 5]

    vase = listing1_scene.node(0)
    assert vase.bbox_extent.as_list() == [0.7, 0.6, 0.4]
    assert vase.bbox_center.as_list() == [-4.2, -2.0, 0.1]
    assert vase.object_tag == "vase"
    assert vase.color == "silver"
    assert vase.material == "metal/silver"
    assert vase.caption.startswith("The central object in this image is a vase")

    mirror = listing1_scene.node(5)
    assert mirror.bbox_extent.as_list() == [0.9, 0.7, 0.2]
    assert mirror.bbox_center.as_list() == [-4.5, -1.6, 0.1]
    assert (mirror.object_tag, mirror.color, mirror.material) == ("mirror", "brown", "wood")


def test_serialize_then_parse_is_field_exact(listing1_scene):
    assert parse_scene(serialize_scene(listing1_scene)) == listing1_scene


def test_serialized_keys_follow_listing_order(listing1_scene):
    records = json.loads(serialize_scene(listing1_scene))
    assert list(records[0]) == [
        "id", "bbox_extent", "bbox_center", "object_tag", "caption", "color", "material",
    ]


def test_empty_scene():
    scene = parse_scene("[]")
    assert len(scene) == 0
    assert serialize_scene(scene) == "[]"


def test_duplicate_ids_name_the_id(data_dir):
    with pytest.raises(SceneParseError) as e:
        load_scene_file(data_dir / "duplicate_ids_scene.json")
    assert "duplicate id 3" in str(e.value)
    assert e.value.issues[0].node_index == 1
    assert e.value.issues[0].field == "id"


def test_every_issue_is_reported_with_index_and_field():
    text = json.dumps([
        _node(id=0, bbox_center=[0.0, 0.0]),
        {"id": 1, "bbox_extent": [1, 1, 1], "bbox_center": [0, 0, 0]},
        _node(id=2, bbox_extent=[1.0, -0.5, 1.0]),
    ])
    with pytest.raises(SceneParseError) as e:
        parse_scene(text)

    located = {(issue.node_index, issue.field) for issue in e.value.issues}
    assert located == {(0, "bbox_center"), (1, "object_tag"), (2, "bbox_extent")}


def test_non_finite_number_is_rejected():
    text = '[{"id": 0, "bbox_extent": [NaN, 1, 1], "bbox_center": [0, 0, 0], "object_tag": "box"}]'
    with pytest.raises(SceneParseError) as e:
        parse_scene(text)
    assert e.value.issues[0].field == "bbox_extent"


def test_malformed_json():
    with pytest.raises(SceneParseError) as e:
        parse_scene('[{"id": 0,')
    assert "malformed JSON" in str(e.value)


def test_top_level_must_be_array():
    _, issues = find_scene_issues({"id": 0})
    assert issues[0].message == "top-level value must be a JSON array"


def test_optional_fields_default_to_empty():
    node = parse_scene(json.dumps([_node()])).node(0)
    assert (node.caption, node.color, node.material) == ("", "", "")


def test_omitted_caption_reparses_as_empty(listing1_scene):
    text = serialize_scene(listing1_scene, SerializeOptions(omit_fields=frozenset({"caption"})))
    assert all("caption" not in record for record in json.loads(text))
    assert all(node.caption == "" for node in parse_scene(text).nodes)


def test_required_fields_cannot_be_omitted():
    with pytest.raises(ValueError):
        SerializeOptions(omit_fields=frozenset({"bbox_center"}))


def test_precision_rounds_numbers():
    scene = parse_scene(json.dumps([_node(bbox_center=[1.234, -0.04, 2.0])]))
    record = json.loads(serialize_scene(scene))[0]
    assert record["bbox_center"] == [1.2, 0.0, 2.0]


def test_unknown_keys_are_kept():
    scene = parse_scene(json.dumps([_node(confidence=0.9)]))
    assert scene.node(0).extras == {"confidence": 0.9}
    assert json.loads(serialize_scene(scene))[0]["confidence"] == 0.9


def test_unknown_id_lookup(listing1_scene):
    with pytest.raises(UnknownObjectError):
        listing1_scene.node(42)


def test_aabb(listing1_scene):
    box = aabb_of(listing1_scene.node(0))
    assert box.min.as_list() == pytest.approx([-4.55, -2.3, -0.1])
    assert box.max.as_list() == pytest.approx([-3.85, -1.7, 0.3])


def test_save_and_load(tmp_path, listing1_scene):
    path = tmp_path / "out" / "scene.json"
    save_scene_file(listing1_scene, path)
    assert load_scene_file(path) == listing1_scene


def test_edges_must_reference_nodes(listing1_scene):
    with pytest.raises(ValueError):
        SceneGraph(nodes=listing1_scene.nodes, edges=(Edge(0, SpatialRelation.NEAR, 9),))


@pytest.mark.parametrize("extra, key", [
    ('"confidence": NaN', "confidence"),
    ('"scores": [0.5, Infinity]', "scores"),
    ('"meta": {"w": -Infinity}', "meta"),
])
def test_non_finite_extra_values_are_rejected(extra, key):
    text = '[{"id": 0, "bbox_extent": [1, 1, 1], "bbox_center": [0, 0, 0], "object_tag": "box", ' + extra + "}]"
    with pytest.raises(SceneParseError) as e:
        parse_scene(text)
    issue = e.value.issues[0]
    assert (issue.node_index, issue.field) == (0, key)
    assert "non-finite" in issue.message


def test_with_edges_attaches_known_edges(listing1_scene):
    edge = Edge(0, SpatialRelation.NEAR, 5)
    scene = listing1_scene.with_edges([edge])
    assert scene.edges == (edge,)
    assert scene.nodes == listing1_scene.nodes
    with pytest.raises(ValueError):
        listing1_scene.with_edges([Edge(0, SpatialRelation.NEAR, 9)])
