"""
Deterministic geometric reasoning over axis-aligned boxes.

The scalar predicates and the vectorised edge derivation evaluate the same
floating-point expressions in the same order, so their results are
identical bit for bit.
"""
import math

import numpy as np

from app.core.config import OracleConfig
from app.core.exceptions import OracleContractError
from app.core.logger import get_logger
from app.models.query import (
    AnswerStatus,
    OracleAnswer,
    QueryCategory,
    RelativePosition,
    SizeComparison,
    SizeOrdering,
    StructuredQuery,
)
from app.models.scene_graph import (
    DIRECTIONAL_RELATIONS,
    Edge,
    ObjectNode,
    SceneGraph,
    SpatialRelation,
    Vec3,
)

logger = get_logger(__name__)

DEFAULT_ORACLE_CONFIG = OracleConfig()

_RELATION_ORDER = {relation: i for i, relation in enumerate(SpatialRelation)}


def _bounds(node: ObjectNode) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    c, e = node.bbox_center, node.bbox_extent
    lo = (c.x - e.x / 2, c.y - e.y / 2, c.z - e.z / 2)
    hi = (c.x + e.x / 2, c.y + e.y / 2, c.z + e.z / 2)
    return lo, hi


def _squared_distance(a: ObjectNode, b: ObjectNode) -> float:
    dx = a.bbox_center.x - b.bbox_center.x
    dy = a.bbox_center.y - b.bbox_center.y
    dz = a.bbox_center.z - b.bbox_center.z
    return dx * dx + dy * dy + dz * dz


def _footprints_overlap(a: ObjectNode, b: ObjectNode) -> bool:
    a_lo, a_hi = _bounds(a)
    b_lo, b_hi = _bounds(b)
    return all(a_lo[i] <= b_hi[i] and b_lo[i] <= a_hi[i] for i in (0, 1))


def _boxes_overlap(a: ObjectNode, b: ObjectNode) -> bool:
    a_lo, a_hi = _bounds(a)
    b_lo, b_hi = _bounds(b)
    return all(a_lo[i] <= b_hi[i] and b_lo[i] <= a_hi[i] for i in (0, 1, 2))


def sort_relations(relations) -> tuple[SpatialRelation, ...]:
    return tuple(sorted(set(relations), key=_RELATION_ORDER.__getitem__))


def near(a: ObjectNode, b: ObjectNode, cfg: OracleConfig = DEFAULT_ORACLE_CONFIG) -> bool:
    """True iff the Euclidean distance between the centers is <= near_threshold."""
    return _squared_distance(a, b) <= cfg.near_threshold * cfg.near_threshold


def relative_position(
    a: ObjectNode,
    b: ObjectNode,
    cfg: OracleConfig = DEFAULT_ORACLE_CONFIG,
) -> RelativePosition:
    """
    Looks at the offset of a from b separately along x, y and z.
    """
    dx = a.bbox_center.x - b.bbox_center.x
    dy = a.bbox_center.y - b.bbox_center.y
    dz = a.bbox_center.z - b.bbox_center.z

    relations = []
    if dx > 0:
        relations.append(SpatialRelation.POSITIVE_X)
    elif dx < 0:
        relations.append(SpatialRelation.NEGATIVE_X)
    if dy > 0:
        relations.append(SpatialRelation.POSITIVE_Y)
    elif dy < 0:
        relations.append(SpatialRelation.NEGATIVE_Y)
    if dz > 0:
        relations.append(SpatialRelation.ABOVE)
    elif dz < 0:
        relations.append(SpatialRelation.BELOW)

    is_near = near(a, b, cfg)
    if is_near:
        relations.append(SpatialRelation.NEAR)
    if _boxes_overlap(a, b):
        relations.append(SpatialRelation.OVERLAPPING)

    return RelativePosition(
        delta=Vec3(x=dx, y=dy, z=dz),
        distance=math.sqrt(_squared_distance(a, b)),
        relations=sort_relations(relations),
        near=is_near,
    )


def on_top_of(a: ObjectNode, b: ObjectNode, cfg: OracleConfig = DEFAULT_ORACLE_CONFIG) -> bool:
    """
    a rests on b: xy footprints intersect, a is higher, and the bottom of a
    is within vertical_gap_tolerance of the top of b.
    """
    if a.id == b.id:
        raise OracleContractError(f"on_top_of needs two distinct objects, got id {a.id} twice")

    a_lo, _ = _bounds(a)
    _, b_hi = _bounds(b)
    return (
        _footprints_overlap(a, b)
        and a.bbox_center.z > b.bbox_center.z
        and abs(a_lo[2] - b_hi[2]) <= cfg.vertical_gap_tolerance
    )


def size_compare(
    a: ObjectNode,
    b: ObjectNode,
    cfg: OracleConfig = DEFAULT_ORACLE_CONFIG,
) -> SizeComparison:
    volume_a, volume_b = a.volume, b.volume

    if 0 < volume_a < math.inf and 0 < volume_b < math.inf:
        if max(volume_a, volume_b) / min(volume_a, volume_b) <= cfg.similar_volume_ratio:
            ordering = SizeOrdering.SIMILAR
        elif volume_a > volume_b:
            ordering = SizeOrdering.BIGGER
        else:
            ordering = SizeOrdering.SMALLER
        return SizeComparison(ordering=ordering, ratio=volume_a / volume_b)

    # flat, empty or overflowing boxes: compare side lengths from largest to smallest
    ranked_a = sorted(a.bbox_extent.as_list(), reverse=True)
    ranked_b = sorted(b.bbox_extent.as_list(), reverse=True)
    if ranked_a > ranked_b:
        ordering = SizeOrdering.BIGGER
    elif ranked_a < ranked_b:
        ordering = SizeOrdering.SMALLER
    else:
        ordering = SizeOrdering.SIMILAR
    return SizeComparison(ordering=ordering, ratio=None)


def can_contain(outer: ObjectNode, inner: ObjectNode) -> bool:
    """
    Strict dominance of sorted extents; the inner box may be turned by an
    axis permutation but not by an arbitrary rotation.
    """
    outer_sides = sorted(outer.bbox_extent.as_list())
    inner_sides = sorted(inner.bbox_extent.as_list())
    return all(i < o for i, o in zip(inner_sides, outer_sides))


def derive_edges(scene: SceneGraph, cfg: OracleConfig = DEFAULT_ORACLE_CONFIG) -> list[Edge]:
    """
    OnTopOf and Near edges for every ordered pair of distinct nodes,
    ordered by (subject id, relation, object id).
    """
    if len(scene) < 2:
        return []

    ids = [node.id for node in scene.nodes]
    centers = np.array([node.bbox_center.as_list() for node in scene.nodes], dtype=float)
    extents = np.array([node.bbox_extent.as_list() for node in scene.nodes], dtype=float)
    lows = centers - extents / 2
    highs = centers + extents / 2

    # axis 0 is the subject, axis 1 the object
    footprint = np.ones((len(ids), len(ids)), dtype=bool)
    for axis in (0, 1):
        footprint &= lows[:, None, axis] <= highs[None, :, axis]
        footprint &= lows[None, :, axis] <= highs[:, None, axis]

    higher = centers[:, None, 2] > centers[None, :, 2]
    resting = np.abs(lows[:, None, 2] - highs[None, :, 2]) <= cfg.vertical_gap_tolerance
    stacked = footprint & higher & resting

    d = centers[:, None, :] - centers[None, :, :]
    squared = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]
    close = squared <= cfg.near_threshold * cfg.near_threshold

    np.fill_diagonal(stacked, False)
    np.fill_diagonal(close, False)

    edges = [Edge(ids[i], SpatialRelation.ON_TOP_OF, ids[j]) for i, j in np.argwhere(stacked)]
    edges += [Edge(ids[i], SpatialRelation.NEAR, ids[j]) for i, j in np.argwhere(close)]
    edges.sort(key=Edge.sort_key)

    logger.debug("Derived %d edges over %d nodes", len(edges), len(ids))
    return edges


def _vec(v: Vec3) -> list[float]:
    return v.as_list()


def _answer_on_top_of(a: ObjectNode, b: ObjectNode, q: StructuredQuery, cfg: OracleConfig) -> OracleAnswer:
    verdict = on_top_of(a, b, cfg)
    a_lo, _ = _bounds(a)
    _, b_hi = _bounds(b)
    gap = a_lo[2] - b_hi[2]
    relation = "is on top of" if verdict else "is not on top of"
    return OracleAnswer(
        query=q,
        verdict=verdict,
        answer_object_id=a.id,
        answer_object_tag=a.object_tag,
        evidence={
            "subject_center": _vec(a.bbox_center),
            "object_center": _vec(b.bbox_center),
            "footprints_overlap": _footprints_overlap(a, b),
            "vertical_gap": gap,
        },
        summary=f"The {a.label()} {relation} the {b.label()}.",
    )


def _answer_size_compare(a: ObjectNode, b: ObjectNode, q: StructuredQuery, cfg: OracleConfig) -> OracleAnswer:
    comparison = size_compare(a, b, cfg)
    bigger = b if comparison.ordering == SizeOrdering.SMALLER else a
    smaller = a if bigger is b else b
    if comparison.ordering == SizeOrdering.SIMILAR:
        summary = f"The {a.label()} and the {b.label()} are of similar size."
    else:
        summary = f"The {bigger.label()} is bigger than the {smaller.label()}."
    return OracleAnswer(
        query=q,
        ordering=comparison.ordering,
        answer_object_id=bigger.id,
        answer_object_tag=bigger.object_tag,
        evidence={
            "subject_extent": _vec(a.bbox_extent),
            "object_extent": _vec(b.bbox_extent),
            "subject_volume": a.volume,
            "object_volume": b.volume,
            "volume_ratio": comparison.ratio,
        },
        summary=summary,
    )


def _answer_containment(a: ObjectNode, b: ObjectNode, q: StructuredQuery, cfg: OracleConfig) -> OracleAnswer:
    verdict = can_contain(a, b)
    relation = "can contain" if verdict else "cannot contain"
    return OracleAnswer(
        query=q,
        verdict=verdict,
        answer_object_id=a.id,
        answer_object_tag=a.object_tag,
        evidence={
            "subject_sorted_extent": sorted(_vec(a.bbox_extent)),
            "object_sorted_extent": sorted(_vec(b.bbox_extent)),
        },
        summary=f"The {a.label()} {relation} the {b.label()}.",
    )


def _answer_relative_position(a: ObjectNode, b: ObjectNode, q: StructuredQuery, cfg: OracleConfig) -> OracleAnswer:
    position = relative_position(a, b, cfg)
    directional = tuple(r for r in position.relations if r in DIRECTIONAL_RELATIONS)
    names = ", ".join(r.value for r in directional) or "the same position"
    closeness = "close by" if position.near else "apart"
    return OracleAnswer(
        query=q,
        relations=directional,
        answer_object_id=a.id,
        answer_object_tag=a.object_tag,
        evidence={
            "subject_center": _vec(a.bbox_center),
            "object_center": _vec(b.bbox_center),
            "delta": _vec(position.delta),
            "distance": position.distance,
            "near": position.near,
        },
        summary=f"Relative to the {b.label()}, the {a.label()} is {names}; the objects are {closeness}.",
    )


_DISPATCH = {
    QueryCategory.ON_TOP_OF: _answer_on_top_of,
    QueryCategory.SIZE_COMPARE: _answer_size_compare,
    QueryCategory.CONTAINMENT: _answer_containment,
    QueryCategory.RELATIVE_POSITION: _answer_relative_position,
}


def answer_query_deterministic(
    scene: SceneGraph,
    q: StructuredQuery,
    cfg: OracleConfig = DEFAULT_ORACLE_CONFIG,
) -> OracleAnswer:
    """
    Routes a structured query to the geometric predicates. Categories that
    need world knowledge come back with UNSUPPORTED_CATEGORY status.
    """
    handler = _DISPATCH.get(q.category)
    if handler is None:
        return OracleAnswer(
            query=q,
            status=AnswerStatus.UNSUPPORTED_CATEGORY,
            summary="requires world knowledge",
        )

    if q.subject_id is None or q.object_id is None:
        raise OracleContractError(f"{q.category.value} query needs two object ids")

    a = scene.node(q.subject_id)
    b = scene.node(q.object_id)
    if a.id == b.id:
        raise OracleContractError(f"{q.category.value} query compares object {a.id} with itself")

    answer = handler(a, b, q, cfg)
    logger.debug("Oracle answered %s: %s", q.category.value, answer.summary)
    return answer
