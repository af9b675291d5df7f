import re

from app.models.query import QueryCategory, StructuredQuery
from app.models.scene_graph import SceneGraph
from app.utils.helpers import mention_position, mentions

_ID_MARKER = re.compile(r"\(?\s*\bid\s*:?\s*(\d+)\s*\)?", re.IGNORECASE)

# checked in order; the first matching cue decides the category
_CATEGORY_CUES = [
    (QueryCategory.ON_TOP_OF, re.compile(r"\bon top of\b|\bresting on\b", re.IGNORECASE)),
    (QueryCategory.CONTAINMENT, re.compile(
        r"\bcontain(s)?\b|\bfit(s)? (in|inside|into)\b|\baccom+odate\b", re.IGNORECASE)),
    (QueryCategory.SIZE_COMPARE, re.compile(
        r"\b(bigger|larger|smaller|biggest|largest|smallest|size)\b", re.IGNORECASE)),
    (QueryCategory.RELATIVE_POSITION, re.compile(
        r"with respect to|w\.r\.t|relative (position|to)|\bwhere is\b", re.IGNORECASE)),
    (QueryCategory.NEGATION, re.compile(r"\bnot\b|n't\b|\bwithout\b", re.IGNORECASE)),
    (QueryCategory.AFFORDANCE, re.compile(
        r"\bused (to|for)\b|\bcan be used\b|\bsomething (to|for|that can)\b", re.IGNORECASE)),
]

# how far after a tag an "(id: N)" marker may start and still label that tag
_MARKER_REACH = 3


def detect_category(text: str) -> QueryCategory:
    for category, cue in _CATEGORY_CUES:
        if cue.search(text):
            return category
    return QueryCategory.FREEFORM


def _tag_hits(scene: SceneGraph, text: str) -> list[tuple[int, int, int]]:
    """
    (start, end, node id) for objects named by their tag. Longer tags win
    over tags they contain ("coffee table" over "table"); among nodes
    sharing a tag, one whose color is also mentioned is preferred.
    """
    by_tag: dict[str, list] = {}
    for node in scene.nodes:
        by_tag.setdefault(node.object_tag.strip().lower(), []).append(node)

    hits: list[tuple[int, int, int]] = []
    for tag in sorted(by_tag, key=lambda t: (-len(t), t)):
        pos = mention_position(text, tag)
        if pos < 0:
            continue
        end = pos + len(tag)
        if any(pos < h_end and h_pos < end for h_pos, h_end, _ in hits):
            continue
        candidates = by_tag[tag]
        colored = [n for n in candidates if n.color and mentions(text, n.color)]
        hits.append((pos, end, (colored or candidates)[0].id))
    return hits


def resolve_mentions(scene: SceneGraph, text: str) -> list[int]:
    """
    Object ids a query names, in order of appearance. Explicit "(id: N)"
    markers take precedence over the tag they follow.
    """
    markers = [(m.start(), int(m.group(1))) for m in _ID_MARKER.finditer(text)]
    mentioned = list(markers)

    for start, end, object_id in _tag_hits(scene, text):
        labelled = any(end <= m_start <= end + _MARKER_REACH for m_start, _ in markers)
        if not labelled:
            mentioned.append((start, object_id))

    ordered: list[int] = []
    for _, object_id in sorted(mentioned):
        if object_id not in ordered:
            ordered.append(object_id)
    return ordered


def interpret_query(scene: SceneGraph, text: str) -> StructuredQuery:
    """
    Maps a natural-language query onto the query taxonomy and the objects
    it names.
    """
    category = detect_category(text)
    ids = resolve_mentions(scene, text)
    return StructuredQuery(
        category=category,
        subject_id=ids[0] if len(ids) > 0 else None,
        object_id=ids[1] if len(ids) > 1 else None,
        text=text,
    )
