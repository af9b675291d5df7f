import re

_WORD = re.compile(r"[a-z0-9]+")


def words(text: str) -> set[str]:
    """
    Lower-cased alphanumeric tokens of a text.
    """
    return set(_WORD.findall(text.lower()))


def mention_position(text: str, phrase: str) -> int:
    """
    Index of the first case-insensitive, word-bounded occurrence of phrase
    in text, -1 when absent.
    """
    phrase = phrase.strip().lower()
    if not phrase:
        return -1
    pattern = r"(?<![a-z0-9])" + re.escape(phrase) + r"(?![a-z0-9])"
    match = re.search(pattern, text.lower())
    return match.start() if match else -1


def mentions(text: str, phrase: str) -> bool:
    return mention_position(text, phrase) >= 0


def round_number(value: float, precision: int | None) -> float:
    if precision is None:
        return value
    # + 0.0 turns -0.0 into 0.0
    return round(value, precision) + 0.0
