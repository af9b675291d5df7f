from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from app.models.scene_graph import SceneIssue


class SceneGptError(Exception):
    """Base class for every error raised by the engine."""


class SceneParseError(SceneGptError, ValueError):
    def __init__(self, issues: list[SceneIssue]):
        self.issues = issues
        first = issues[0].describe() if issues else "invalid scene"
        more = f" (+{len(issues) - 1} more)" if len(issues) > 1 else ""
        super().__init__(f"{first}{more}")


class OracleContractError(SceneGptError, ValueError):
    pass


class UnknownObjectError(SceneGptError, KeyError):
    def __init__(self, object_id: int):
        self.object_id = object_id
        super().__init__(object_id)

    def __str__(self) -> str:
        return f"Unknown object id: {self.object_id}"


class UnsupportedCategoryError(SceneGptError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(
            f"Category '{category}' requires world knowledge and cannot be "
            "decided geometrically"
        )


class BudgetInfeasibleError(SceneGptError):
    def __init__(self, overflow: int, detail: str = ""):
        self.overflow = overflow
        message = f"Prompt exceeds token budget by {overflow} tokens"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class LlmError(SceneGptError):
    retryable = False


class LlmNetworkError(LlmError):
    retryable = True


class AuthMissingError(LlmError):
    pass


class ContextOverflowError(LlmError):
    pass


class LlmResponseError(LlmError):
    pass


class UnparseableResponseError(SceneGptError, ValueError):
    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


class JsonBlockNotFoundError(SceneGptError, ValueError):
    pass


class ConfigError(SceneGptError, ValueError):
    pass
