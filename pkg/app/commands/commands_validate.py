import click

from app.commands.command_helpers import CliState, emit, fail
from app.core.constants import EXIT_INVALID, EXIT_OK
from app.core.exceptions import SceneParseError
from app.services.scene_service import decode_scene_text, find_scene_issues


def _plural(count: int, word: str) -> str:
    return f"{count} {word}" if count == 1 else f"{count} {word}s"


@click.command("validate")
@click.argument("scene_path", type=click.Path(dir_okay=False))
@click.pass_context
def validate_command(ctx: click.Context, scene_path: str):
    """
    Check a scene file and list every problem found.
    """
    state = ctx.find_object(CliState)
    try:
        with open(scene_path, "rb") as f:
            raw = f.read()
    except OSError as e:
        fail(ctx, e)

    try:
        data = decode_scene_text(raw)
    except SceneParseError as e:
        data, issues = None, list(e.issues)
    else:
        _, issues = find_scene_issues(data)

    count = len(data) if isinstance(data, list) else 0
    text = "\n".join(
        [f"{_plural(count, 'node')}, {_plural(len(issues), 'issue')}"]
        + [f"  - {issue.describe()}" for issue in issues]
    )
    emit(
        state,
        {
            "path": scene_path,
            "nodes": count,
            "valid": not issues,
            "issues": [issue.model_dump() for issue in issues],
        },
        text,
    )
    ctx.exit(EXIT_OK if not issues else EXIT_INVALID)
