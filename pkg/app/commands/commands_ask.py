import click

from app.commands.command_helpers import (
    CliState,
    backend_option,
    emit,
    fail,
    make_client,
    mock_script_option,
    render_result,
    result_payload,
)
from app.core.constants import EXIT_INVALID, EXIT_OK
from app.core.exceptions import SceneGptError
from app.services.pipeline_service import QueryPipeline
from app.services.scene_service import load_scene_file


@click.command("ask")
@click.argument("scene_path", type=click.Path(dir_okay=False))
@click.argument("query")
@backend_option()
@mock_script_option()
@click.option("--budget", type=click.IntRange(min=1), default=None, help="Prompt token budget.")
@click.pass_context
def ask_command(
    ctx: click.Context,
    scene_path: str,
    query: str,
    backend: str,
    mock_script: str | None,
    budget: int | None,
):
    """
    Answer one question about a scene and check that the answer is grounded.
    """
    state = ctx.find_object(CliState)
    config = state.with_budget(budget)

    client = None
    try:
        scene = load_scene_file(scene_path)
        client = make_client(config, backend, mock_script)
        result = QueryPipeline(scene, client, config).ask(query)
    except (SceneGptError, OSError) as e:
        fail(ctx, e)
    finally:
        if client is not None:
            client.close()

    emit(state, result_payload(result), render_result(result))
    ctx.exit(EXIT_OK if result.grounded else EXIT_INVALID)
