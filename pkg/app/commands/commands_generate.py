import click

from app.commands.command_helpers import CliState, emit, fail
from app.core.exceptions import SceneGptError
from app.models.evaluation import Layout, SceneRecipe
from app.services.scene_generation_service import generate_scene, load_lexicon
from app.services.scene_service import SerializeOptions, save_scene_file


@click.command("generate")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--nodes", "node_count", type=click.IntRange(min=1), default=12, show_default=True)
@click.option(
    "--layout",
    type=click.Choice([layout.value for layout in Layout]),
    default=Layout.MIXED.value,
    show_default=True,
)
@click.option(
    "--captions",
    "caption_length",
    type=click.IntRange(min=0),
    default=0,
    help="Minimum caption length in characters.",
)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def generate_command(
    ctx: click.Context,
    seed: int,
    node_count: int,
    layout: str,
    caption_length: int,
    out: str,
):
    """
    Write a synthetic scene with planted spatial relations.
    """
    state = ctx.find_object(CliState)
    recipe = SceneRecipe(seed=seed, node_count=node_count, layout=Layout(layout), caption_length=caption_length)
    try:
        generated = generate_scene(recipe, load_lexicon(state.config.lexicon_path))
        save_scene_file(generated.scene, out, SerializeOptions(precision=None, indent=2))
    except (SceneGptError, OSError) as e:
        fail(ctx, e)

    emit(
        state,
        {
            "path": out,
            "nodes": len(generated.scene),
            "facts": [fact.model_dump(mode="json") for fact in generated.facts],
        },
        f"Wrote {len(generated.scene)} nodes ({len(generated.facts)} planted facts) to {out}",
    )
