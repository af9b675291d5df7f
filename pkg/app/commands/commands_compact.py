import click

from app.commands.command_helpers import CliState, emit, fail
from app.core.exceptions import SceneGptError
from app.services.prompt_service import ExampleLibrary, build_prompt, load_template
from app.services.query_interpretation_service import detect_category
from app.services.scene_service import SerializeOptions, load_scene_file


@click.command("compact")
@click.argument("scene_path", type=click.Path(dir_okay=False))
@click.option("--budget", type=click.IntRange(min=1), default=None, help="Prompt token budget.")
@click.option("--query", default="", help="Query whose mentioned objects must survive pruning.")
@click.pass_context
def compact_command(ctx: click.Context, scene_path: str, budget: int | None, query: str):
    """
    Show how a scene's prompt would be compacted to fit a token budget.
    """
    state = ctx.find_object(CliState)
    config = state.with_budget(budget)

    try:
        scene = load_scene_file(scene_path)
        examples = ExampleLibrary.default(config.examples_path).select_examples(detect_category(query))
        bundle = build_prompt(
            scene,
            query,
            examples,
            budget=config.token_budget,
            template=load_template(config.template_path),
            opts=SerializeOptions(precision=config.precision),
        )
    except (SceneGptError, OSError) as e:
        fail(ctx, e)

    lines = [
        f"budget: {config.token_budget} tokens",
        f"before: {bundle.original_estimate} tokens, {len(scene)} nodes",
        f"after: {bundle.token_estimate} tokens, {len(bundle.included_node_ids)} nodes",
    ]
    if bundle.compaction_report:
        lines.append("actions:")
        for action in bundle.compaction_report:
            line = f"  {action.kind.value}: {action.tokens_before} -> {action.tokens_after}"
            if action.pruned_ids:
                line += f" (pruned ids: {', '.join(str(i) for i in action.pruned_ids)})"
            lines.append(line)
    else:
        lines.append("actions: none (prompt fits)")

    emit(
        state,
        {
            "budget": config.token_budget,
            "before": bundle.original_estimate,
            "after": bundle.token_estimate,
            "nodes_before": len(scene),
            "nodes_after": len(bundle.included_node_ids),
            "actions": [action.model_dump(mode="json") for action in bundle.compaction_report],
        },
        "\n".join(lines),
    )
