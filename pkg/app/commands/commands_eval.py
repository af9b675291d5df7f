import click

from app.commands.command_helpers import CliState, backend_option, emit, fail, make_client, mock_script_option
from app.core.exceptions import SceneGptError
from app.models.evaluation import Layout
from app.models.query import QueryCategory
from app.services.evaluation_service import build_cases, run_eval
from app.services.report_service import render_text_report, report_payload, write_report
from app.services.scene_generation_service import load_lexicon


@click.command("eval")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--scenes", "scene_count", type=click.IntRange(min=0), default=20, show_default=True)
@click.option("--nodes", "node_count", type=click.IntRange(min=1), default=12, show_default=True)
@click.option(
    "--layout",
    type=click.Choice([layout.value for layout in Layout]),
    default=Layout.MIXED.value,
    show_default=True,
)
@click.option(
    "--category",
    "categories",
    type=click.Choice([category.value for category in QueryCategory]),
    multiple=True,
    help="Only evaluate these query categories (repeatable).",
)
@click.option("--max-per-category", type=click.IntRange(min=1), default=2, show_default=True)
@backend_option()
@mock_script_option()
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Report directory.")
@click.option("--pdf", is_flag=True, help="Also write report.pdf.")
@click.pass_context
def eval_command(
    ctx: click.Context,
    seed: int,
    scene_count: int,
    node_count: int,
    layout: str,
    categories: tuple[str, ...],
    max_per_category: int,
    backend: str,
    mock_script: str | None,
    out: str | None,
    pdf: bool,
):
    """
    Score a backend on synthetic scenes with known answers.
    """
    state = ctx.find_object(CliState)
    config = state.config

    client = None
    try:
        cases = build_cases(
            seed,
            scene_count,
            node_count=node_count,
            layout=Layout(layout),
            lexicon=load_lexicon(config.lexicon_path),
            max_per_category=max_per_category,
            categories=[QueryCategory(c) for c in categories] or None,
        )
        client = make_client(config, backend, mock_script)
        report = run_eval(cases, client, config, seed=seed)
        paths = write_report(report, out, pdf=pdf)
    except (SceneGptError, OSError) as e:
        fail(ctx, e)
    finally:
        if client is not None:
            client.close()

    payload = report_payload(report)
    payload.pop("records")
    payload["paths"] = paths
    emit(state, payload, render_text_report(report) + f"Report written to {paths['json_report']}")
