import click

from app.commands.command_helpers import CliState, emit, fail
from app.core.exceptions import SceneGptError
from app.services.scene_service import SerializeOptions, load_scene_file, node_to_record
from app.services.spatial_oracle_service import derive_edges


def _vec(values: list[float]) -> str:
    return "[" + ", ".join(f"{v:g}" for v in values) + "]"


@click.command("describe")
@click.argument("scene_path", type=click.Path(dir_okay=False))
@click.option("--relations", is_flag=True, help="Also list derived OnTopOf and Near relations.")
@click.pass_context
def describe_command(ctx: click.Context, scene_path: str, relations: bool):
    """
    Print the objects of a scene, optionally with their spatial relations.
    """
    state = ctx.find_object(CliState)
    try:
        scene = load_scene_file(scene_path)
    except (SceneGptError, OSError) as e:
        fail(ctx, e)

    opts = SerializeOptions(precision=state.config.precision)
    records = [node_to_record(node, opts) for node in scene.nodes]

    lines = [f"{len(scene)} node{'' if len(scene) == 1 else 's'}"]
    for record in records:
        attributes = " ".join(v for v in (record["color"], record["material"]) if v)
        lines.append(
            f"  {record['id']:>4}  {record['object_tag']:<16} center {_vec(record['bbox_center'])}  "
            f"extent {_vec(record['bbox_extent'])}  {attributes}".rstrip()
        )

    payload = {"nodes": records}
    if relations:
        scene = scene.with_edges(derive_edges(scene, state.config.oracle))
        payload["edges"] = [
            {"subject": e.subject_id, "relation": e.relation.value, "object": e.object_id} for e in scene.edges
        ]
        lines.append("Relations:")
        lines.extend(f"  {edge.describe()}" for edge in scene.edges)
        if not scene.edges:
            lines.append("  (none)")

    emit(state, payload, "\n".join(lines))
