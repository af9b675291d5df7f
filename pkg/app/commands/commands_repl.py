import click

from app.commands.command_helpers import (
    CliState,
    backend_option,
    emit,
    fail,
    make_client,
    mock_script_option,
    render_result,
    report_error,
    result_payload,
)
from app.core.exceptions import SceneGptError
from app.models.scene_graph import SceneGraph
from app.services.llm_service import BackendKind, LlmClient
from app.services.pipeline_service import QueryPipeline
from app.services.prompt_service import ExampleLibrary, load_template
from app.services.scene_service import load_scene_file

QUIT_COMMAND = ":quit"
ORACLE_COMMAND = ":oracle"


class ReplSession:
    """
    One query per line. Every query gets a fresh prompt; no answer is fed
    back into the next one.
    """

    def __init__(self, state: CliState, scene: SceneGraph, backend: str, mock_script: str | None):
        self.state = state
        self.scene = scene
        self.backend = backend
        self.mock_script = mock_script
        self.oracle = backend == BackendKind.ORACLE.value
        self.library = ExampleLibrary.default(state.config.examples_path)
        self.template = load_template(state.config.template_path)
        self._clients: dict[str, LlmClient] = {}

    def client(self) -> LlmClient:
        kind = BackendKind.ORACLE.value if self.oracle else self.backend
        if kind not in self._clients:
            self._clients[kind] = make_client(self.state.config, kind, self.mock_script)
        return self._clients[kind]

    def close(self) -> None:
        for client in self._clients.values():
            client.close()

    def toggle_oracle(self, argument: str) -> None:
        if argument not in ("on", "off"):
            emit(self.state, {"error": "Usage", "message": "use :oracle on|off"}, "usage: :oracle on|off")
            return
        self.oracle = argument == "on"
        emit(self.state, {"oracle": self.oracle}, f"oracle backend {argument}")

    def ask(self, query: str) -> None:
        try:
            pipeline = QueryPipeline(self.scene, self.client(), self.state.config, self.library, self.template)
            result = pipeline.ask(query)
        except (SceneGptError, OSError) as e:
            report_error(e, self.state.json_output)
            return
        emit(self.state, result_payload(result), render_result(result))

    def handle(self, line: str) -> bool:
        """Returns False when the session should end."""
        line = line.strip()
        if not line:
            return True
        if line == QUIT_COMMAND:
            return False
        if line.split()[0] == ORACLE_COMMAND:
            self.toggle_oracle(line[len(ORACLE_COMMAND):].strip().lower())
            return True
        self.ask(line)
        return True


@click.command("repl")
@click.argument("scene_path", type=click.Path(dir_okay=False))
@backend_option()
@mock_script_option()
@click.pass_context
def repl_command(ctx: click.Context, scene_path: str, backend: str, mock_script: str | None):
    """
    Ask questions about a scene interactively. ':quit' exits,
    ':oracle on|off' switches to the geometric backend and back.
    """
    state = ctx.find_object(CliState)
    try:
        scene = load_scene_file(scene_path)
    except (SceneGptError, OSError) as e:
        fail(ctx, e)

    session = ReplSession(state, scene, backend, mock_script)
    stdin = click.get_text_stream("stdin")
    interactive = stdin.isatty()
    try:
        while True:
            if interactive:
                click.echo("scenegpt> ", nl=False, err=True)
            line = stdin.readline()
            if not line or not session.handle(line):
                break
    finally:
        session.close()
