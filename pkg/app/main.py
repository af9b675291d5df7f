import sys

import click

from app.commands.command_helpers import CliState, report_error
from app.commands.commands_ask import ask_command
from app.commands.commands_compact import compact_command
from app.commands.commands_describe import describe_command
from app.commands.commands_eval import eval_command
from app.commands.commands_generate import generate_command
from app.commands.commands_repl import repl_command
from app.commands.commands_validate import validate_command
from app.core.config import load_config
from app.core.constants import EXIT_INVALID
from app.core.exceptions import ConfigError
from app.core.logger import configure_logging

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


class SceneGptGroup(click.Group):
    """
    Click group whose usage errors follow the exit-code table and, under
    --format json, the JSON error shape.
    """

    def wants_json(self, argv: list[str]) -> bool:
        for i, token in enumerate(argv):
            if token in self.commands:
                return False
            if token == "--format=json" or (token == "--format" and argv[i + 1:i + 2] == ["json"]):
                return True
        return False

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode, **extra)

        argv = list(sys.argv[1:] if args is None else args)
        try:
            rv = super().main(argv, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as e:
            if self.wants_json(argv):
                report_error(e, json_output=True)
            else:
                e.show()
            sys.exit(EXIT_INVALID)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


@click.group(cls=SceneGptGroup, context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="JSON config file (default ~/.config/scenegpt/config.json).",
)
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default=None)
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="WARNING",
    show_default=True,
)
@click.option("--strict-parse/--lenient-parse", default=None, help="Reject answers missing any step.")
@click.option("--model", "model_name", default=None, help="Model name sent to the endpoint.")
@click.option("--base-url", default=None, help="Chat-completions base URL.")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: str | None,
    output_format: str | None,
    log_level: str,
    strict_parse: bool | None,
    model_name: str | None,
    base_url: str | None,
):
    """
    Ask spatial questions about 3D scene graphs with a language model, and
    check the answers against the scene.
    """
    configure_logging(log_level)
    overrides = {
        "output_format": output_format,
        "strict_parse": strict_parse,
        "llm": {"model_name": model_name, "base_url": base_url},
    }
    try:
        config = load_config(config_path, overrides=overrides)
    except ConfigError as e:
        ctx.exit(report_error(e, output_format == "json"))
    ctx.obj = CliState(config=config)


cli.add_command(validate_command)
cli.add_command(describe_command)
cli.add_command(ask_command)
cli.add_command(repl_command)
cli.add_command(eval_command)
cli.add_command(compact_command)
cli.add_command(generate_command)


if __name__ == "__main__":
    cli()
