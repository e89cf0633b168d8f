import logging

import click
from pydantic import ValidationError

from app.errors import PalosError

__version__ = "1.0.0"


class PalosGroup(click.Group):
    """Maps domain failures to exit codes: 1 I/O, 2 validation, 3 numerical."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except PalosError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(exc.exit_code)
        except ValidationError as exc:
            click.echo(f"Error: invalid configuration: {exc}", err=True)
            ctx.exit(2)
        except OSError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(1)


def create_cli() -> click.Group:
    @click.group(cls=PalosGroup, context_settings={"help_option_names": ["-h", "--help"]})
    @click.version_option(__version__, prog_name="palosi")
    @click.option("--log-level", default=None, help="Logging level (default from PALOSI_LOG_LEVEL).")
    def cli(log_level):
        """PaLOS index quality control for multichannel EEG."""
        from app.config import get_settings

        level = (log_level or get_settings().log_level).upper()
        logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    # Commands
    from app.commands import connectivity, degrade, inverse, palosi, qc, simulate, suite

    cli.add_command(qc.command)
    cli.add_command(palosi.command)
    cli.add_command(connectivity.command)
    cli.add_command(simulate.command)
    cli.add_command(degrade.command)
    cli.add_command(inverse.command)
    cli.add_command(suite.group)

    return cli


def main():
    create_cli()(prog_name="palosi")
