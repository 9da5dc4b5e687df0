"""Command-line interface for stmguard."""

import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import click

from . import __version__
from .engine.checker import Checker, CheckResult
from .engine.config import DEFAULT_CONFIG
from .engine.errors import CheckError, StmError
from .engine.syntax import Program
from .frontend.parser import SourceUnit, load, prepare
from .frontend.report import build_report

USAGE_EXIT = 3

TEMPLATE = """\
-- {name}: a shared counter that must stay positive.

tvar counter :: Int = 1

invariant positive
positive :: Int -> Bool
positive n = n > 0

transaction bump = do {{ n <- readTVar counter; writeTVar counter (n + 1) }}
"""


class StmGroup(click.Group):
    """Routes ``stmguard FILE`` to ``check`` and reports usage errors with exit code 3."""

    def parse_args(self, ctx: click.Context, args: List[str]) -> List[str]:
        for index, arg in enumerate(args):
            if arg in ("-v", "--verbose"):
                continue
            if not arg.startswith("-") and arg not in self.commands:
                args = args[:index] + ["check"] + args[index:]
            break
        return super().parse_args(ctx, args)

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as exc:
            exc.exit_code = USAGE_EXIT
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = USAGE_EXIT
            raise


@click.group(cls=StmGroup)
@click.version_option(version=__version__, prog_name="stmguard")
@click.option("--verbose", "-v", is_flag=True, help="Log pipeline progress to stderr")
def main(verbose: bool):
    """stmguard - static contract checking of STM transactions against transactional invariants."""
    if verbose:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _compile(path: Path) -> Tuple[SourceUnit, Program]:
    unit = load(path)
    try:
        return unit, prepare(unit.program)
    except StmError as exc:
        raise exc.at(unit.path, unit.text)


def _fail(exc: StmError) -> None:
    click.echo(click.style("[FAIL] ", fg="red") + exc.format_message(), err=True)
    sys.exit(USAGE_EXIT)


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--transaction", "-t", "only", multiple=True, help="Check only this transaction (repeatable)")
@click.option("--fuel", type=click.IntRange(min=0), default=DEFAULT_CONFIG.fuel, show_default=True,
              help="Simplifier rewrite budget per variant")
@click.option("--inline-depth", type=click.IntRange(min=0), default=DEFAULT_CONFIG.inline_depth, show_default=True,
              help="Inlinings of one function along a call chain")
@click.option("--samples", type=click.IntRange(min=0), default=DEFAULT_CONFIG.samples, show_default=True,
              help="Witness-search samples")
@click.option("--seed", type=int, default=DEFAULT_CONFIG.seed, show_default=True, help="Seed for all randomness")
@click.option("--gamma-cap", type=click.IntRange(min=1), default=DEFAULT_CONFIG.gamma_cap, show_default=True,
              help="Maximum orElse variants per transaction")
@click.option("--dump-pure", is_flag=True, help="Print the purified transactions and contracts")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True,
              help="Report format")
@click.option("--no-witness-search", is_flag=True, help="Report Unknown instead of searching for a witness")
@click.option("--strict-modular", is_flag=True, help="Reject calls to functions without contracts")
@click.option("--timings/--no-timings", default=True,
              help="Record per-check milliseconds; pass --no-timings for byte-identical reports across runs")
def check(path: str, only: Sequence[str], fuel: int, inline_depth: int, samples: int, seed: int, gamma_cap: int,
          dump_pure: bool, fmt: str, no_witness_search: bool, strict_modular: bool, timings: bool):
    """Check every transaction against the program invariant.

    Functions that carry a contract are checked modularly as well. Exit code 0 means
    everything is Safe, 1 that a violation was confirmed, 2 that something stayed Unknown.
    """
    config = DEFAULT_CONFIG.with_overrides(
        fuel=fuel, inline_depth=inline_depth, samples=samples, seed=seed, gamma_cap=gamma_cap,
        witness_search=not no_witness_search, strict_modular=strict_modular,
    )
    try:
        unit, program = _compile(Path(path))
        checker = Checker(program, config)
        missing = [n for n in only if n not in program.transactions]
        if missing:
            raise CheckError(f"no transaction named '{missing[0]}'")

        def timed(run, name: str) -> Tuple[CheckResult, float]:
            start = time.perf_counter()
            result = run(name)
            return result, (time.perf_counter() - start) * 1000.0

        transactions = [timed(checker.transaction, n) for n in program.transactions if not only or n in only]
        functions = [] if only else [timed(checker.function, n) for n, f in program.functions.items()
                                     if f.contract is not None]
    except StmError as exc:
        _fail(exc.at(path))
        return

    report = build_report(path, transactions, functions, config, timings=timings, dump_pure=dump_pure)
    if fmt == "json":
        click.echo(report.to_json())
    else:
        report.echo()
    sys.exit(report.exit_code)


@main.command()
@click.argument("path", type=click.Path(exists=True))
def validate(path: str):
    """Parse and type-check programs without verifying them.

    PATH can be a single file or a directory containing .stm files.
    """
    path_obj = Path(path)

    if path_obj.is_file():
        files = [path_obj]
    else:
        files = sorted(path_obj.glob("**/*.stm"))
        if not files:
            click.echo(f"No .stm files found in {path}", err=True)
            sys.exit(USAGE_EXIT)

    failures = 0
    for file_path in files:
        try:
            _, program = _compile(file_path)
        except StmError as exc:
            click.echo(click.style(f"[FAIL] {file_path}", fg="red"))
            click.echo(f"  {exc.format_message()}", err=True)
            failures += 1
            continue
        click.echo(click.style(f"[OK] {file_path}", fg="green"))
        click.echo(f"  {len(program.tvars)} TVar(s), {len(program.functions)} function(s), "
                   f"{len(program.transactions)} transaction(s)")

    if failures:
        click.echo(f"\n{failures} file(s) failed", err=True)
        sys.exit(USAGE_EXIT)
    click.echo(f"\n{len(files)} file(s) validated successfully")
    sys.exit(0)


@main.command()
@click.argument("name")
@click.option("--force", is_flag=True, help="Overwrite an existing file")
def new(name: str, force: bool):
    """Create a new program skeleton.

    NAME is the program name (will create NAME.stm).
    """
    output_path = Path(f"{name}.stm")
    if output_path.exists() and not force:
        click.echo(f"{output_path} already exists (use --force to overwrite)", err=True)
        sys.exit(USAGE_EXIT)
    output_path.write_text(TEMPLATE.format(name=name), encoding="utf-8")
    click.echo(click.style(f"[OK] Created {output_path}", fg="green"))


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code instead of exiting."""
    try:
        code = main.main(args=list(argv) if argv is not None else None, prog_name="stmguard",
                         standalone_mode=False)
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    except click.ClickException as exc:
        exc.show()
        return USAGE_EXIT
    except click.Abort:
        click.echo("Aborted!", err=True)
        return USAGE_EXIT
    return code if isinstance(code, int) else 0


def entry() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    entry()
