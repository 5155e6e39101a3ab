"""
tsvolterra command line.

Exit codes
- 0: ok
- 1: residual above tolerance, or a self-test check failed
- 2: problem / candidate file could not be parsed or validated
- 3: any other library error (NotRegressive, ZeroDiagonal, MaxIterations, ...)
     or an output file that cannot be written
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import click

from src.cli.loader import load_problem, read_candidate
from src.cli.reports import render_resolvent_csv, write_reports
from src.config.config import configure_logging
from src.config.settings import get_settings
from src.errors import ExprError, InvalidProblem, ProblemFileError, VolterraError
from src.pipeline.runner import (
    candidate_components,
    candidate_grid,
    passes,
    run_problem,
    verify_candidate,
)
from src.volterra2.kernels import resolvent

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3

METHOD_CHOICE = click.Choice(["direct", "neumann", "picard", "resolvent"])


def exit_code_for(exc: VolterraError) -> int:
    if isinstance(exc, (ExprError, ProblemFileError)):
        return EXIT_PARSE
    return EXIT_SOLVER


def _overrides(tol, max_terms, max_iter) -> dict:
    return {"tol": tol, "max_terms": max_terms, "max_iter": max_iter}


@click.group()
@click.option(
    "--log-level",
    default=None,
    help="Root log level (default: TSV_LOG_LEVEL or WARNING).",
)
def cli(log_level: Optional[str]) -> None:
    """Volterra integral equations on finite time scales."""
    configure_logging(log_level or get_settings().log_level)


# ---------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------


def _out_prefix(path: str, out: Optional[str], many: bool) -> Path:
    stem = Path(path).stem
    if out is None:
        return Path(stem)
    return Path(f"{out}-{stem}") if many else Path(out)


def _solve_file(path: str, methods: tuple[str, ...], out: Path, overrides: dict) -> tuple[int, str]:
    try:
        loaded = load_problem(path, **overrides)
        result = run_problem(loaded, methods or None)
    except VolterraError as exc:
        return exit_code_for(exc), f"{path}: error: {exc}"
    try:
        csv_path, json_path = write_reports(result, out)
    except OSError as exc:
        logger.error("TSV_REPORT_WRITE_FAILED source=%s out=%s error=%s", path, out, exc)
        return EXIT_SOLVER, f"{path}: error: cannot write reports to {out}: {exc}"
    tol = loaded.options.tol
    failed = [name for name, rep in result.reports.items() if not passes(rep, tol)]
    lines = [
        f"{path}: {name} residual={rep.residual:.3e} terms_or_iterations={rep.terms_or_iterations}"
        for name, rep in result.reports.items()
    ]
    lines += [f"{path}: agreement {pair} = {delta:.3e}" for pair, delta in result.agreement.items()]
    lines.append(f"{path}: wrote {csv_path} {json_path}")
    if failed:
        lines.append(f"{path}: residual above tol={tol!r} for {', '.join(failed)}")
        return EXIT_RESIDUAL, "\n".join(lines)
    return EXIT_OK, "\n".join(lines)


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--method", "methods", multiple=True, type=METHOD_CHOICE, help="Repeatable; overrides the file.")
@click.option("--tol", type=float, default=None)
@click.option("--max-terms", type=int, default=None)
@click.option("--max-iter", type=int, default=None)
@click.option("--out", default=None, help="Output prefix for <out>.csv and <out>.json.")
@click.option("--jobs", type=int, default=1, show_default=True)
def solve(paths, methods, tol, max_terms, max_iter, out, jobs) -> None:
    """Solve one or more problem files and write CSV/JSON reports."""
    many = len(paths) > 1
    overrides = _overrides(tol, max_terms, max_iter)
    work = [(p, tuple(methods), _out_prefix(p, out, many), overrides) for p in paths]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(lambda args: _solve_file(*args), work))
    for _, message in outcomes:
        click.echo(message)
    raise SystemExit(max(code for code, _ in outcomes))


# ---------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------


@cli.command()
@click.argument("path", type=click.Path(dir_okay=False))
@click.argument("candidate", type=click.Path(dir_okay=False))
@click.option("--tol", type=float, default=None)
def verify(path, candidate, tol) -> None:
    """Check a candidate solution CSV against a problem file."""
    try:
        loaded = load_problem(path, tol=tol)
        grid = candidate_grid(loaded)
        values = read_candidate(candidate, grid.points, candidate_components(loaded))
        result = verify_candidate(loaded, values)
    except VolterraError as exc:
        click.echo(f"{path}: error: {exc}", err=True)
        raise SystemExit(exit_code_for(exc))
    where = f"t={result.worst_t!r}"
    if candidate_components(loaded) > 1:
        where += f" component={result.worst_component}"
    click.echo(f"max residual {result.max_residual!r} at {where}")
    tol_used = loaded.options.tol
    if result.passed(tol_used):
        click.echo(f"PASS tol={tol_used!r}")
        raise SystemExit(EXIT_OK)
    click.echo(f"FAIL tol={tol_used!r}")
    raise SystemExit(EXIT_RESIDUAL)


# ---------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------


@cli.command("resolvent")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="CSV path (default: stdout).")
def resolvent_command(path, out) -> None:
    """Dump the resolvent table Γ(λ;t,s) of a second-kind problem as CSV."""
    try:
        loaded = load_problem(path)
        if loaded.kind not in ("second", "convolution"):
            raise InvalidProblem(f"resolvent needs a second-kind or convolution problem, got {loaded.kind!r}")
        table = resolvent(loaded.problem).table
    except VolterraError as exc:
        click.echo(f"{path}: error: {exc}", err=True)
        raise SystemExit(exit_code_for(exc))
    text = render_resolvent_csv(table)
    if out is None:
        click.echo(text, nl=False)
    else:
        try:
            Path(out).write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            click.echo(f"{path}: error: cannot write {out}: {exc}", err=True)
            raise SystemExit(EXIT_SOLVER)
    raise SystemExit(EXIT_OK)


# ---------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------


@cli.command()
@click.option("--seed", type=int, default=None, help="Seed for the random instances.")
@click.option("--inject-fault", type=click.Choice(["monomial"]), default=None, hidden=True)
def selftest(seed, inject_fault) -> None:
    """Run the built-in acceptance checks and print a pass/fail table."""
    from src.selftest.checks import format_table, injected_fault, run_all

    settings = get_settings()
    seed = settings.selftest_seed if seed is None else seed
    if inject_fault and not settings.debug:
        click.echo("--inject-fault needs TSV_DEBUG=1; ignored", err=True)
        inject_fault = None
    with injected_fault(inject_fault):
        results = run_all(seed)
    click.echo(format_table(results))
    raise SystemExit(EXIT_OK if all(r.passed for r in results) else EXIT_RESIDUAL)
