"""
Problem-file and candidate-file loading.

Turns a validated ProblemFile into the library's problem objects. Every
failure to read or validate a file is raised as ProblemFileError (exit 2),
with line / column / byte offset for JSON syntax errors.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np
from pydantic import ValidationError

from src.config.config import all_rel_close
from src.config.settings import get_settings
from src.errors import CandidateFileError, EmptyScale, NonMonotone, ProblemFileError
from src.cli.schema import (
    ConvolutionEquation,
    FirstKindEquation,
    IVPEquation,
    NonlinearEquation,
    ProblemFile,
    SecondKindEquation,
    SystemEquation,
)
from src.convolve.shift import convolution_problem
from src.dynbridge.ivp import LinearIVP
from src.exprlang.evaluate import sample_function
from src.exprlang.parser import parse
from src.timescale.scale import TimeScale, build_time_scale
from src.volterra1.first_kind import FirstKindProblem
from src.volterra2.problems import NonlinearProblem, ProblemSpec, SolverOptions, SystemProblem

logger = logging.getLogger(__name__)

Problem = Union[ProblemSpec, FirstKindProblem, NonlinearProblem, SystemProblem, LinearIVP]


@dataclass(frozen=True, eq=False)
class LoadedProblem:
    """
    kind:
        equation kind from the file.
    problem:
        the library object the solvers take.
    methods:
        methods requested by the file's solver block.
    """

    kind: str
    ts: TimeScale
    problem: Problem
    methods: tuple[str, ...]
    options: SolverOptions
    source: str = ""


def read_problem_file(path: str | Path) -> ProblemFile:
    """Read and validate one problem file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"{path}: cannot read file: {exc}") from exc
    return parse_problem_text(text, source=str(path))


def parse_problem_text(text: str, *, source: str = "<string>") -> ProblemFile:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ProblemFileError(
            f"{source}: invalid JSON at line {exc.lineno} column {exc.colno} (byte offset {offset}): {exc.msg}",
            line=exc.lineno,
            column=exc.colno,
            offset=offset,
        ) from exc
    try:
        return ProblemFile.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise ProblemFileError(
            f"{source}: schema error at {where or '<root>'}: {first['msg']} ({exc.error_count()} error(s))"
        ) from exc


def _options(pf: ProblemFile, overrides: dict[str, Any]) -> SolverOptions:
    settings = get_settings()
    merged = {
        "tol": pf.solver.tol if pf.solver.tol is not None else settings.tol,
        "max_terms": pf.solver.max_terms if pf.solver.max_terms is not None else settings.max_terms,
        "max_iter": pf.solver.max_iter if pf.solver.max_iter is not None else settings.max_iter,
    }
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return SolverOptions(**merged)


def build_problem(pf: ProblemFile, *, source: str = "", **overrides: Any) -> LoadedProblem:
    """
    Build the library problem for a validated file.

    Keyword overrides (tol, max_terms, max_iter) win over the file's solver
    block, which wins over SolverSettings.
    """
    try:
        ts = build_time_scale(pf.timescale.model_dump())
    except (ValidationError, EmptyScale, NonMonotone) as exc:
        raise ProblemFileError(f"{source}: bad time scale: {exc}") from exc
    opts = _options(pf, overrides)
    eq = pf.equation
    initial = parse(pf.solver.picard_initial) if pf.solver.picard_initial else None

    problem: Problem
    if isinstance(eq, SecondKindEquation):
        problem = ProblemSpec(
            ts=ts,
            lam=eq.lam,
            kernel=parse(eq.kernel),
            forcing=parse(eq.forcing),
            options=opts,
            picard_initial=initial,
        )
    elif isinstance(eq, ConvolutionEquation):
        base = convolution_problem(ts, eq.lam, sample_function(parse(eq.kernel), ts, what="kernel"), parse(eq.forcing))
        problem = ProblemSpec(
            ts=ts,
            lam=base.lam,
            kernel=base.kernel_table,
            forcing=base.forcing_function,
            options=opts,
            picard_initial=initial,
        )
    elif isinstance(eq, FirstKindEquation):
        problem = FirstKindProblem(ts=ts, kernel=parse(eq.kernel), forcing=parse(eq.forcing))
    elif isinstance(eq, NonlinearEquation):
        problem = NonlinearProblem(
            ts=ts,
            lam=eq.lam,
            F=parse(eq.F),
            forcing=parse(eq.forcing),
            lipschitz_L=eq.lipschitz_L,
            bound_M=eq.bound_M,
            domain_alpha=eq.domain_alpha,
            options=opts,
            picard_initial=initial,
        )
    elif isinstance(eq, SystemEquation):
        problem = SystemProblem(
            ts=ts,
            lam=eq.lam,
            kernels=[[parse(k) for k in row] for row in eq.kernels],
            forcings=[parse(f) for f in eq.forcings],
            options=opts,
        )
    elif isinstance(eq, IVPEquation):
        problem = LinearIVP(
            ts=ts,
            n=eq.order,
            p=[parse(pk) for pk in eq.p],
            q=parse(eq.q),
            s=ts.a if eq.s is None else eq.s,
            y0=list(eq.y0),
            convention=eq.convention,
        )
    else:  # pragma: no cover - the discriminated union is exhaustive
        raise ProblemFileError(f"{source}: unsupported equation kind {eq.kind!r}")

    logger.debug("TSV_PROBLEM_BUILT source=%s kind=%s points=%d", source, eq.kind, ts.size)
    return LoadedProblem(
        kind=eq.kind,
        ts=ts,
        problem=problem,
        methods=tuple(dict.fromkeys(pf.solver.method)),
        options=opts,
        source=source,
    )


def load_problem(path: str | Path, **overrides: Any) -> LoadedProblem:
    return build_problem(read_problem_file(path), source=str(path), **overrides)


# ---------------------------------------------------------------------
# Candidate solutions
# ---------------------------------------------------------------------


def read_candidate(path: str | Path, grid: np.ndarray, components: int = 1) -> np.ndarray:
    """
    Read a candidate CSV with header `t,phi` (or `component,t,phi` for
    systems) and check it against `grid`.

    Returns:
        Array of shape (len(grid),) or (components, len(grid)).

    Raises:
        CandidateFileError: unreadable file, wrong columns, wrong row count
            or t values that are not the grid points.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CandidateFileError(f"{path}: cannot read candidate: {exc}") from exc

    needed = {"t", "phi"} | ({"component"} if components > 1 else set())
    if not rows or not needed.issubset(rows[0].keys()):
        raise CandidateFileError(f"{path}: candidate needs columns {', '.join(sorted(needed))}")

    try:
        if components > 1:
            blocks = []
            for c in range(1, components + 1):
                block = [r for r in rows if int(r["component"]) == c]
                blocks.append(_check_block(path, block, grid))
            return np.vstack(blocks)
        return _check_block(path, rows, grid)
    except ValueError as exc:
        raise CandidateFileError(f"{path}: malformed number: {exc}") from exc


def _check_block(path: Path, rows: list[dict[str, str]], grid: np.ndarray) -> np.ndarray:
    if len(rows) != len(grid):
        raise CandidateFileError(f"{path}: expected {len(grid)} rows, got {len(rows)}")
    t = np.array([float(r["t"]) for r in rows])
    if not all_rel_close(t, grid, rel=get_settings().compare_rel):
        raise CandidateFileError(f"{path}: t column does not match the problem's time scale")
    return np.array([float(r["phi"]) for r in rows])
