"""
Finite isolated time scales and the values that live on them.

What it does:
- Validates generator descriptions (explicit | uniform | qscale | union) and
  builds an immutable `TimeScale` from them.
- Provides point lookup with snapping, jump/graininess arrays and sub-scales.
- Defines `GridFunction` (one value per point) and `KernelTable`
  (values on the triangle i >= j).

Hard invariants:
- points strictly increasing, length >= 2.
- sigma(b) = b, mu(b) = 0; mu > 0 everywhere else.
- Arrays held by these objects are read-only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Annotated, Any, Callable, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from src.config.settings import get_settings
from src.errors import EmptyScale, NonMonotone, NotAPoint, TimeScaleError

logger = logging.getLogger(__name__)

# Points closer than this (relative) are the same point.
DUPLICATE_REL = 1e-12


# ---------------------------------------------------------------------
# Generator descriptions
# ---------------------------------------------------------------------


class ExplicitScale(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    type: Literal["explicit"] = "explicit"
    points: list[float]


class UniformScale(BaseModel):
    """Arithmetic progression start, start+h, ... up to stop (inclusive)."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    type: Literal["uniform"] = "uniform"
    start: float
    stop: float
    step: float = Field(gt=0)


class QScale(BaseModel):
    """Geometric points start * q^k for k = 0..count-1."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    type: Literal["qscale"] = "qscale"
    q: float = Field(gt=1)
    start: float = Field(gt=0)
    count: int = Field(ge=0)


class UnionScale(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    type: Literal["union"] = "union"
    parts: list["TimeScaleSpec"]

    @model_validator(mode="after")
    def _non_empty(self) -> "UnionScale":
        if not self.parts:
            raise ValueError("union needs at least one part")
        return self


TimeScaleSpec = Annotated[
    Union[ExplicitScale, UniformScale, QScale, UnionScale],
    Field(discriminator="type"),
]
UnionScale.model_rebuild()

_SPEC_ADAPTER: TypeAdapter[Any] = TypeAdapter(TimeScaleSpec)


def parse_scale_spec(raw: Any) -> ExplicitScale | UniformScale | QScale | UnionScale:
    """Validate a plain dict (or an already-built model) as a generator spec."""
    if isinstance(raw, (ExplicitScale, UniformScale, QScale, UnionScale)):
        return raw
    return _SPEC_ADAPTER.validate_python(raw)


def _generate(spec: ExplicitScale | UniformScale | QScale | UnionScale) -> np.ndarray:
    if isinstance(spec, ExplicitScale):
        return np.asarray(spec.points, dtype=float)

    if isinstance(spec, UniformScale):
        if spec.stop < spec.start:
            return np.empty(0)
        count = int(np.floor((spec.stop - spec.start) / spec.step + 1e-9)) + 1
        return spec.start + spec.step * np.arange(count, dtype=float)

    if isinstance(spec, QScale):
        return spec.start * spec.q ** np.arange(spec.count, dtype=float)

    # Union: merge, then collapse coincident points from overlapping parts.
    merged = np.sort(np.concatenate([_generate(part) for part in spec.parts]))
    if merged.size == 0:
        return merged
    keep = [merged[0]]
    for p in merged[1:]:
        if abs(p - keep[-1]) > DUPLICATE_REL * max(1.0, abs(p)):
            keep.append(p)
    return np.asarray(keep, dtype=float)


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float, copy=True)
    values.setflags(write=False)
    return values


# ---------------------------------------------------------------------
# TimeScale
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeScale:
    """
    A finite strictly increasing point set.

    points:
        Read-only float array, length >= 2.
    generator:
        Plain record of how the scale was built (for reports).
    """

    points: np.ndarray
    generator: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise EmptyScale(f"a time scale needs at least 2 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise NonMonotone("time scale points must be finite")
        gaps = np.diff(pts)
        floor = DUPLICATE_REL * np.maximum(1.0, np.abs(pts[1:]))
        bad = np.nonzero(gaps <= floor)[0]
        if bad.size:
            i = int(bad[0])
            raise NonMonotone(
                f"points not strictly increasing at index {i + 1}: {pts[i]!r} -> {pts[i + 1]!r}"
            )
        object.__setattr__(self, "points", _readonly(pts))
        mu = np.append(gaps, 0.0)
        object.__setattr__(self, "_mu", _readonly(mu))

    # -----------------------------------------------------------------
    # Accessors
    # -----------------------------------------------------------------

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def last(self) -> int:
        return self.size - 1

    @property
    def mu(self) -> np.ndarray:
        """Graininess per point; mu[last] == 0."""
        return self._mu  # type: ignore[attr-defined]

    @property
    def sigma(self) -> np.ndarray:
        return _readonly(np.append(self.points[1:], self.points[-1]))

    def index_of(self, t: float) -> int:
        """
        Index of the member point `t`, snapping within the configured
        relative tolerance.

        Raises:
            NotAPoint: nothing on the scale is close enough.
        """
        t = float(t)
        if not np.isfinite(t):
            raise NotAPoint(t)
        i = int(np.searchsorted(self.points, t))
        snap = get_settings().snap_rel
        best = None
        for j in (i - 1, i):
            if 0 <= j < self.size:
                p = float(self.points[j])
                if abs(t - p) <= snap * max(1.0, abs(p)):
                    if best is None or abs(t - p) < abs(t - float(self.points[best])):
                        best = j
        if best is None:
            raise NotAPoint(t)
        return best

    def restrict(self, start: int, stop: int) -> "TimeScale":
        """Sub-scale of points[start:stop] (stop exclusive)."""
        if not (0 <= start < stop <= self.size) or stop - start < 2:
            raise EmptyScale(
                f"restriction [{start}:{stop}] of a {self.size}-point scale has fewer than 2 points"
            )
        return TimeScale(
            points=self.points[start:stop],
            generator={"type": "restricted", "parent": self.generator, "start": start, "stop": stop},
        )

    def kappa(self, n: int = 1) -> "TimeScale":
        """T^{kappa^n}: the scale without its last n points."""
        return self.restrict(0, self.size - n)

    def same_points(self, other: "TimeScale") -> bool:
        return self is other or (
            self.size == other.size and bool(np.array_equal(self.points, other.points))
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeScale):
            return NotImplemented
        return self.same_points(other)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"TimeScale(size={self.size}, a={self.a!r}, b={self.b!r})"


def build_time_scale(spec: Any) -> TimeScale:
    """
    Build a TimeScale from a generator description.

    Args:
        spec: dict or generator model, e.g. {"type": "uniform", "start": 0,
            "stop": 4, "step": 1}.

    Returns:
        TimeScale with the generator recorded.

    Raises:
        EmptyScale: fewer than 2 points.
        NonMonotone: explicit points not strictly increasing.
        pydantic.ValidationError: malformed description (step <= 0, q <= 1, ...).
    """
    model = parse_scale_spec(spec)
    points = _generate(model)
    if points.size < 2:
        raise EmptyScale(f"generator {model.type!r} yields {points.size} point(s)")
    ts = TimeScale(points=points, generator=model.model_dump())
    logger.debug(
        "TSV_TIMESCALE_BUILT type=%s points=%d a=%r b=%r", model.type, ts.size, ts.a, ts.b
    )
    return ts


# ---------------------------------------------------------------------
# Values on a scale
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridFunction:
    """One finite real value per point of `ts`."""

    ts: TimeScale
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.ts.size,):
            raise TimeScaleError(
                f"grid function needs {self.ts.size} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise TimeScaleError("grid function values must be finite")
        object.__setattr__(self, "values", _readonly(vals))

    @classmethod
    def constant(cls, ts: TimeScale, c: float) -> "GridFunction":
        return cls(ts=ts, values=np.full(ts.size, float(c)))

    @classmethod
    def from_callable(cls, ts: TimeScale, fn: Callable[[float], float]) -> "GridFunction":
        return cls(ts=ts, values=np.array([fn(float(p)) for p in ts.points], dtype=float))

    def at(self, t: float) -> float:
        return float(self.values[self.ts.index_of(t)])

    def restrict(self, start: int, stop: int) -> "GridFunction":
        return GridFunction(ts=self.ts.restrict(start, stop), values=self.values[start:stop])


@dataclass(frozen=True, eq=False)
class KernelTable:
    """
    K(t_i, t_j) on the triangle i >= j.

    `entries` is an N x N array; the strict upper triangle is held at zero
    and never read.
    """

    ts: TimeScale
    entries: np.ndarray

    def __post_init__(self) -> None:
        n = self.ts.size
        ent = np.array(self.entries, dtype=float, copy=True)
        if ent.shape != (n, n):
            raise TimeScaleError(f"kernel table needs shape {(n, n)}, got {ent.shape}")
        ent = np.tril(ent)
        if not np.all(np.isfinite(ent)):
            raise TimeScaleError("kernel table entries must be finite")
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    @classmethod
    def from_callable(cls, ts: TimeScale, fn: Callable[[float, float], float]) -> "KernelTable":
        n = ts.size
        ent = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1):
                ent[i, j] = fn(float(ts.points[i]), float(ts.points[j]))
        return cls(ts=ts, entries=ent)

    def at(self, t: float, s: float) -> float:
        i, j = self.ts.index_of(t), self.ts.index_of(s)
        if i < j:
            raise TimeScaleError(f"kernel table is defined for t >= s only, got ({t!r}, {s!r})")
        return float(self.entries[i, j])

    @property
    def strict(self) -> np.ndarray:
        """Entries with the diagonal zeroed (the part Δ-integrals ever touch)."""
        return np.tril(self.entries, k=-1)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries)))

    def restrict(self, start: int, stop: int) -> "KernelTable":
        return KernelTable(ts=self.ts.restrict(start, stop), entries=self.entries[start:stop, start:stop])
