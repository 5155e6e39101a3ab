"""Tolerance and logging policy.

This module defines how computed values are compared against references
and how the command-line entry point configures logging. Solvers import the
comparison helpers instead of hard-coding tolerances.
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

# Below this magnitude a reference is compared absolutely.
ABSOLUTE_FLOOR = 1e-6

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def rel_close(actual: float, reference: float, rel: float = 1e-12) -> bool:
    """Compare one value against a reference with the default policy.

    Relative error `rel` for references of magnitude >= 1e-6, absolute
    error `rel` below that.

    Args:
        actual: computed value.
        reference: trusted value.
        rel: tolerance.

    Returns:
        bool: True when the value is acceptable.
    """
    scale = abs(reference)
    if scale < ABSOLUTE_FLOOR:
        return abs(actual - reference) <= rel
    return abs(actual - reference) <= rel * scale


def all_rel_close(actual: np.ndarray, reference: np.ndarray, rel: float = 1e-12) -> bool:
    """Vectorised `rel_close` over aligned arrays."""
    actual = np.asarray(actual, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if actual.shape != reference.shape:
        return False
    scale = np.abs(reference)
    allowed = np.where(scale < ABSOLUTE_FLOOR, rel, rel * scale)
    return bool(np.all(np.abs(actual - reference) <= allowed))


def scaled_error(actual: np.ndarray, reference: np.ndarray) -> float:
    """Return max|actual - reference| / (1 + max|reference|).

    This is the solver-agreement measure: "agree to tol" means
    scaled_error <= tol.
    """
    actual = np.asarray(actual, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if reference.size == 0:
        return 0.0
    return float(np.max(np.abs(actual - reference)) / (1.0 + np.max(np.abs(reference))))


def bound_margin(bound: np.ndarray, actual: np.ndarray, rel: float = 1e-12) -> float:
    """Smallest slack of |actual| <= bound over a grid.

    Rounding in the last bits is forgiven: the bound is inflated by `rel`
    relatively plus `rel` absolutely. A nonnegative result means the
    inequality holds everywhere.
    """
    bound = np.asarray(bound, dtype=float)
    actual = np.abs(np.asarray(actual, dtype=float))
    if bound.size == 0:
        return 0.0
    slack = bound * (1.0 + rel) + rel - actual
    return float(np.min(slack))


def configure_logging(level: str = "WARNING") -> None:
    """Configure the root logger once for command-line use.

    Library modules never call this; they only hold module loggers.
    """
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.WARNING
    logging.basicConfig(level=numeric, format=LOG_FORMAT)
    logging.getLogger().setLevel(numeric)
    logger.debug("TSV_LOGGING_CONFIGURED level=%s", level.upper())
