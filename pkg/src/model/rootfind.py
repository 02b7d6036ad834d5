"""Bracketed bisection for the monotone equations of the model."""

import logging
import math
from typing import Callable, NamedTuple

from scipy import optimize

from .exceptions import SolverError

logger = logging.getLogger(__name__)

BISECT_MAX_ITER = 200
# Tight enough that equilibrium-equation residuals stay below 1e-8.
BISECT_XTOL = 1e-14


class Root(NamedTuple):
    value: float
    iterations: int


def bisect_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = BISECT_XTOL,
    label: str = "root",
) -> Root:
    """Root of `fn` on [lo, hi]; `fn(lo)` and `fn(hi)` must differ in sign."""
    f_lo, f_hi = fn(lo), fn(hi)
    if math.isnan(f_lo) or math.isnan(f_hi):
        raise SolverError(f"{label}: function is NaN at the bracket [{lo}, {hi}]")
    if f_lo == 0:
        return Root(lo, 0)
    if f_hi == 0:
        return Root(hi, 0)
    if (f_lo > 0) == (f_hi > 0):
        raise SolverError(
            f"{label}: no sign change on [{lo}, {hi}] (f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g})"
        )

    try:
        value, info = optimize.bisect(
            fn, lo, hi, xtol=xtol, maxiter=BISECT_MAX_ITER, full_output=True, disp=False
        )
    except (ValueError, RuntimeError) as e:
        raise SolverError(f"{label}: bisection failed: {e}") from e

    if not info.converged:
        raise SolverError(f"{label}: bisection did not converge in {BISECT_MAX_ITER} iterations")

    logger.debug(f"{label}: root {value:.15g} after {info.iterations} iterations")
    return Root(value, info.iterations)
