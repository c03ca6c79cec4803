"""Central-difference Jacobians shared across the package.

The step size follows the standard second-order choice
``cbrt(machine epsilon) * max(1, |coordinate|)``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray

_BASE_STEP = float(np.cbrt(np.finfo(float).eps))


def steps_for(x: Array, step_scale: float = 1.0) -> Array:
    """Per-coordinate central-difference steps for a point `x`."""
    x = np.asarray(x, dtype=float)
    return step_scale * _BASE_STEP * np.maximum(1.0, np.abs(x))


def jacobian(func: Callable[[Array], Array], x: Array, step_scale: float = 1.0) -> Array:
    """Central-difference Jacobian of ``func`` at the 1-D point ``x``.

    Returns an array of shape ``(len(func(x)), len(x))``.  ``func`` must be
    evaluable in a neighborhood of ``x``.
    """
    x = np.asarray(x, dtype=float)
    h = steps_for(x, step_scale)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        f_plus = np.asarray(func(x + e), dtype=float)
        f_minus = np.asarray(func(x - e), dtype=float)
        cols.append((f_plus - f_minus) / (2.0 * h[i]))
    if not cols:
        probe = np.asarray(func(x), dtype=float)
        return np.zeros((probe.size, 0))
    return np.column_stack(cols)


def jacobian_richardson(func: Callable[[Array], Array], x: Array) -> Array:
    """Fourth-order Jacobian by Richardson extrapolation of central differences.

    Used where a check needs materially more accuracy than the production
    second-order stencil, e.g. verifying that a Jacobian vanishes.
    """
    coarse = jacobian(func, x, step_scale=1.0)
    fine = jacobian(func, x, step_scale=0.5)
    return (4.0 * fine - coarse) / 3.0


def jacobian_arg(
    func: Callable[..., Array],
    args: Sequence[Array],
    argnum: int,
    step_scale: float = 1.0,
) -> Array:
    """Central-difference Jacobian of ``func`` w.r.t. its ``argnum``-th argument."""
    frozen = [np.asarray(a, dtype=float) for a in args]

    def partial(x: Array) -> Array:
        call_args = list(frozen)
        call_args[argnum] = x
        return np.asarray(func(*call_args), dtype=float)

    return jacobian(partial, frozen[argnum], step_scale)
