"""End-to-end equilibrium paths, extended-path iteration, and stochastic simulation.

Given a policy approximation, this module recovers the transformed
initial condition matching an original-variable starting point, iterates
the closed-loop dynamics, maps every period back to levels, and provides
the horizon-truncated extended-path sweep together with the
certainty-equivalent stochastic scheme (future shocks set to zero,
re-solving each period).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._numdiff import jacobian
from .exceptions import InfeasibleInitialError, NonContractionError
from .manifold import PolicyApprox, eval_policy
from .spectral import SpectralSplit, TransformedSystem, transformed_from_maps

Array = np.ndarray


@dataclass
class Trajectory:
    """Time-indexed equilibrium path in original levels and transformed coordinates.

    ``z_path``, ``x_path``, ``y_path`` hold one row per period in original
    levels; ``u_path`` and ``v_path`` the corresponding transformed
    deviations.  ``truncated_at`` is the first period (if any) whose
    u-coordinate left the verified ball, after which the path stops.
    """

    times: Array
    z_path: Array
    x_path: Array
    y_path: Array
    u_path: Array
    v_path: Array
    truncated_at: int | None = None

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class EPConfig:
    """Extended-path run parameters.

    A horizon ``n`` fixes the two-point problem: the terminal deviation
    one period past the horizon is pinned to zero, and ``type2_iters``
    full sweeps of implicit single-period solves are performed.
    """

    horizon: int
    type2_iters: int
    tol: float = 1e-13
    max_inner_iter: int = 200

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.type2_iters < 1:
            raise ValueError("type2_iters must be at least 1")


def _initial_rows(split: SpectralSplit, dims: tuple[int, int, int]) -> tuple[Array, Array]:
    n_z, n_x, _ = dims
    rows = split.Z[: n_z + n_x, :]
    return rows[:, : split.n_u], rows[:, split.n_u :]


def solve_initial(
    p: PolicyApprox,
    split: SpectralSplit,
    x0,
    z0,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> Array:
    """Transformed initial condition matching original starting values.

    Solves the square system that equates the z- and x-rows of the
    change of basis, evaluated on the graph of the policy, to the given
    starting deviations.  Newton iteration starts from the linear
    solution (policy set to zero).

    Raises
    ------
    InfeasibleInitialError
        If Newton fails to reach ``tol`` (including policy evaluations
        failing along the way); the starting point is outside the
        feasible image of the policy graph.
    """
    sys = p.system
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    target = np.concatenate([z0, x0 - sys.ss.x_bar])
    R1, R2 = _initial_rows(split, sys.dims)

    def residual(u: Array) -> Array:
        return R1 @ u + R2 @ eval_policy(p, u) - target

    try:
        try:
            u = np.linalg.solve(R1, target)
        except np.linalg.LinAlgError:
            u, *_ = np.linalg.lstsq(R1, target, rcond=None)
        res = residual(u)
        norm = float(np.linalg.norm(res))
        for _ in range(max_iter):
            if norm <= tol:
                return u
            jac = R1 + R2 @ jacobian(lambda q: eval_policy(p, q), u)
            try:
                step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError as exc:
                raise InfeasibleInitialError(
                    f"singular Jacobian while matching the initial condition "
                    f"(residual {norm:.3e})"
                ) from exc
            damping = 1.0
            for _ in range(30):
                trial = u + damping * step
                trial_res = residual(trial)
                trial_norm = float(np.linalg.norm(trial_res))
                if np.isfinite(trial_norm) and trial_norm < norm:
                    break
                damping *= 0.5
            else:
                raise InfeasibleInitialError(
                    f"initial-condition solve stalled at residual {norm:.3e}"
                )
            u, res, norm = trial, trial_res, trial_norm
    except NonContractionError as exc:
        raise InfeasibleInitialError(
            "policy evaluation failed while matching the initial condition "
            "(starting point outside the evaluable region)"
        ) from exc
    raise InfeasibleInitialError(
        f"initial-condition solve did not reach {tol:.1e} "
        f"within {max_iter} iterations (residual {norm:.3e})"
    )


def simulate(p: PolicyApprox, split: SpectralSplit, u0, T: int) -> Trajectory:
    """Iterate the closed-loop dynamics for ``T`` periods from ``u0``.

    Every period is mapped back to original levels through the change of
    basis evaluated on the policy graph.  If the u-coordinate leaves the
    verified ball (when the policy carries a domain), the trajectory is
    recorded up to and including that period and marked truncated.
    """
    sys = p.system
    u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
    us, vs = [], []
    truncated_at = None
    for t in range(T + 1):
        v = eval_policy(p, u)
        us.append(u.copy())
        vs.append(v.copy())
        if p.domain is not None and np.linalg.norm(u) > p.domain.r_u * (1 + 1e-12):
            truncated_at = t
            break
        if t < T:
            F_val, _ = sys.fg(u, v)
            u = sys.split.A @ u + F_val
    u_path = np.array(us)
    v_path = np.array(vs)
    n = u_path.shape[0]
    z_path = np.empty((n, sys.dims[0]))
    x_path = np.empty((n, sys.dims[1]))
    y_path = np.empty((n, sys.dims[2]))
    for t in range(n):
        z_path[t], x_path[t], y_path[t] = sys.to_levels(u_path[t], v_path[t])
    return Trajectory(
        times=np.arange(n),
        z_path=z_path,
        x_path=x_path,
        y_path=y_path,
        u_path=u_path,
        v_path=v_path,
        truncated_at=truncated_at,
    )


def _require_v_independent_drift(sys: TransformedSystem) -> None:
    """Verify that the u-dynamics do not respond to v (spot check)."""
    for a in (0.0, 0.05, -0.08):
        u = np.full(sys.n_u, a)
        base = sys.F(u, np.zeros(sys.n_v))
        for s in (0.1, -0.07):
            probe = sys.F(u, np.full(sys.n_v, s))
            if np.max(np.abs(probe - base), initial=0.0) > 1e-10:
                raise ValueError(
                    "extended-path sweep requires u-dynamics independent of v "
                    "(exogenous-state form)"
                )


def solve_ep(sys: TransformedSystem, u_path: Sequence, cfg: EPConfig) -> Array:
    """Extended-path sweeps on a precomputed exogenous-state path.

    ``u_path`` must hold the horizon+1 points ``u_t, ..., u_{t+n}``.  The
    terminal deviation is pinned to zero one period past the horizon, and
    each sweep solves the single-period implicit equations by the same
    contraction iteration the policy evaluator uses.

    Returns
    -------
    Array, shape (type2_iters + 1, horizon + 1, n_v)
        All iterates, sweep ``j = 0`` (the zero guess) included.

    Raises
    ------
    ValueError
        If the u-dynamics depend on v; the sweep is only defined for
        exogenous-state systems.
    NonContractionError
        If an implicit single-period solve fails to converge.
    """
    _require_v_independent_drift(sys)
    u_path = np.atleast_2d(np.asarray(u_path, dtype=float).reshape(cfg.horizon + 1, sys.n_u))
    B_inv = sys.split.B_inv
    V = np.zeros((cfg.type2_iters + 1, cfg.horizon + 1, sys.n_v))
    for j in range(1, cfg.type2_iters + 1):
        for i in range(cfg.horizon + 1):
            ahead = V[j - 1, i + 1] if i < cfg.horizon else np.zeros(sys.n_v)
            v = V[j, i].copy()  # zeros; cold start keeps sweeps independent
            increment = np.inf
            for _ in range(cfg.max_inner_iter):
                _, G_val = sys.fg(u_path[i], v)
                v_new = B_inv @ (ahead - G_val)
                increment = float(np.linalg.norm(v_new - v))
                v = v_new
                if increment <= cfg.tol:
                    break
            else:
                raise NonContractionError(
                    f"extended-path inner solve failed at sweep {j}, period {i} "
                    f"(last increment {increment:.3e})",
                    point=u_path[i],
                    last_residual=increment,
                )
            V[j, i] = v
    return V


def simulate_stochastic(
    p: PolicyApprox,
    split: SpectralSplit,
    x0,
    z0,
    shocks: Sequence,
    T: int,
) -> Trajectory:
    """Certainty-equivalent stochastic path.

    Each period the deterministic problem is re-solved from the current
    ``(x, z)`` under zero future shocks, one closed-loop step produces the
    next endogenous state, and the drawn innovation is injected into the
    exogenous state.  The supplied ``shocks`` must contain at least ``T``
    rows; no randomness is generated here.
    """
    sys = p.system
    n_z = sys.dims[0]
    shocks = np.asarray(shocks, dtype=float).reshape(-1, n_z) if n_z else np.zeros((T, 0))
    if shocks.shape[0] < T:
        raise ValueError(f"need at least {T} shock rows, got {shocks.shape[0]}")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    us, vs, zs, xs, ys = [], [], [], [], []
    for t in range(T + 1):
        u = solve_initial(p, split, x, z)
        v = eval_policy(p, u)
        _, x_rec, y_rec = sys.to_levels(u, v)
        us.append(u)
        vs.append(v)
        zs.append(z.copy())
        xs.append(x_rec)
        ys.append(y_rec)
        if t < T:
            F_val, _ = sys.fg(u, v)
            u_next = sys.split.A @ u + F_val
            v_next = eval_policy(p, u_next)
            _, x_next, _ = sys.to_levels(u_next, v_next)
            x = x_next
            z = sys.lambda_mat @ z + shocks[t]
    n = len(us)
    return Trajectory(
        times=np.arange(n),
        z_path=np.array(zs),
        x_path=np.array(xs),
        y_path=np.array(ys),
        u_path=np.array(us),
        v_path=np.array(vs),
    )


def make_exogenous_test_system() -> TransformedSystem:
    """Scalar exogenous-state system used to exercise the extended path.

    The u-dynamics are an autonomous AR(1) with coefficient 0.5 and the
    v-feed is the quadratic ``0.1 u^2 + 0.05 u v``; both maps vanish at
    the origin with their derivatives, and the contraction conditions
    hold on the unit balls.
    """

    def F(u: Array, v: Array) -> Array:
        return np.zeros(1)

    def G(u: Array, v: Array) -> Array:
        return np.array([0.1 * u[0] ** 2 + 0.05 * u[0] * v[0]])

    return transformed_from_maps(
        A=np.array([[0.5]]),
        B=np.array([[2.0]]),
        F=F,
        G=G,
        dims=(1, 0, 1),
        lambda_mat=np.array([[0.5]]),
    )
