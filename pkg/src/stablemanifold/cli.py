"""Batch command-line front end.

Subcommands: ``check`` (condition report), ``policy`` (policy-function
CSV), ``simulate`` (trajectory CSV), ``ep`` (extended-path CSV).  Runs
are configured by a flat INI file plus a few overriding flags; outputs
are deterministic given the configuration, seeded shocks included.

Exit codes: 1 config error, 2 steady-state failure, 3 unit root or
saddle-count failure, 4 non-contraction, 5 infeasible initial condition.
"""

from __future__ import annotations

import argparse
import configparser
import importlib.util
import sys as _sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    BalancingError,
    BlanchardKahnError,
    ConfigError,
    ForwardDivergenceError,
    InfeasibleInitialError,
    InnerSolveError,
    NonContractionError,
    SingularJacobianError,
    SingularSystemError,
    SolverError,
    SteadyStateError,
    TransformBuildError,
    UnitRootError,
)
from .first_order import build_first_order
from .growth import (
    GrowthParams,
    build_growth_pipeline,
    closed_form,
    implicit_policy_in_levels,
    policy_in_levels,
    taylor_policy,
)
from .manifold import (
    DomainSpec,
    PolicyApprox,
    check_conditions,
    error_bound,
    eval_policy,
    eval_policy_hadamard,
    search_domain,
)
from .model import eval_residual, find_steady_state
from .solver import EPConfig, make_exogenous_test_system, simulate, simulate_stochastic, solve_ep, solve_initial
from .spectral import build_transformed, schur_split

FLOAT_FMT = "{:.17g}"


@dataclass
class RunConfig:
    """Flat run configuration; see the README for the file schema."""

    model: str = "growth"
    alpha: float = 0.36
    beta: float = 0.99
    r_u: float | None = None  # None means auto-search
    r_v: float | None = None
    sample_count: int = 2048
    order: int = 2
    steady_tol: float = 1e-12
    inner_tol: float = 1e-12
    init_tol: float = 1e-10
    memo: bool = True
    T: int = 50
    x0: list = field(default_factory=list)
    z0: list = field(default_factory=list)
    seed: int = 0
    shock_std: float = 0.0
    horizon: int = 20
    type2_iters: int = 4
    u0: float = 0.8
    grid: int = 501
    k_min_frac: float = 0.01
    k_max_frac: float = 5.0
    u_min: float = -0.9
    u_max: float = 0.9
    output_dir: Path = Path(".")


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FMT.format(float(value))


def _parse_radius(text: str) -> float | None:
    text = text.strip().lower()
    if text in ("auto", "auto-search", ""):
        return None
    return float(text)


def load_config(path: str | None) -> RunConfig:
    """Parse the INI run configuration; missing file keys keep defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if parser.has_section("model"):
            cfg.model = parser.get("model", "name", fallback=cfg.model).strip()
        if parser.has_section("params"):
            cfg.alpha = parser.getfloat("params", "alpha", fallback=cfg.alpha)
            cfg.beta = parser.getfloat("params", "beta", fallback=cfg.beta)
        if parser.has_section("domain"):
            cfg.r_u = _parse_radius(parser.get("domain", "r_u", fallback="auto"))
            cfg.r_v = _parse_radius(parser.get("domain", "r_v", fallback="auto"))
            cfg.sample_count = parser.getint(
                "domain", "sample_count", fallback=cfg.sample_count
            )
        if parser.has_section("solve"):
            cfg.order = parser.getint("solve", "order", fallback=cfg.order)
            cfg.steady_tol = parser.getfloat("solve", "steady_tol", fallback=cfg.steady_tol)
            cfg.inner_tol = parser.getfloat("solve", "inner_tol", fallback=cfg.inner_tol)
            cfg.init_tol = parser.getfloat("solve", "init_tol", fallback=cfg.init_tol)
            cfg.memo = parser.getboolean("solve", "memo", fallback=cfg.memo)
        if parser.has_section("simulate"):
            cfg.T = parser.getint("simulate", "T", fallback=cfg.T)
            for key, store in (("x0", "x0"), ("z0", "z0")):
                raw = parser.get("simulate", key, fallback="").strip()
                if raw:
                    setattr(cfg, store, [float(tok) for tok in raw.split(",")])
            cfg.seed = parser.getint("simulate", "seed", fallback=cfg.seed)
            cfg.shock_std = parser.getfloat("simulate", "shock_std", fallback=cfg.shock_std)
        if parser.has_section("ep"):
            cfg.horizon = parser.getint("ep", "horizon", fallback=cfg.horizon)
            cfg.type2_iters = parser.getint("ep", "type2_iters", fallback=cfg.type2_iters)
            cfg.u0 = parser.getfloat("ep", "u0", fallback=cfg.u0)
        if parser.has_section("policy"):
            cfg.grid = parser.getint("policy", "grid", fallback=cfg.grid)
            cfg.k_min_frac = parser.getfloat("policy", "k_min_frac", fallback=cfg.k_min_frac)
            cfg.k_max_frac = parser.getfloat("policy", "k_max_frac", fallback=cfg.k_max_frac)
            cfg.u_min = parser.getfloat("policy", "u_min", fallback=cfg.u_min)
            cfg.u_max = parser.getfloat("policy", "u_max", fallback=cfg.u_max)
    except ValueError as exc:
        raise ConfigError(f"invalid value in config {path}: {exc}") from exc
    if cfg.order < 0:
        raise ConfigError("order must be nonnegative")
    for name in ("steady_tol", "inner_tol", "init_tol"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name} must be positive")
    return cfg


@dataclass
class _Built:
    """Assembled pipeline pieces for one configured model."""

    system: object
    split: object
    model: object = None
    params: GrowthParams | None = None


def _load_external(path: str):
    module_path = Path(path)
    if not module_path.exists():
        raise ConfigError(f"model module not found: {path}")
    spec = importlib.util.spec_from_file_location("external_model", module_path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not hasattr(module, "build_model"):
        raise ConfigError(f"{path} must define build_model() -> ModelSpec")
    return module.build_model()


def _build(cfg: RunConfig) -> _Built:
    if cfg.model == "growth":
        params = GrowthParams(alpha=cfg.alpha, beta=cfg.beta)
        pipe = build_growth_pipeline(params, steady_tol=min(cfg.steady_tol, 1e-13))
        return _Built(system=pipe.system, split=pipe.split, model=pipe.model, params=params)
    if cfg.model == "exo_test":
        system = make_exogenous_test_system()
        return _Built(system=system, split=system.split)
    model = _load_external(cfg.model)
    ss = find_steady_state(model, tol=cfg.steady_tol)
    fos = build_first_order(model, ss)
    split = schur_split(fos.K, n_u=model.n_z + model.n_x, eps_unit=1e-6)
    system = build_transformed(fos, split)
    return _Built(system=system, split=split, model=model)


def _domain(cfg: RunConfig, built: _Built):
    if cfg.r_u is not None and cfg.r_v is not None:
        dom = DomainSpec(r_u=cfg.r_u, r_v=cfg.r_v, sample_count=cfg.sample_count)
        return dom, check_conditions(built.system, dom)
    return search_domain(built.system, sample_count=cfg.sample_count)


def _policy(cfg: RunConfig, built: _Built, order: int, dom: DomainSpec) -> PolicyApprox:
    return PolicyApprox(
        order=order,
        system=built.system,
        inner_tol=cfg.inner_tol,
        domain=dom,
        memo=cfg.memo,
    )


def _out_path(cfg: RunConfig, name: str) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir / name


def cmd_check(cfg: RunConfig) -> Path:
    """Run the pipeline and write the condition/bound report."""
    built = _build(cfg)
    dom, report = _domain(cfg, built)
    split = built.split
    lines = [
        ("model", cfg.model),
        ("r_u", dom.r_u),
        ("r_v", dom.r_v),
        ("samples_used", report.samples_used),
        ("normA", split.normA),
        ("normBinv", split.normBinv),
        ("gamma_slack", split.gamma_slack),
        ("sup_G", report.sup_G),
        ("L", report.L),
        ("rho", report.rho),
        ("cond1_rhs", report.cond1_rhs),
        ("cond2_rhs", report.cond2_rhs),
        ("cond1_ok", report.cond1_ok),
        ("cond2_ok", report.cond2_ok),
        ("cond3_ok", report.cond3_ok),
    ]
    if report.cond2_ok:
        bound = error_bound(split, report, n=max(cfg.order, 1), h_tail=dom.r_v)
        lines += [
            ("a", bound.a),
            ("s1_star", bound.s1_star),
            ("s2_star", bound.s2_star),
            ("deriv_bound", bound.deriv_bound),
            ("apriori_order_n", bound.apriori),
        ]
    else:
        lines += [("a", 2.0 * split.normBinv / (1.0 + split.normBinv * split.normA))]
    path = _out_path(cfg, "check_report.txt")
    text = "".join(f"{key} = {_fmt(val)}\n" for key, val in lines)
    path.write_text(text, encoding="utf-8")
    _sys.stdout.write(text)
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(val) for val in row) + "\n")


def cmd_policy(cfg: RunConfig) -> Path:
    """Write the policy-function comparison CSV."""
    built = _build(cfg)
    dom, _ = _domain(cfg, built)
    path = _out_path(cfg, "policy.csv")
    if built.params is not None:
        params = built.params
        kb = params.k_bar
        k_grid = np.linspace(cfg.k_min_frac * kb, cfg.k_max_frac * kb, cfg.grid)
        columns = {"k": k_grid, "closed_form": closed_form(params, k_grid)}
        h11 = lambda u: eval_policy_hadamard(built.system, 1, u)
        columns["h11"] = policy_in_levels(h11, built.split, params, k_grid)
        for order in (1, 2, 3):
            columns[f"h{order}"] = implicit_policy_in_levels(
                built.system,
                built.split,
                params,
                order,
                k_grid,
                inner_tol=cfg.inner_tol,
                domain=dom,
                memo=cfg.memo,
            )
        for t_order in (1, 2, 5, 16):
            columns[f"taylor{t_order}"] = taylor_policy(params, t_order, k_grid)
        header = list(columns)
        rows = zip(*columns.values())
        _write_csv(path, header, rows)
        return path
    if built.system.n_u != 1:
        raise ConfigError("policy grids require a scalar stable coordinate")
    u_grid = np.linspace(cfg.u_min, cfg.u_max, cfg.grid)
    header = ["u", "h11", "h1", "h2", "h3"]
    policies = [_policy(cfg, built, order, dom) for order in (1, 2, 3)]
    rows = []
    for u in u_grid:
        row = [u, float(eval_policy_hadamard(built.system, 1, np.array([u]))[0])]
        row += [float(eval_policy(pol, np.array([u]))[0]) for pol in policies]
        rows.append(row)
    _write_csv(path, header, rows)
    return path


def _trajectory_rows(built: _Built, traj, model) -> tuple[list[str], list[list[float]]]:
    n_z = traj.z_path.shape[1]
    n_x = traj.x_path.shape[1]
    n_y = traj.y_path.shape[1]
    n_u = traj.u_path.shape[1]
    n_v = traj.v_path.shape[1]
    header = (
        ["t"]
        + [f"z{i}" for i in range(n_z)]
        + [f"x{i}" for i in range(n_x)]
        + [f"y{i}" for i in range(n_y)]
        + [f"u{i}" for i in range(n_u)]
        + [f"v{i}" for i in range(n_v)]
        + ["residual_norm"]
    )
    rows = []
    T = len(traj) - 1
    for t in range(T + 1):
        if t < T:
            if model is not None:
                res = eval_residual(
                    model,
                    traj.y_path[t + 1],
                    traj.y_path[t],
                    traj.x_path[t + 1],
                    traj.x_path[t],
                    traj.z_path[t],
                )
                res_norm = float(np.linalg.norm(res))
            else:
                sysm = built.system
                _, g_val = sysm.fg(traj.u_path[t], traj.v_path[t])
                defect = traj.v_path[t + 1] - sysm.split.B @ traj.v_path[t] - g_val
                res_norm = float(np.linalg.norm(defect))
        else:
            res_norm = np.nan
        rows.append(
            [t]
            + list(traj.z_path[t])
            + list(traj.x_path[t])
            + list(traj.y_path[t])
            + list(traj.u_path[t])
            + list(traj.v_path[t])
            + [res_norm]
        )
    return header, rows


def cmd_simulate(cfg: RunConfig) -> Path:
    """Simulate an equilibrium path and write the per-period CSV."""
    built = _build(cfg)
    # starting points of interest routinely lie outside the verified ball,
    # so simulation runs untruncated; bound certification is `check`'s job
    pol = PolicyApprox(order=cfg.order, system=built.system, inner_tol=cfg.inner_tol)
    sysm = built.system
    n_z, n_x, _ = sysm.dims
    if cfg.x0:
        x0 = np.asarray(cfg.x0, dtype=float)
    elif built.params is not None:
        x0 = np.array([0.5 * built.params.k_bar])
    else:
        x0 = sysm.ss.x_bar.copy()
    z0 = np.asarray(cfg.z0, dtype=float) if cfg.z0 else np.zeros(n_z)
    if cfg.shock_std > 0.0 and n_z > 0:
        rng = np.random.default_rng(cfg.seed)
        shocks = rng.normal(0.0, cfg.shock_std, size=(cfg.T, n_z))
        traj = simulate_stochastic(pol, built.split, x0, z0, shocks, cfg.T)
    else:
        u0 = solve_initial(pol, built.split, x0, z0, tol=cfg.init_tol)
        traj = simulate(pol, built.split, u0, cfg.T)
    header, rows = _trajectory_rows(built, traj, built.model)
    path = _out_path(cfg, "simulate.csv")
    _write_csv(path, header, rows)
    return path


def cmd_ep(cfg: RunConfig) -> Path:
    """Run extended-path sweeps on the exogenous-state path and write the CSV."""
    built = _build(cfg)
    dom, _ = _domain(cfg, built)
    sysm = built.system
    n = cfg.horizon
    u_path = np.empty((n + 1, sysm.n_u))
    u = np.full(sysm.n_u, cfg.u0, dtype=float)
    for i in range(n + 1):
        u_path[i] = u
        f_val, _ = sysm.fg(u, np.zeros(sysm.n_v))
        u = sysm.split.A @ u + f_val
    ep_cfg = EPConfig(horizon=n, type2_iters=cfg.type2_iters, tol=cfg.inner_tol)
    V = solve_ep(sysm, u_path, ep_cfg)
    policies = {
        j: _policy(cfg, built, j, dom) for j in range(1, cfg.type2_iters + 1)
    }
    rows = []
    for j in range(1, cfg.type2_iters + 1):
        for i in range(n + 1):
            v_ep = float(np.linalg.norm(V[j, i])) if sysm.n_v > 1 else float(V[j, i, 0])
            h_j = eval_policy(policies[j], u_path[i])
            h_val = float(np.linalg.norm(h_j)) if sysm.n_v > 1 else float(h_j[0])
            rows.append([j, i, v_ep, h_val, abs(v_ep - h_val)])
    path = _out_path(cfg, "ep.csv")
    _write_csv(path, ["j", "i", "V_j_i", "h_j_u_i", "gap"], rows)
    return path


_EXIT_CODES = (
    (ConfigError, 1),
    (SteadyStateError, 2),
    (SingularJacobianError, 2),
    (TransformBuildError, 2),
    (UnitRootError, 3),
    (BlanchardKahnError, 3),
    (SingularSystemError, 3),
    (NonContractionError, 4),
    (BalancingError, 4),
    (InnerSolveError, 4),
    (ForwardDivergenceError, 4),
    (InfeasibleInitialError, 5),
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stablemanifold",
        description="Global policy-function solver for perfect-foresight models",
    )
    parser.add_argument("command", choices=["check", "policy", "simulate", "ep"])
    parser.add_argument("--config", default=None, help="INI run configuration")
    parser.add_argument("--order", type=int, default=None, help="policy order override")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--grid", type=int, default=None, help="policy grid size override")
    parser.add_argument("--seed", type=int, default=None, help="shock seed override")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.order is not None:
            if args.order < 0:
                raise ConfigError("order must be nonnegative")
            cfg.order = args.order
        if args.out is not None:
            cfg.output_dir = Path(args.out)
        if args.grid is not None:
            cfg.grid = args.grid
        if args.seed is not None:
            cfg.seed = args.seed
        command = {
            "check": cmd_check,
            "policy": cmd_policy,
            "simulate": cmd_simulate,
            "ep": cmd_ep,
        }[args.command]
        path = command(cfg)
        print(f"wrote {path}")
        return 0
    except SolverError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        for err_type, code in _EXIT_CODES:
            if isinstance(exc, err_type):
                return code
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
