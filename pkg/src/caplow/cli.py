"""Command line front end driven by JSON run configs.

Usage::

    caplow <mode> --config run.json [--out DIR] [--threads N] [--deterministic]

Modes are ``capacity``, ``solve``, ``verify`` and ``uniqueness``.  Exit codes:
0 on success, 1 on solver failure (including a run that times out), 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import flow, geometry, plaplace, solver
from .errors import CaplowError, NotConverged, ParseError, ValidationError
from .flow import FlowSettings
from .geometry import DataFunction, SupportFunction
from .orlicz import PhiSpec
from .plaplace import PLaplaceParams

log = logging.getLogger("caplow")

MODES = ("capacity", "solve", "verify", "uniqueness")

DEFAULTS = {
    "mode": "solve",
    "n": None,
    "p": None,
    "phi": None,
    "f": {"type": "constant", "value": 1.0},
    "init": {"type": "ball", "radius": 1.0},
    "grid": {"M": 256},
    "plaplace": {
        "R_out_factor": 10.0,
        "N_rad": 64,
        "grading": 1.05,
        "eps_reg": 1e-8,
        "picard_tol": 1e-10,
        "picard_max": 200,
        "outer_bc": "robin",
        "solve_every": 1,
        "method": "newton",
    },
    "time": {"dt_max": 1e-2, "cfl": 0.1, "t_max": 100.0, "integrator": "ros2"},
    "stopping": {"residual_cv_tol": 1e-2},
    "output": {"dir": "caplow_out"},
    "seed": 0,
    "inits": None,
    "uniqueness": {"check_condition": None},
}
REQUIRED = ("n", "p", "phi")
FUNC_KEYS = {"constant": {"type", "value"}, "cosine_series": {"type", "coeffs"}}
INIT_KEYS = {"ball": {"type", "radius"}, "cosine_series": {"type", "coeffs"}}
# tagged blocks are replaced as a whole, then checked against their tag
TAGGED = ("f", "init")
PHI_KEYS = {"power": {"family", "pp", "domain_floor"}, "table": {"family", "samples", "domain_floor"}}


@dataclass
class RunConfig:
    n: int
    p: float
    phi: PhiSpec
    f: dict
    init: dict
    M: int
    plaplace: PLaplaceParams
    flow: FlowSettings
    out_dir: str
    mode: str
    seed: int = 0
    inits: list | None = None
    check_condition: bool | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def data_function(self) -> DataFunction:
        return _data(self.f, self.n, self.M)

    def init_body(self) -> SupportFunction:
        return _body(self.init, self.n, self.M)

    def init_bodies(self) -> list[SupportFunction]:
        if self.inits is not None:
            return [_body(d, self.n, self.M) for d in self.inits]
        base = self.init_body()
        th = base.theta
        return [base.with_values(base.values * (1.0 + 0.05 * np.cos(k * th))) for k in (2, 3)]

    def solver_config(self) -> solver.SolverConfig:
        return solver.SolverConfig(flow=self.flow, plaplace=self.plaplace)

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


def _data(d, n, M):
    if d["type"] == "constant":
        return DataFunction.constant(n, M, d["value"])
    return DataFunction.cosine_series(n, M, d["coeffs"])


def _body(d, n, M):
    if d["type"] == "ball":
        return SupportFunction.ball(n, M, d["radius"])
    return SupportFunction.cosine_series(n, M, d["coeffs"])


# --------------------------------------------------------------------------
# parsing


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        path = f"{where}.{key}" if where else key
        if key not in defaults:
            raise ParseError(f"unknown key {path!r}")
        if isinstance(defaults[key], dict) and not (not where and key in TAGGED):
            if not isinstance(val, dict):
                raise ParseError(f"key {path!r} must be an object")
            out[key] = _merge(defaults[key], val, path)
        else:
            out[key] = val
    return out


def _check_keys(d, allowed_by_type, tag, where):
    if not isinstance(d, dict):
        raise ParseError(f"key {where!r} must be an object")
    kind = d.get(tag)
    if kind not in allowed_by_type:
        raise ValidationError(f"{where}.{tag} must be one of {sorted(allowed_by_type)}; got {kind!r}")
    extra = set(d) - allowed_by_type[kind]
    if extra:
        raise ParseError(f"unknown key {where}.{sorted(extra)[0]!r}")


def _positive(name, v):
    if not (isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0):
        raise ValidationError(f"{name} must be > 0; got {v!r}")


def _integer(name, v, lo):
    if not (isinstance(v, int) and not isinstance(v, bool) and v >= lo):
        raise ValidationError(f"{name} must be an integer >= {lo}; got {v!r}")


def load_config(raw: dict) -> RunConfig:
    """Validate a decoded config object and fill in defaults."""
    if not isinstance(raw, dict):
        raise ParseError("config must be a JSON object")
    cfg = _merge(DEFAULTS, raw, "")
    for key in REQUIRED:
        if cfg[key] is None:
            raise ValidationError(f"missing required key {key!r}")
    n, p = cfg["n"], cfg["p"]
    if n not in (2, 3) or isinstance(n, bool):
        raise ValidationError(f"n must be 2 or 3; got {n!r}")
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not (1 < p < n):
        raise ValidationError(f"p must lie in (1,n); got p={p!r}, n={n}")
    if cfg["mode"] not in MODES:
        raise ValidationError(f"mode must be one of {MODES}; got {cfg['mode']!r}")

    _check_keys(cfg["phi"], PHI_KEYS, "family", "phi")
    try:
        spec = PhiSpec.from_dict(cfg["phi"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"invalid phi: {exc}") from exc
    if spec.family == "power":
        cfg["phi"] = spec.to_dict()

    _check_keys(cfg["f"], FUNC_KEYS, "type", "f")
    _check_keys(cfg["init"], INIT_KEYS, "type", "init")
    inits = cfg["inits"]
    if inits is not None:
        if not isinstance(inits, list) or len(inits) < 2:
            raise ValidationError("inits must be a list of at least two init objects")
        for k, d in enumerate(inits):
            _check_keys(d, INIT_KEYS, "type", f"inits[{k}]")

    M = cfg["grid"]["M"]
    _integer("grid.M", M, 16)
    if cfg["mode"] == "solve" and M < 64:
        raise ValidationError(f"grid.M must be >= 64 for solve mode; got {M}")

    pl = cfg["plaplace"]
    _positive("plaplace.R_out_factor", pl["R_out_factor"])
    if pl["R_out_factor"] < 5:
        raise ValidationError("plaplace.R_out_factor must be >= 5")
    _integer("plaplace.N_rad", pl["N_rad"], 2)
    if not (isinstance(pl["grading"], (int, float)) and 1.02 <= pl["grading"] <= 1.2):
        raise ValidationError(f"plaplace.grading must lie in [1.02, 1.2]; got {pl['grading']!r}")
    for key in ("eps_reg", "picard_tol"):
        _positive(f"plaplace.{key}", pl[key])
    _integer("plaplace.picard_max", pl["picard_max"], 1)
    _integer("plaplace.solve_every", pl["solve_every"], 1)
    if pl["outer_bc"] not in ("robin", "dirichlet"):
        raise ValidationError("plaplace.outer_bc must be 'robin' or 'dirichlet'")
    if pl["method"] not in ("newton", "picard"):
        raise ValidationError("plaplace.method must be 'newton' or 'picard'")

    tm = cfg["time"]
    _positive("time.dt_max", tm["dt_max"])
    _positive("time.cfl", tm["cfl"])
    if not (isinstance(tm["t_max"], (int, float)) and tm["t_max"] >= 0):
        raise ValidationError(f"time.t_max must be >= 0; got {tm['t_max']!r}")
    if tm["integrator"] not in ("ros2", "heun"):
        raise ValidationError("time.integrator must be 'ros2' or 'heun'")
    _positive("stopping.residual_cv_tol", cfg["stopping"]["residual_cv_tol"])
    _integer("seed", cfg["seed"], 0)
    if not isinstance(cfg["output"]["dir"], str):
        raise ValidationError("output.dir must be a string")

    check = cfg["uniqueness"]["check_condition"]
    if check is not None and not isinstance(check, bool):
        raise ValidationError("uniqueness.check_condition must be true, false or null")

    config = RunConfig(
        n=n, p=float(p), phi=spec, f=cfg["f"], init=cfg["init"], M=M,
        plaplace=PLaplaceParams(**pl),
        flow=FlowSettings(dt_max=float(tm["dt_max"]), cfl=float(tm["cfl"]), t_max=float(tm["t_max"]),
                          residual_cv_tol=float(cfg["stopping"]["residual_cv_tol"]),
                          integrator=tm["integrator"]),
        out_dir=cfg["output"]["dir"], mode=cfg["mode"], seed=cfg["seed"], inits=inits,
        check_condition=check, raw=cfg,
    )
    # surface positivity problems of f and init as config errors
    try:
        config.data_function()
        config.init_body()
        if inits is not None:
            config.init_bodies()
    except (ValueError, CaplowError) as exc:
        raise ValidationError(f"invalid f or init: {exc}") from exc
    return config


def parse_config(path) -> RunConfig:
    """Read, validate and default a JSON run config."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return load_config(raw)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# modes


def _write_json(path, data) -> None:
    solver.write_summary(path, data)


def run_capacity(cfg: RunConfig, out: Path) -> int:
    body = cfg.init_body()
    sol = plaplace.solve_body(body, cfg.p, cfg.plaplace)
    data = {
        "capacity_energy": sol.capacity_energy,
        "capacity_poincare": sol.capacity_poincare,
        "iterations": sol.iterations,
        "g_min": float(sol.g.min()),
        "g_max": float(sol.g.max()),
        "config_echo": cfg.echo(),
    }
    print(f"capacity_energy   {sol.capacity_energy!r}")
    print(f"capacity_poincare {sol.capacity_poincare!r}")
    if cfg.init["type"] == "ball":
        R = float(cfg.init["radius"])
        exact = plaplace.radial_potential(cfg.n, cfg.p, R).capacity
        data["capacity_radial"] = exact
        print(f"capacity_radial   {exact!r}")
    _write_json(out / "capacity.json", data)
    return 0


def run_solve(cfg: RunConfig, out: Path) -> int:
    f, spec = cfg.data_function(), cfg.phi
    h0 = cfg.init_body()
    result = flow.run(h0, f, spec, cfg.p, cfg.flow, cfg.plaplace)
    result.trajectory.write_csv(out / "timeseries.csv")
    solver.write_solution_csv(out / "solution.csv", result.final, f, spec, cfg.p)
    data = solver.summary(result, f, spec, cfg.p, cfg.echo())
    data["message"] = result.message
    data["steps"] = result.final.step
    if result.status == flow.CONVERGED:
        fine = solver.fine_check(result.final.h, f, spec, cfg.p, cfg.plaplace)
        data["fine_tau"] = fine["tau"]
        data["fine_cv"] = fine["cv"]
    _write_json(out / "summary.json", data)
    print(f"status {result.status}: {result.message}")
    print(f"tau {data['tau']!r}  cv {data['cv']!r}  cp {data['cp']!r}  phi {data['phi']!r}")
    return 0 if result.status == flow.CONVERGED else 1


def verify_suite(cfg: RunConfig, steps: int = 20) -> list[tuple[str, bool, str]]:
    """Radial oracles, conservation, monotonicity and capacity consistency."""
    n, p, M = cfg.n, cfg.p, cfg.M
    spec = cfg.phi
    R = float(cfg.init["radius"]) if cfg.init["type"] == "ball" else 1.0
    rows = []
    exact = plaplace.radial_potential(n, p, R)
    sol = plaplace.solve_body(SupportFunction.ball(n, M, R), p, cfg.plaplace)
    e1 = abs(sol.capacity_energy / exact.capacity - 1.0)
    e2 = abs(sol.capacity_poincare / exact.capacity - 1.0)
    rows.append(("radial capacity", max(e1, e2) <= 0.015, f"energy {e1:.2e}, poincare {e2:.2e}"))
    eg = float(np.abs(sol.g / exact.grad(R) - 1.0).max())
    rows.append(("boundary gradient", eg <= 0.02, f"max rel error {eg:.2e}"))
    ec = abs(sol.capacity_energy / sol.capacity_poincare - 1.0)
    rows.append(("capacity consistency", ec <= 0.02, f"rel difference {ec:.2e}"))

    f = DataFunction.constant(n, M, 1.0)
    ball = SupportFunction.ball(n, M, R)
    st = flow.initial_state(ball, f, spec, p, cfg.plaplace)
    dev = 0.0
    for _ in range(steps):
        st = flow.step(st, f, spec, p, cfg.flow, cfg.plaplace)
        dev = max(dev, float(np.abs(st.h.values / R - 1.0).max()))
    rows.append(("ball fixed point", dev <= 1e-3, f"max |h/R-1| {dev:.2e} over {steps} steps"))

    h0 = ball.with_values(R * (1.0 + 0.1 * np.cos(2 * ball.theta)))
    st = flow.initial_state(h0, f, spec, p, cfg.plaplace)
    sp_ok = True
    a = plaplace.decay_exponent(n, p)
    for _ in range(steps):
        st = flow.step(st, f, spec, p, cfg.flow, cfg.plaplace)
        cp = plaplace.capacity_poincare(st.h, st.potential.g, st.sigma, p)
        sp_ok &= geometry.total_Sp(st.h, st.sigma, p) >= a ** (1.0 - p) * cp - 1e-6
    rec = st.record
    phi = rec.column("phi")
    drift = float(np.abs(phi / phi[0] - 1.0).max())
    rows.append(("conservation", drift <= 5e-3, f"max Phi drift {drift:.2e} over {steps} steps"))
    worst = 0.0
    for col in ("cp_poincare", "cp_energy"):
        c = rec.column(col)
        worst = max(worst, float(np.max(-np.diff(c) / c[:-1])))
    rows.append(("monotonicity", worst <= 1e-6, f"largest relative C_p decrease {worst:.2e}"))
    rows.append(("S_p inequality", bool(sp_ok), "S_p >= ((p-1)/(n-p))^(p-1) C_p at every step"))
    cons = rec.column("cp_energy") / rec.column("cp_poincare")
    ec = float(np.abs(cons - 1.0).max())
    rows.append(("flow capacity consistency", ec <= 0.02, f"rel difference {ec:.2e}"))
    return rows


def run_verify(cfg: RunConfig, out: Path) -> int:
    rows = verify_suite(cfg)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    _write_json(out / "verify.json", {
        "checks": [{"name": nm, "passed": bool(ok), "detail": d} for nm, ok, d in rows],
        "config_echo": cfg.echo(),
    })
    return 0 if all(r[1] for r in rows) else 1


def _condition_path(cfg: RunConfig) -> bool:
    check = cfg.check_condition
    if check is None:
        check = cfg.n == 3
    if check and cfg.n == 2:
        raise ValidationError("the uniqueness condition requires n=3 since (1, n-1] is empty for n=2")
    return check


def run_uniqueness(cfg: RunConfig, out: Path) -> int:
    check = _condition_path(cfg)
    res = solver.uniqueness_experiment(cfg.data_function(), cfg.phi, cfg.p, cfg.n,
                                       cfg.init_bodies(), cfg.solver_config(), check_condition=check)
    for k, sol in enumerate(res["solutions"]):
        geometry.write_csv(out / f"limit_{k}.csv", sol.body)
    data = {k: v for k, v in res.items() if k != "solutions"}
    data["config_echo"] = cfg.echo()
    _write_json(out / "uniqueness.json", data)
    print(f"max_pairwise_dist {res['max_pairwise_dist']!r}")
    print(f"condition_holds   {res['condition_holds']}")
    print(f"mean_radius       {res['mean_radius']!r}")
    return 0


RUNNERS = {"capacity": run_capacity, "solve": run_solve, "verify": run_verify,
           "uniqueness": run_uniqueness}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caplow", description=__doc__.split("\n")[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="JSON run config")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread limit")
    ap.add_argument("--deterministic", action="store_true",
                    help="single-threaded run with byte-identical outputs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        cfg = replace(cfg, mode=args.mode)
        cfg.raw["mode"] = args.mode
        if args.mode == "solve" and cfg.M < 64:
            raise ValidationError(f"grid.M must be >= 64 for solve mode; got {cfg.M}")
        if args.mode == "uniqueness":
            _condition_path(cfg)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out if args.out is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = 1 if args.deterministic else args.threads
    np.random.seed(cfg.seed)

    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=threads):
            return RUNNERS[args.mode](cfg, out)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"solver failure ({exc.status}): {exc}", file=sys.stderr)
        return 1
    except CaplowError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
