"""High-level entry points: the Orlicz-Minkowski solve and uniqueness runs.

A solve runs the normalized flow to stationarity, reports ``tau`` as the
weighted mean of the residual samples and re-checks the stationary equation
on a twice finer angular grid and exterior mesh.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import flow, geometry, plaplace
from .errors import ExponentOutOfRange, NotConverged, PhiMismatch, ValidationError
from .flow import FlowSettings, FlowState, RunResult
from .geometry import DataFunction, SupportFunction
from .orlicz import PhiSpec, check_growth, check_uniqueness_condition
from .plaplace import PLaplaceParams

log = logging.getLogger(__name__)

SOLUTION_COLUMNS = ("theta", "h", "g", "sigma", "residual")
PHI_ALIGN_RTOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    flow: FlowSettings = field(default_factory=FlowSettings)
    plaplace: PLaplaceParams = field(default_factory=PLaplaceParams)
    refine: int = 2


@dataclass
class MinkowskiSolution:
    body: SupportFunction
    tau: float
    mu_p: np.ndarray
    verification: dict
    result: RunResult = field(repr=False, default=None)


def _check_inputs(f: DataFunction, spec: PhiSpec, p: float, n: int, init: SupportFunction):
    report = check_growth(spec)
    if not report.ok:
        raise ValidationError("phi fails the growth check:\n" + report.report)
    if not (1.0 < p < n):
        raise ValidationError(f"p must lie in (1,n); got p={p}, n={n}")
    if init.n != n or f.n != n:
        raise ValidationError("dimension of f or init does not match n")
    if f.M != init.M:
        raise ValidationError("f and init use different grids")


def refine_data(f: DataFunction, M_new: int) -> DataFunction:
    """Spectral resampling of positive data onto a finer grid."""
    vals = geometry.resample(SupportFunction(f.n, f.values), M_new).values
    return DataFunction(f.n, vals)


def fine_check(h: SupportFunction, f: DataFunction, spec: PhiSpec, p: float,
               params: PLaplaceParams, factor: int = 2) -> dict:
    """Residual of the stationary equation recomputed on a refined grid and mesh."""
    hf = geometry.resample(h, factor * h.M)
    ff = refine_data(f, hf.M)
    sig = geometry.sigma(hf)
    pot = plaplace.solve_body(hf, p, params.refined(factor))
    s = flow.residual_samples(hf, ff, spec, pot.g, sig, p)
    tau, cv = geometry.weighted_mean_cv(s, h.n)
    return {"tau": tau, "cv": cv, "capacity": plaplace.capacity_poincare(hf, pot.g, sig, p)}


def solve_minkowski(f: DataFunction, spec: PhiSpec, p: float, n: int, init: SupportFunction,
                    config: SolverConfig | None = None, callback=None) -> MinkowskiSolution:
    """Run the flow from ``init`` and package the stationary body.

    Raises :class:`NotConverged` (carrying the trajectory) unless the run
    reaches the residual tolerance.
    """
    config = config or SolverConfig()
    _check_inputs(f, spec, p, n, init)
    result = flow.run(init, f, spec, p, config.flow, config.plaplace, callback=callback)
    if result.status != flow.CONVERGED:
        raise NotConverged(result.message, trajectory=result.trajectory, status=result.status)
    final = result.final
    res = flow.residual(final, f, spec, p)
    fine = fine_check(final.h, f, spec, p, config.plaplace, config.refine)
    tol = config.flow.residual_cv_tol
    shift = abs(fine["tau"] / res.tau_hat - 1.0)
    traj = result.trajectory
    verification = {
        "residual_cv": res.cv,
        "capacity": plaplace.capacity_poincare(final.h, final.potential.g, final.sigma, p),
        "capacity_energy": final.potential.capacity_energy,
        "Phi_initial": float(traj[0]["phi"]),
        "Phi_final": geometry.functional_Phi(final.h, f, spec),
        "fine_tau": fine["tau"],
        "fine_cv": fine["cv"],
        "tau_shift": shift,
        "passed": bool(shift <= 0.02 and fine["cv"] <= 2.0 * tol),
    }
    if not verification["passed"]:
        log.warning("fine-mesh re-verification failed: tau shift %.3g, cv %.3g", shift, fine["cv"])
    return MinkowskiSolution(
        body=final.h,
        tau=res.tau_hat,
        mu_p=plaplace.mu_p_density(final.potential.g, final.sigma, p),
        verification=verification,
        result=result,
    )


# --------------------------------------------------------------------------
# uniqueness


def _dilation_for(h: SupportFunction, f: DataFunction, spec: PhiSpec, target: float) -> float:
    phi0 = geometry.functional_Phi(h, f, spec)
    if spec.family == "power":
        return (target / phi0) ** (1.0 / spec.pp)
    lo, hi = 1.0, 1.0
    for _ in range(200):
        if geometry.functional_Phi(h.scaled(lo), f, spec) <= target:
            break
        lo *= 0.5
    else:
        raise PhiMismatch("cannot bracket the dilation factor from below")
    for _ in range(200):
        if geometry.functional_Phi(h.scaled(hi), f, spec) >= target:
            break
        hi *= 2.0
    else:
        raise PhiMismatch("Phi stays below the target under dilation")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if geometry.functional_Phi(h.scaled(mid), f, spec) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def align_inits(inits, f: DataFunction, spec: PhiSpec) -> list[SupportFunction]:
    """Dilate every init so that its ``Phi`` equals that of the first one."""
    if not inits:
        raise ValueError("at least one init is required")
    target = geometry.functional_Phi(inits[0], f, spec)
    out = [inits[0]]
    for h in inits[1:]:
        if h.n != inits[0].n or h.M != inits[0].M:
            raise PhiMismatch("inits live on different grids")
        hs = h.scaled(_dilation_for(h, f, spec, target))
        got = geometry.functional_Phi(hs, f, spec)
        if abs(got / target - 1.0) > PHI_ALIGN_RTOL:
            raise PhiMismatch(f"Phi alignment reached only {abs(got / target - 1.0):.3g}")
        out.append(hs)
    return out


def condition_predicate(spec: PhiSpec, p: float, n: int, num: int = 25) -> bool:
    """Sampled uniqueness condition on log-spaced dilations and arguments."""
    if spec.family == "power":
        lo, hi = 1e-3, 1e3
    else:
        s = np.asarray(spec.samples)[:, 0]
        lo, hi = max(spec.domain_floor, s[0]), s[-1]
    dmax = min(10.0, np.sqrt(hi / lo))
    deltas = np.geomspace(1.0, dmax, num)
    svals = np.geomspace(lo, hi / dmax, num)
    return check_uniqueness_condition(spec, p, n, deltas, svals)


def mean_radius(h: SupportFunction) -> float:
    return geometry.sphere_integral(h.values, h.n) / geometry.sphere_integral(np.ones(h.M), h.n)


def uniqueness_experiment(f: DataFunction, spec: PhiSpec, p: float, n: int, inits,
                          config: SolverConfig | None = None, check_condition: bool = True,
                          callback=None) -> dict:
    """Solve from several Phi-aligned inits and measure how far the limits differ."""
    config = config or SolverConfig()
    holds = None
    if check_condition:
        if n - 1 <= 1:
            raise ExponentOutOfRange(f"the range (1, n-1] is empty for n={n}")
        holds = condition_predicate(spec, p, n)
    aligned = align_inits(list(inits), f, spec)
    sols = [solve_minkowski(f, spec, p, n, h, config, callback) for h in aligned]
    bodies = [s.body.values for s in sols]
    R = float(np.mean([mean_radius(s.body) for s in sols]))
    dist = 0.0
    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            dist = max(dist, float(np.abs(bodies[i] - bodies[j]).max()) / R)
    return {
        "max_pairwise_dist": dist,
        "condition_holds": holds,
        "mean_radius": R,
        "taus": [s.tau for s in sols],
        "cv_rises": [cv_rises(s.result.trajectory) for s in sols],
        "solutions": sols,
    }


def cv_rises(record, rtol: float = 1e-3) -> int:
    """Number of steps where the residual cv grew; a settling run has none.

    Repeated rises flag a trajectory that may be wandering between limit
    points rather than converging.
    """
    cv = record.column("residual_cv")
    return int(np.count_nonzero(cv[1:] > cv[:-1] * (1.0 + rtol)))


# --------------------------------------------------------------------------
# export


def write_solution_csv(path, state: FlowState, f: DataFunction, spec: PhiSpec, p: float) -> None:
    s = flow.residual_samples(state.h, f, spec, state.potential.g, state.sigma, p)
    cols = (state.h.theta, state.h.values, state.potential.g, state.sigma, s)
    with open(path, "w") as fh:
        fh.write(",".join(SOLUTION_COLUMNS) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def summary(result: RunResult, f: DataFunction, spec: PhiSpec, p: float, config_echo=None) -> dict:
    st = result.final
    res = flow.residual(st, f, spec, p)
    return {
        "tau": res.tau_hat,
        "cp": plaplace.capacity_poincare(st.h, st.potential.g, st.sigma, p),
        "phi": geometry.functional_Phi(st.h, f, spec),
        "cv": res.cv,
        "status": result.status,
        "config_echo": config_echo,
    }


def write_summary(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_dict(config: SolverConfig) -> dict:
    return asdict(config)


__all__ = [
    "MinkowskiSolution", "SolverConfig", "align_inits", "condition_predicate", "cv_rises", "fine_check",
    "mean_radius", "refine_data", "solve_minkowski", "summary", "uniqueness_experiment",
    "write_solution_csv", "write_summary",
]
