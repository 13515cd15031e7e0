"""Normalized inverse Gauss curvature flow for support functions.

The support function evolves by

    dh/dt = f * h * phi(h) * |grad Psi|^p * sigma - gamma(t) * h,

where ``Psi`` is the equilibrium potential of the current body and
``gamma`` is chosen so that ``Phi = int varphi(h)/f`` stays constant.  The
potential is frozen over a step and ``gamma`` is recomputed at each stage
from the stage body, which keeps the semi-discrete rate of ``Phi`` exactly
zero.

The curvature term makes the system parabolic, so explicit stepping is only
stable for ``dt = O(1/M^2)``.  The default integrator is the linearly
implicit two-stage Rosenbrock scheme ROS2 with the frozen-coefficient
curvature Jacobian; being a W-method it is second order for any Jacobian
approximation.  Explicit Heun remains available for small steps.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import geometry, plaplace
from .errors import CaplowError, NonConvex, ProbeInsideBody, StepFailure
from .geometry import DataFunction, SupportFunction
from .orlicz import PhiSpec, phi_eval
from .plaplace import PLaplaceParams, PotentialSolution

log = logging.getLogger(__name__)

RECORD_COLUMNS = (
    "step", "t", "dt", "gamma", "cp_energy", "cp_poincare", "phi", "h_min", "h_max",
    "sigma_min", "sigma_max", "g_min", "g_max", "tau_hat", "residual_cv", "picard_iters",
)

CONVERGED = "Converged"
TIMEOUT = "TimeOut"
FAILED = "Failed"
ABORTED = "Aborted"


@dataclass(frozen=True)
class FlowSettings:
    dt_max: float = 1e-2
    cfl: float = 0.1
    t_max: float = 100.0
    residual_cv_tol: float = 1e-2
    max_rejections: int = 20
    blowup_factor: float = 1e3
    integrator: str = "ros2"


class DiagnosticsRecord:
    """Append-only table with one row per accepted step (row 0 is the initial state)."""

    columns = RECORD_COLUMNS

    def __init__(self):
        self._rows: list[tuple] = []

    def append(self, row: dict) -> None:
        self._rows.append(tuple(row[c] for c in self.columns))

    def __len__(self) -> int:
        return len(self._rows)

    def __getitem__(self, i) -> dict:
        return dict(zip(self.columns, self._rows[i]))

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self._rows], dtype=float)

    def last(self) -> dict:
        return self[-1]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self._rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class FlowState:
    t: float
    h: SupportFunction
    sigma: np.ndarray
    potential: PotentialSolution
    potential_step: int
    gamma: float
    step: int = 0
    record: DiagnosticsRecord = field(default_factory=DiagnosticsRecord, repr=False)


@dataclass
class Residual:
    samples: np.ndarray
    tau_hat: float
    cv: float


@dataclass
class RunResult:
    trajectory: DiagnosticsRecord
    final: FlowState
    status: str
    message: str = ""
    initial_max_h: float = 0.0


# --------------------------------------------------------------------------
# pointwise pieces


def _gamma(h: SupportFunction, sig, g, f: DataFunction, spec: PhiSpec, p: float) -> float:
    a = plaplace.decay_exponent(h.n, p)
    cp = plaplace.capacity_poincare(h, g, sig, p)
    denom = geometry.sphere_integral(h.values / (f.values * phi_eval(spec, h.values)), h.n)
    return a * cp / denom


def gamma_of(state: FlowState, f: DataFunction, spec: PhiSpec, p: float, n: int | None = None) -> float:
    """Normalizing speed ``(n-p)/(p-1) * C_p / int h/(f phi(h))``."""
    return _gamma(state.h, state.sigma, state.potential.g, f, spec, p)


def rhs(h: SupportFunction, f: DataFunction, spec: PhiSpec, g, sigma, gamma: float, p: float):
    """Pointwise speed ``f h phi(h) g^p sigma - gamma h``."""
    hv = h.values
    return f.values * hv * phi_eval(spec, hv) * np.asarray(g) ** p * np.asarray(sigma) - gamma * hv


def residual_samples(h, f, spec, g, sig, p):
    return f.values * phi_eval(spec, h.values) * np.asarray(g) ** p * np.asarray(sig)


def residual(state: FlowState, f: DataFunction, spec: PhiSpec, p: float) -> Residual:
    """Samples of ``f phi(h) |grad Psi|^p sigma``; constant exactly at a solution."""
    s = residual_samples(state.h, f, spec, state.potential.g, state.sigma, p)
    tau, cv = geometry.weighted_mean_cv(s, state.h.n)
    return Residual(samples=s, tau_hat=tau, cv=cv)


# --------------------------------------------------------------------------
# state handling


def _row(state: FlowState, f, spec, p, dt) -> dict:
    pot = state.potential
    res = residual(state, f, spec, p)
    cp_p = plaplace.capacity_poincare(state.h, pot.g, state.sigma, p)
    return {
        "step": state.step,
        "t": state.t,
        "dt": dt,
        "gamma": state.gamma,
        "cp_energy": pot.capacity_energy,
        "cp_poincare": cp_p,
        "phi": geometry.functional_Phi(state.h, f, spec),
        "h_min": float(state.h.values.min()),
        "h_max": float(state.h.values.max()),
        "sigma_min": float(state.sigma.min()),
        "sigma_max": float(state.sigma.max()),
        "g_min": float(pot.g.min()),
        "g_max": float(pot.g.max()),
        "tau_hat": res.tau_hat,
        "residual_cv": res.cv,
        "picard_iters": pot.iterations,
    }


def initial_state(h0: SupportFunction, f: DataFunction, spec: PhiSpec, p: float,
                  params: PLaplaceParams | None = None) -> FlowState:
    params = params or PLaplaceParams()
    if f.M != h0.M:
        raise ValueError("data function and support function use different grids")
    sig = geometry.sigma(h0)
    pot = plaplace.solve_body(h0, p, params)
    gam = _gamma(h0, sig, pot.g, f, spec, p)
    state = FlowState(t=0.0, h=h0, sigma=sig, potential=pot, potential_step=0, gamma=gam)
    state.record.append(_row(state, f, spec, p, 0.0))
    return state


ROS2_GAMMA = 1.0 + 1.0 / math.sqrt(2.0)


def _stage(hv, n, g, f, spec, p):
    """Speed at a trial body, or None when the body is not admissible."""
    if np.any(~(hv > 0)):
        return None
    try:
        h = SupportFunction(n, hv)
        sig = geometry.sigma(h)
    except NonConvex:
        return None
    gam = _gamma(h, sig, g, f, spec, p)
    return rhs(h, f, spec, g, sig, gam, p)


def speed_jacobian(h: SupportFunction, f: DataFunction, spec: PhiSpec, g, gamma: float, p: float):
    """Stiff part of the Jacobian of :func:`rhs`: ``diag(f h phi g^p) dsigma/dh - gamma``."""
    c = f.values * h.values * phi_eval(spec, h.values) * np.asarray(g) ** p
    return sp.diags(c) @ geometry.sigma_linearization(h) - gamma * sp.identity(h.M)


def _propose(state, f, spec, p, dt, k1, integrator):
    """Trial support values after one step of size ``dt`` (None if inadmissible)."""
    n = state.h.n
    g = state.potential.g
    h = state.h.values
    if integrator == "heun":
        k2 = _stage(h + dt * k1, n, g, f, spec, p)
        if k2 is None:
            return None
        return h + 0.5 * dt * (k1 + k2)
    J = speed_jacobian(state.h, f, spec, g, state.gamma, p)
    W = splu((sp.identity(state.h.M) - (ROS2_GAMMA * dt) * J).tocsc())
    r1 = W.solve(k1)
    F2 = _stage(h + dt * r1, n, g, f, spec, p)
    if F2 is None:
        return None
    r2 = W.solve(F2 - 2.0 * r1)
    return h + dt * (1.5 * r1 + 0.5 * r2)


def step(state: FlowState, f: DataFunction, spec: PhiSpec, p: float,
         settings: FlowSettings | None = None, params: PLaplaceParams | None = None) -> FlowState:
    """Advance one accepted step; the returned state shares the record."""
    settings = settings or FlowSettings()
    if settings.integrator not in ("ros2", "heun"):
        raise ValueError(f"unknown integrator {settings.integrator!r}")
    params = params or state.potential.params
    n = state.h.n
    h = state.h.values
    k1 = rhs(state.h, f, spec, state.potential.g, state.sigma, state.gamma, p)
    speed = float(np.max(np.abs(k1)))
    dt = settings.dt_max
    if speed > 0:
        dt = min(dt, settings.cfl * float(h.min()) / speed)
    next_step = state.step + 1
    resolve = next_step % max(1, params.solve_every) == 0
    for _ in range(settings.max_rejections):
        hv = _propose(state, f, spec, p, dt, k1, settings.integrator)
        if hv is None or np.any(~(hv > 0)):
            dt *= 0.5
            continue
        try:
            hn = SupportFunction(n, hv)
            sig = geometry.sigma(hn)
            if resolve:
                pot = plaplace.solve_body(hn, p, params, initial=state.potential.psi)
                pot_step = next_step
            else:
                pot, pot_step = state.potential, state.potential_step
        except CaplowError as exc:
            log.debug("step rejected at dt=%g: %s", dt, exc)
            dt *= 0.5
            continue
        gam = _gamma(hn, sig, pot.g, f, spec, p)
        new = FlowState(t=state.t + dt, h=hn, sigma=sig, potential=pot, potential_step=pot_step,
                        gamma=gam, step=next_step, record=state.record)
        new.record.append(_row(new, f, spec, p, dt))
        return new
    raise StepFailure(f"{settings.max_rejections} consecutive step rejections at t={state.t:.6g}")


def run(h0: SupportFunction, f: DataFunction, spec: PhiSpec, p: float,
        settings: FlowSettings | None = None, params: PLaplaceParams | None = None,
        callback=None) -> RunResult:
    """Integrate until the residual is flat, time runs out, or a step fails.

    ``callback(state)`` is invoked on the initial state and after every
    accepted step.
    """
    settings = settings or FlowSettings()
    params = params or PLaplaceParams()
    state = initial_state(h0, f, spec, p, params)
    hmax0 = float(h0.values.max())
    if callback is not None:
        callback(state)
    status, message = None, ""
    while status is None:
        row = state.record.last()
        if state.t >= settings.t_max:
            status, message = TIMEOUT, f"reached t_max={settings.t_max:g} after {state.step} steps"
            break
        if state.potential_step == state.step and row["residual_cv"] <= settings.residual_cv_tol:
            status, message = CONVERGED, f"residual cv {row['residual_cv']:.3e} after {state.step} steps"
            break
        try:
            state = step(state, f, spec, p, settings, params)
        except CaplowError as exc:
            status, message = FAILED, f"{type(exc).__name__}: {exc}"
            break
        if callback is not None:
            callback(state)
        if state.h.values.max() > settings.blowup_factor * hmax0:
            status = ABORTED
            message = (f"monitor: max h {state.h.values.max():.4g} exceeds "
                       f"{settings.blowup_factor:g} x initial {hmax0:.4g}")
    log.info("flow finished: %s (%s)", status, message)
    return RunResult(trajectory=state.record, final=state, status=status, message=message,
                     initial_max_h=hmax0)


# --------------------------------------------------------------------------
# diagnostics


def _inside(x, h: SupportFunction, normals) -> np.ndarray:
    """Points whose projection on every grid normal stays below the support value."""
    proj = x @ normals.T
    return np.all(proj <= h.values[None, :] * (1.0 + 1e-12), axis=1)


def check_potential_evolution(before: FlowState, after: FlowState, probe_offset: float) -> float:
    """Compare the time derivative of ``Psi`` at fixed probe points with ``g * dh/dt``.

    Probes sit at ``F_i + probe_offset * xi_i`` on the earlier body.  Returns
    the largest absolute discrepancy; diagnostic only.
    """
    dt = after.t - before.t
    if dt <= 0:
        raise ValueError("states must be in increasing time order")
    b = geometry.boundary(before.h, check=False)
    x = b.points + probe_offset * b.normals
    for st in (before, after):
        if np.any(_inside(x, st.h, b.normals)):
            raise ProbeInsideBody("a probe point lies inside one of the bodies")
    cols = np.arange(before.h.M) + (1 if before.h.n == 3 else 0)
    pb = plaplace.evaluate(before.potential, x, near_cols=cols)
    pa = plaplace.evaluate(after.potential, x, near_cols=cols)
    lhs = (pa - pb) / dt
    dhdt = (after.h.values - before.h.values) / dt
    g = 0.5 * (before.potential.g + after.potential.g)
    return float(np.nanmax(np.abs(lhs - g * dhdt)))
