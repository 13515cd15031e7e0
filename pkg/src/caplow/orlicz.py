"""Orlicz densities, their antiderivatives and the Orlicz norm.

Two families are supported:

* ``power``: ``phi(s) = s**(1 - pp)``; the antiderivative of ``1/phi`` is
  ``s**pp / pp`` and exists iff ``pp > 0``.
* ``table``: samples ``(s, phi(s))`` interpolated by a shape-preserving
  (PCHIP) cubic.  The antiderivative needs ``1/phi`` on all of ``(0, s)``;
  outside the table hull the density is continued by power laws matched to
  the end slopes (in log-log coordinates), used only by the antiderivative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.interpolate import PchipInterpolator

from .errors import (
    DivergentAntiderivative,
    EmptyMeasure,
    ExponentOutOfRange,
    NonPositiveArgument,
    OutOfTableRange,
)

DEFAULT_DOMAIN_FLOOR = 1e-8
GROWTH_PROBE = 1e6
QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class PhiSpec:
    """Orlicz density ``phi`` together with its metadata.

    Build instances with :meth:`power` or :meth:`table`.
    """

    family: str
    pp: float = 1.0
    samples: tuple = ()
    domain_floor: float = DEFAULT_DOMAIN_FLOOR
    _table: dict = field(default=None, compare=False, repr=False, hash=False)

    @classmethod
    def power(cls, pp: float, domain_floor: float = DEFAULT_DOMAIN_FLOOR) -> "PhiSpec":
        return cls(family="power", pp=float(pp), domain_floor=float(domain_floor))

    @classmethod
    def table(cls, samples: Sequence[Sequence[float]], domain_floor: float | None = None) -> "PhiSpec":
        arr = np.asarray(samples, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
            raise ValueError("table samples must be a list of at least two (s, phi) pairs")
        s, v = arr[:, 0], arr[:, 1]
        if np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ValueError("table abscissae must be positive and strictly increasing")
        if np.any(v <= 0):
            raise ValueError("table values must be positive")
        floor = float(s[0]) if domain_floor is None else float(domain_floor)
        if floor < s[0]:
            raise ValueError("domain_floor lies below the table hull")
        return cls(
            family="table",
            samples=tuple(map(tuple, arr.tolist())),
            domain_floor=floor,
            _table=_build_table(s, v),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "PhiSpec":
        family = d.get("family")
        if family == "power":
            return cls.power(d["pp"], d.get("domain_floor", DEFAULT_DOMAIN_FLOOR))
        if family == "table":
            return cls.table(d["samples"], d.get("domain_floor"))
        raise ValueError(f"unknown phi family {family!r}")

    def to_dict(self) -> dict:
        if self.family == "power":
            return {"family": "power", "pp": self.pp, "domain_floor": self.domain_floor}
        return {
            "family": "table",
            "samples": [list(row) for row in self.samples],
            "domain_floor": self.domain_floor,
        }

    def phi(self, s):
        return phi_eval(self, s)

    def varphi(self, s):
        return varphi_eval(self, s)


def _build_table(s, v):
    interp = PchipInterpolator(s, v, extrapolate=False)
    dinterp = interp.derivative()
    # log-log end slopes for the tail continuations
    lo_slope = float(s[0] * dinterp(s[0]) / v[0])
    hi_slope = float(s[-1] * dinterp(s[-1]) / v[-1])
    # cumulative integral of 1/phi at the table nodes, starting from s[0]
    cum = np.zeros(len(s))
    for k in range(1, len(s)):
        val, _ = quad(lambda t: 1.0 / interp(t), s[k - 1], s[k], epsrel=QUAD_RTOL, epsabs=0.0)
        cum[k] = cum[k - 1] + val
    return {"s": s, "v": v, "interp": interp, "lo": lo_slope, "hi": hi_slope, "cum": cum}


def _check_positive(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > 0)):
        raise NonPositiveArgument("phi is only defined for s > 0")
    return arr


def _maybe_scalar(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def phi_eval(spec: PhiSpec, s):
    """Evaluate the density ``phi`` at ``s`` (scalar or array)."""
    arr = _check_positive(s)
    if spec.family == "power":
        out = arr ** (1.0 - spec.pp)
    else:
        tab = spec._table
        if np.any(arr < spec.domain_floor) or np.any(arr > tab["s"][-1]):
            raise OutOfTableRange(
                f"s outside table hull [{spec.domain_floor}, {tab['s'][-1]}]"
            )
        out = tab["interp"](arr)
    return _maybe_scalar(out, s)


def _tail_integral(s0, v0, slope, a, b):
    """Integral of 1/phi over [a, b] for phi(t) = v0 * (t/s0)**slope."""
    e = 1.0 - slope
    if abs(e) < 1e-14:
        return s0 / v0 * math.log(b / a)
    return s0 / (v0 * e) * ((b / s0) ** e - (a / s0) ** e)


def _table_varphi(spec: PhiSpec, arr: np.ndarray) -> np.ndarray:
    tab = spec._table
    s, v, cum = tab["s"], tab["v"], tab["cum"]
    if tab["lo"] >= 1.0:
        raise DivergentAntiderivative(
            "1/phi is not integrable at 0 for this table (log-log slope at the "
            f"first sample is {tab['lo']:.4g} >= 1)"
        )
    head = s[0] / (v[0] * (1.0 - tab["lo"]))  # integral over (0, s[0]]
    out = np.empty_like(arr)
    below = arr <= s[0]
    above = arr >= s[-1]
    inside = ~(below | above)
    if np.any(below):
        out[below] = head * (arr[below] / s[0]) ** (1.0 - tab["lo"])
    if np.any(above):
        out[above] = head + cum[-1] + np.array(
            [_tail_integral(s[-1], v[-1], tab["hi"], s[-1], x) for x in arr[above]]
        )
    if np.any(inside):
        x = arr[inside]
        k = np.searchsorted(s, x, side="right") - 1
        a = s[k]
        width = x - a
        interp = tab["interp"]

        def integrand(u):
            return width / interp(a + u * width)

        part, _ = quad_vec(integrand, 0.0, 1.0, epsrel=QUAD_RTOL, epsabs=0.0)
        out[inside] = head + cum[k] + part
    return out


def varphi_eval(spec: PhiSpec, s):
    """Antiderivative of ``1/phi`` from 0 to ``s``.

    ``s = 0`` is accepted and maps to 0 whenever the integral converges.
    """
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr >= 0)):
        raise NonPositiveArgument("the antiderivative is only defined for s >= 0")
    if spec.family == "power":
        if spec.pp <= 0:
            raise DivergentAntiderivative(
                f"integral of t**({spec.pp - 1}) diverges at 0 for pp={spec.pp} <= 0"
            )
        out = arr**spec.pp / spec.pp
    else:
        flat = arr.reshape(-1)
        out = np.zeros_like(flat)
        pos = flat > 0
        if np.any(pos):
            out[pos] = _table_varphi(spec, flat[pos])
        out = out.reshape(arr.shape)
    return _maybe_scalar(out, s)


@dataclass
class GrowthReport:
    ok: bool
    report: str


def check_growth(spec: PhiSpec) -> GrowthReport:
    """Heuristic check that the antiderivative exists and is unbounded.

    Unboundedness is asymptotic and cannot be decided from finitely many
    evaluations; we accept when ``varphi(1e6) > 10 * varphi(1)``.
    """
    try:
        at_floor = varphi_eval(spec, spec.domain_floor)
        v1 = varphi_eval(spec, 1.0)
        vbig = varphi_eval(spec, GROWTH_PROBE)
    except DivergentAntiderivative as exc:
        return GrowthReport(False, f"antiderivative does not exist: {exc}")
    lines = [
        f"varphi(domain_floor={spec.domain_floor:g}) = {at_floor:.6g}",
        f"varphi(1) = {v1:.6g}",
        f"varphi({GROWTH_PROBE:g}) = {vbig:.6g}",
        "heuristic: unbounded growth is accepted when varphi(1e6) > 10*varphi(1); "
        "the true condition is asymptotic and is not decidable from samples",
    ]
    ok = bool(np.isfinite(vbig) and vbig > 10.0 * v1)
    lines.append("growth check passed" if ok else "growth check FAILED")
    return GrowthReport(ok, "\n".join(lines))


def check_uniqueness_condition(spec: PhiSpec, p: float, n: int, deltas, svals) -> bool:
    """Sampled test of ``phi(d*s) <= d**(p+1-n) * phi(s)`` for ``d >= 1``."""
    if not (1.0 < p <= n - 1):
        raise ExponentOutOfRange(f"p={p} is outside (1, n-1] = (1, {n - 1}]")
    d = np.asarray(deltas, dtype=float).reshape(-1, 1)
    s = np.asarray(svals, dtype=float).reshape(1, -1)
    if np.any(d < 1):
        raise ValueError("all deltas must be >= 1")
    if np.any(s <= 0):
        raise NonPositiveArgument("all s values must be > 0")
    lhs = np.asarray(phi_eval(spec, d * s))
    rhs = d ** (p + 1.0 - n) * np.asarray(phi_eval(spec, np.broadcast_to(s, lhs.shape)))
    return bool(np.all(lhs <= rhs * (1.0 + 1e-12)))


def orlicz_norm(fvals, weights, spec: PhiSpec, rtol: float = 1e-10) -> float:
    """Orlicz norm of ``fvals`` against the discrete measure ``weights``.

    Solves ``sum(w * varphi(f/lam)) / sum(w) = varphi(1)`` for ``lam`` by
    bisection; the left side is strictly decreasing in ``lam``.
    """
    f = np.asarray(fvals, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.shape != w.shape:
        raise ValueError("fvals and weights must have the same shape")
    if np.any(f < 0) or np.any(w < 0):
        raise ValueError("fvals and weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise EmptyMeasure("the measure has zero total mass")
    support = w > 0
    fs, ws = f[support], w[support] / total
    fmax = fs.max()
    if fmax == 0:
        return 0.0
    target = varphi_eval(spec, 1.0)

    def excess(lam):
        return float(np.dot(ws, varphi_eval(spec, fs / lam))) - target

    lo, hi = fmax * 1e-8, fmax * (1.0 + 1e-8)
    while excess(lo) <= 0:
        lo *= 1e-3
    while excess(hi) > 0:
        hi *= 2.0
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
