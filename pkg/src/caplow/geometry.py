"""Support functions sampled on a one-dimensional sphere grid.

Two settings share the same code path:

``n = 2``
    full circle, ``theta_i = 2*pi*i/M``, periodic.
``n = 3``
    bodies of revolution about the z axis; ``theta`` is the angle of the
    normal from the north pole on the midpoint grid ``theta_i = pi*(i+1/2)/M``,
    so ``cot(theta)`` is never evaluated at a pole.  Functions are extended
    evenly across both poles.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from .errors import GridTooCoarse, NonConvex
from .orlicz import PhiSpec, varphi_eval

MIN_POINTS = 16
CONVEXITY_RTOL = 1e-10


@lru_cache(maxsize=32)
def _grid(n: int, M: int) -> np.ndarray:
    if n == 2:
        theta = 2.0 * np.pi * np.arange(M) / M
    elif n == 3:
        theta = np.pi * (np.arange(M) + 0.5) / M
    else:
        raise ValueError(f"dimension n={n} is not supported (use 2 or 3)")
    theta.setflags(write=False)
    return theta


def sphere_grid(n: int, M: int) -> np.ndarray:
    """Grid angles for dimension ``n`` with ``M`` points (read-only array)."""
    return _grid(int(n), int(M))


@lru_cache(maxsize=32)
def _weights(n: int, M: int) -> np.ndarray:
    if n == 2:
        w = np.full(M, 2.0 * np.pi / M)
    else:
        # Fejer's first rule on the midpoint (Chebyshev) nodes: exact for
        # integral_0^pi g(theta) sin(theta) dtheta with g a cosine polynomial
        # of degree < M.
        theta = _grid(3, M)
        j = np.arange(1, M // 2 + 1)
        s = np.cos(2.0 * np.outer(theta, j)) / (4.0 * j**2 - 1.0)
        w = (2.0 / M) * (1.0 - 2.0 * s.sum(axis=1))
        w = 2.0 * np.pi * w
    w.setflags(write=False)
    return w


def sphere_weights(n: int, M: int) -> np.ndarray:
    """Quadrature weights so that ``weights @ g`` integrates ``g`` over the sphere."""
    return _weights(int(n), int(M))


@dataclass(frozen=True)
class SupportFunction:
    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.n not in (2, 3):
            raise ValueError(f"dimension n={self.n} is not supported (use 2 or 3)")
        if vals.ndim != 1:
            raise ValueError("support function samples must be one-dimensional")
        if np.any(~(vals > 0)):
            raise NonConvex("support function must be positive (origin in the interior)")

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return sphere_grid(self.n, self.M)

    def with_values(self, values) -> "SupportFunction":
        return SupportFunction(self.n, values)

    def scaled(self, c: float) -> "SupportFunction":
        return SupportFunction(self.n, c * self.values)

    @classmethod
    def from_function(cls, n: int, M: int, func) -> "SupportFunction":
        return cls(n, func(sphere_grid(n, M)))

    @classmethod
    def ball(cls, n: int, M: int, radius: float = 1.0) -> "SupportFunction":
        return cls(n, np.full(M, float(radius)))

    @classmethod
    def cosine_series(cls, n: int, M: int, coeffs) -> "SupportFunction":
        return cls(n, cosine_series(sphere_grid(n, M), coeffs))


@dataclass(frozen=True)
class DataFunction:
    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if np.any(~(vals > 0)):
            raise ValueError("data function must be positive")

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant(cls, n: int, M: int, value: float = 1.0) -> "DataFunction":
        return cls(n, np.full(M, float(value)))

    @classmethod
    def cosine_series(cls, n: int, M: int, coeffs) -> "DataFunction":
        return cls(n, cosine_series(sphere_grid(n, M), coeffs))


@dataclass(frozen=True)
class BoundarySample:
    """Boundary points ``F_i`` with their outward unit normals ``xi_i``.

    For ``n = 3`` coordinates are ``(rho, z)`` in the meridian half-plane.
    """

    points: np.ndarray
    normals: np.ndarray


def cosine_series(theta, coeffs) -> np.ndarray:
    """``sum_k coeffs[k] * cos(k*theta)``."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros_like(theta)
    for k, c in enumerate(coeffs):
        out += c * np.cos(k * theta)
    return out


def derivatives(h: SupportFunction):
    """First and second angular derivatives by 4th-order central differences."""
    M = h.M
    if M < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points, got {M}")
    if h.n == 2:
        v = np.pad(h.values, 2, mode="wrap")
        d = 2.0 * np.pi / M
    else:
        # even reflection across both poles of the midpoint grid
        v = np.pad(h.values, 2, mode="symmetric")
        d = np.pi / M
    m2, m1, c, p1, p2 = v[:-4], v[1:-3], v[2:-2], v[3:-1], v[4:]
    d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * d)
    d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * d * d)
    return d1, d2


@lru_cache(maxsize=16)
def derivative_matrices(n: int, M: int):
    """Sparse matrices ``(D1, D2)`` applying the stencils of :func:`derivatives`."""
    import scipy.sparse as sp

    if M < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points, got {M}")
    d = 2.0 * np.pi / M if n == 2 else np.pi / M
    rows, cols, v1, v2 = [], [], [], []
    w1 = (1.0, -8.0, 0.0, 8.0, -1.0)
    w2 = (-1.0, 16.0, -30.0, 16.0, -1.0)
    i = np.arange(M)
    for off, a, b in zip(range(-2, 3), w1, w2):
        j = i + off
        if n == 2:
            j = j % M
        else:
            j = np.where(j < 0, -j - 1, j)
            j = np.where(j >= M, 2 * M - 1 - j, j)
        rows.append(i)
        cols.append(j)
        v1.append(np.full(M, a / (12.0 * d)))
        v2.append(np.full(M, b / (12.0 * d * d)))
    r, c = np.concatenate(rows), np.concatenate(cols)
    D1 = sp.csr_matrix((np.concatenate(v1), (r, c)), shape=(M, M))
    D2 = sp.csr_matrix((np.concatenate(v2), (r, c)), shape=(M, M))
    return D1, D2


def sigma_linearization(h: SupportFunction, derivs=None):
    """Sparse derivative of ``sigma(h)`` with respect to the samples of ``h``."""
    import scipy.sparse as sp

    D1, D2 = derivative_matrices(h.n, h.M)
    eye = sp.identity(h.M, format="csr")
    if h.n == 2:
        return D2 + eye
    r1, r2 = curvature_radii(h, derivs)
    cot = sp.diags(1.0 / np.tan(h.theta))
    return sp.diags(r2) @ (D2 + eye) + sp.diags(r1) @ (cot @ D1 + eye)


def curvature_radii(h: SupportFunction, derivs=None):
    """Principal radii of curvature; a tuple of one (n=2) or two (n=3) arrays."""
    d1, d2 = derivatives(h) if derivs is None else derivs
    meridian = d2 + h.values
    if h.n == 2:
        return (meridian,)
    theta = h.theta
    return (meridian, d1 / np.tan(theta) + h.values)


def sigma(h: SupportFunction, derivs=None, check: bool = True) -> np.ndarray:
    """Product of principal radii ``sigma_{n-1}`` (reciprocal Gauss curvature)."""
    radii = curvature_radii(h, derivs)
    out = radii[0] if h.n == 2 else radii[0] * radii[1]
    if check:
        floor = CONVEXITY_RTOL * h.values.max() ** (h.n - 1)
        bad = [r for r in radii if np.any(r <= 0)]
        if bad or np.min(out) <= floor:
            i = int(np.argmin(out))
            raise NonConvex(
                f"body is not strictly convex: sigma min {out[i]:.3e} at theta={h.theta[i]:.4f}"
            )
    return out


def gauss_curvature(h: SupportFunction) -> np.ndarray:
    return 1.0 / sigma(h)


def radial(h: SupportFunction, derivs=None) -> np.ndarray:
    """Distance from the origin of the boundary point with normal ``xi_i``."""
    d1, _ = derivatives(h) if derivs is None else derivs
    return np.hypot(h.values, d1)


def _frame(n, theta):
    if n == 2:
        normal = np.column_stack([np.cos(theta), np.sin(theta)])
        tangent = np.column_stack([-np.sin(theta), np.cos(theta)])
    else:
        # (rho, z): normal at polar angle theta and the meridian tangent d/dtheta
        normal = np.column_stack([np.sin(theta), np.cos(theta)])
        tangent = np.column_stack([np.cos(theta), -np.sin(theta)])
    return normal, tangent


def boundary(h: SupportFunction, derivs=None, check: bool = True) -> BoundarySample:
    """Inverse Gauss map ``F = h*xi + h' * e_theta`` sampled on the grid."""
    if derivs is None:
        derivs = derivatives(h)
    if check:
        sigma(h, derivs)
    normal, tangent = _frame(h.n, h.theta)
    pts = h.values[:, None] * normal + derivs[0][:, None] * tangent
    return BoundarySample(points=pts, normals=normal)


def sphere_integral(g, n: int) -> float:
    """Integral over the unit sphere of grid samples ``g``.

    ``n = 2`` uses the periodic trapezoid rule; ``n = 3`` uses Fejer's first
    rule in the polar angle (exact for cosine polynomials of degree < M).
    """
    g = np.asarray(g, dtype=float)
    return float(sphere_weights(n, g.shape[0]) @ g)


def weighted_mean_cv(samples, n: int):
    """Sphere-measure weighted mean and coefficient of variation."""
    w = sphere_weights(n, len(samples))
    w = w / w.sum()
    mean = float(w @ samples)
    var = float(w @ (samples - mean) ** 2)
    return mean, float(np.sqrt(max(var, 0.0)) / abs(mean))


def functional_Phi(h: SupportFunction, f: DataFunction, spec: PhiSpec) -> float:
    """Conserved functional: integral of ``varphi(h)/f`` over the sphere."""
    return sphere_integral(np.asarray(varphi_eval(spec, h.values)) / f.values, h.n)


def total_Sp(h: SupportFunction, sig, p: float) -> float:
    """Total mass of the p-surface area measure, integral of ``h**(1-p) sigma``."""
    return sphere_integral(h.values ** (1.0 - p) * np.asarray(sig), h.n)


def pole_values(h: SupportFunction):
    """Values of an n=3 support function at theta = 0 and theta = pi.

    Evaluated from the cosine series interpolating the midpoint samples.
    """
    if h.n != 3:
        raise ValueError("pole values only exist for n = 3")
    a = _dct_coeffs(h.values)
    signs = (-1.0) ** np.arange(a.shape[0])
    return float(a.sum()), float(a @ signs)


def _dct_coeffs(values):
    M = values.shape[0]
    X = fft.dct(values, type=2)
    a = X / M
    a[0] *= 0.5
    return a


def resample(h: SupportFunction, M_new: int) -> SupportFunction:
    """Spectrally interpolate ``h`` onto the grid with ``M_new`` points.

    Trigonometric interpolation for n=2, cosine series for n=3.
    """
    if h.n == 2:
        M = h.M
        c = fft.rfft(h.values) / M
        if M % 2 == 0:
            c[-1] *= 0.5  # split the Nyquist mode symmetrically
        theta = sphere_grid(2, M_new)
        k = np.arange(c.shape[0])
        vals = c[0].real + 2.0 * (
            np.cos(np.outer(theta, k[1:])) @ c[1:].real - np.sin(np.outer(theta, k[1:])) @ c[1:].imag
        )
        return SupportFunction(2, vals)
    a = _dct_coeffs(h.values)
    return SupportFunction(3, cosine_series(sphere_grid(3, M_new), a))


def read_csv(path, n: int) -> SupportFunction:
    """Read a ``theta,h`` CSV written by :func:`write_csv`."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names[:2] != ("theta", "h"):
        raise ValueError("support function CSV must have header 'theta,h'")
    h = SupportFunction(n, np.atleast_1d(data["h"]))
    if not np.allclose(np.atleast_1d(data["theta"]), h.theta, rtol=0, atol=1e-9):
        raise ValueError("CSV angles do not match the standard grid")
    return h


def write_csv(path, h: SupportFunction) -> None:
    with open(path, "w") as fh:
        fh.write("theta,h\n")
        for t, v in zip(h.theta, h.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
