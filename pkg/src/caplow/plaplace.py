"""Exterior p-Laplace problem, boundary gradient trace and p-capacity.

The exterior of the body is truncated at a circle (n=2) or sphere (n=3) of
radius ``R_out`` and covered by a layered structured mesh: layer 0 is the
body boundary sampled at the sphere-grid normals, layer ``N_rad`` the outer
boundary, and the nodes of column ``j`` lie on the segment from ``F_j`` to
``R_out * xi_j``.  Each quadrilateral is split into two linear triangles.
For n=3 the problem is posed in the meridian half-plane ``(rho, z)`` with
the ``2*pi*rho`` volume weight; two extra columns sit on the symmetry axis.

The regularized weak problem

    div((|grad u|^2 + eps^2)^((p-2)/2) grad u) = 0

is solved by Newton's method (default) or by Picard iteration with a
frozen coefficient; Newton falls back to Picard if its updates stop
shrinking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import geometry
from .errors import ExponentOutOfRange, MeshFailure, NoConvergence
from .geometry import BoundarySample, SupportFunction


@dataclass(frozen=True)
class PLaplaceParams:
    R_out_factor: float = 10.0
    N_rad: int = 64
    grading: float = 1.05
    eps_reg: float = 1e-8
    picard_tol: float = 1e-10
    picard_max: int = 200
    outer_bc: str = "robin"
    solve_every: int = 1
    method: str = "newton"

    def refined(self, factor: int = 2) -> "PLaplaceParams":
        """Same layer family with ``factor`` times as many layers (nested for factor 2)."""
        return replace(self, N_rad=self.N_rad * factor, grading=self.grading ** (1.0 / factor))


def unit_sphere_area(n: int) -> float:
    return 2.0 * math.pi if n == 2 else 4.0 * math.pi


def decay_exponent(n: int, p: float) -> float:
    """Far-field exponent ``(n-p)/(p-1)`` of the radial p-harmonic function."""
    return (n - p) / (p - 1.0)


def _check_exponent(n, p):
    if not (1.0 < p < n):
        raise ExponentOutOfRange(f"p={p} must lie in (1, n) = (1, {n})")


# --------------------------------------------------------------------------
# closed-form radial solution


@dataclass(frozen=True)
class RadialPotential:
    n: int
    p: float
    R: float
    grad_at_R: float
    capacity: float

    def psi(self, r):
        return (np.asarray(r, dtype=float) / self.R) ** (-decay_exponent(self.n, self.p))

    def grad(self, r):
        a = decay_exponent(self.n, self.p)
        return a / self.R * (np.asarray(r, dtype=float) / self.R) ** (-a - 1.0)


def radial_potential(n: int, p: float, R: float) -> RadialPotential:
    """Equilibrium potential of the ball ``B_R`` and its p-capacity."""
    _check_exponent(n, p)
    a = decay_exponent(n, p)
    cap = unit_sphere_area(n) * a ** (p - 1.0) * R ** (n - p)
    return RadialPotential(n=n, p=p, R=R, grad_at_R=a / R, capacity=cap)


# --------------------------------------------------------------------------
# mesh


@dataclass(frozen=True)
class ExteriorMesh:
    """Layered exterior mesh; ``nodes`` has shape ``(N_rad + 1, ncol, 2)``."""

    n: int
    M: int
    nodes: np.ndarray
    layer_s: np.ndarray
    R_out: float
    normals: np.ndarray  # outward unit normal per column
    h: SupportFunction | None = None
    sigma: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def nlay(self) -> int:
        return self.nodes.shape[0]

    @property
    def ncol(self) -> int:
        return self.nodes.shape[1]

    @property
    def grid_cols(self) -> slice:
        """Columns carrying the sphere-grid normals (n=3 skips the axis columns)."""
        return slice(0, self.M) if self.n == 2 else slice(1, self.M + 1)

    @property
    def num_nodes(self) -> int:
        return self.nlay * self.ncol

    @property
    def triangles(self) -> np.ndarray:
        return _triangles(self.n, self.ncol, self.nlay)

    def geometry_data(self):
        """Per-triangle basis gradients, weighted areas and local stiffness."""
        if "geo" not in self._cache:
            xy = self.nodes.reshape(-1, 2)
            tri = self.triangles
            bx, by, area = element_gradients(xy, tri)
            if self.n == 3:
                rho_c = xy[tri, 0].mean(axis=1)
                wa = 2.0 * math.pi * rho_c * area
            else:
                wa = area
            local = wa[:, None, None] * (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :])
            self._cache["geo"] = (bx, by, area, wa, local)
        return self._cache["geo"]


def layer_fractions(N_rad: int, grading: float) -> np.ndarray:
    """Fractions ``s_k`` in [0, 1] with geometrically growing increments."""
    k = np.arange(N_rad + 1)
    if grading == 1.0:
        return k / N_rad
    return (grading**k - 1.0) / (grading**N_rad - 1.0)


def build_mesh(b: BoundarySample, params: PLaplaceParams, n: int | None = None,
               R_out: float | None = None, poles=None, h: SupportFunction | None = None,
               sigma=None) -> ExteriorMesh:
    """Build the layered exterior mesh around the boundary ``b``.

    ``poles`` gives the n=3 axis points ``(z_north, z_south)``; ``R_out``
    defaults to ``R_out_factor`` times the largest boundary radius.
    """
    if params.R_out_factor < 5:
        raise MeshFailure("R_out_factor must be at least 5")
    if params.N_rad < 2:
        raise MeshFailure("need at least two radial layers")
    if not (1.0 <= params.grading <= 1.2):
        raise MeshFailure(f"grading {params.grading} outside [1, 1.2]")
    pts = np.asarray(b.points, dtype=float)
    nrm = np.asarray(b.normals, dtype=float)
    if n is None:
        n = 3 if poles is not None else 2
    M = pts.shape[0]
    if n == 3:
        if poles is None:
            raise MeshFailure("n=3 meshes need the pole points of the body")
        zn, zs = poles
        pts = np.vstack([[0.0, zn], pts, [0.0, -zs]])
        nrm = np.vstack([[0.0, 1.0], nrm, [0.0, -1.0]])
    rmax = float(np.max(np.hypot(pts[:, 0], pts[:, 1])))
    if R_out is None:
        R_out = params.R_out_factor * rmax
    if R_out <= rmax:
        raise MeshFailure("outer radius does not enclose the body")
    s = layer_fractions(params.N_rad, params.grading)
    outer = R_out * nrm
    nodes = (1.0 - s)[:, None, None] * pts[None] + s[:, None, None] * outer[None]
    mesh = ExteriorMesh(n=n, M=M, nodes=nodes, layer_s=s, R_out=float(R_out), normals=nrm,
                        h=h, sigma=sigma)
    _, _, area, _, _ = mesh.geometry_data()
    if np.any(area <= 0):
        raise MeshFailure(f"{int(np.sum(area <= 0))} inverted cells")
    return mesh


def mesh_for(h: SupportFunction, params: PLaplaceParams, R_out: float | None = None) -> ExteriorMesh:
    """Mesh the exterior of the body with support function ``h``."""
    derivs = geometry.derivatives(h)
    sig = geometry.sigma(h, derivs)
    b = geometry.boundary(h, derivs, check=False)
    poles = geometry.pole_values(h) if h.n == 3 else None
    return build_mesh(b, params, n=h.n, R_out=R_out, poles=poles, h=h, sigma=sig)


def element_gradients(xy, tri):
    """Gradients of the three P1 basis functions and the area of each triangle."""
    x = xy[tri, 0]
    y = xy[tri, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    bx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]]) / det[:, None]
    by = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]]) / det[:, None]
    return bx, by, 0.5 * det


@lru_cache(maxsize=16)
def _triangles(n: int, ncol: int, nlay: int) -> np.ndarray:
    periodic = n == 2
    ncell = ncol if periodic else ncol - 1
    k, j = np.meshgrid(np.arange(nlay - 1), np.arange(ncell), indexing="ij")
    k, j = k.ravel(), j.ravel()
    jp = (j + 1) % ncol
    a = k * ncol + j
    b = k * ncol + jp
    c = (k + 1) * ncol + jp
    d = (k + 1) * ncol + j
    # counter-clockwise for n=2 (theta increases counter-clockwise); the n=3
    # meridian runs clockwise in (rho, z), so the orientation flips
    if n == 2:
        tri = np.concatenate([np.column_stack([a, d, c]), np.column_stack([a, c, b])])
    else:
        tri = np.concatenate([np.column_stack([a, c, d]), np.column_stack([a, b, c])])
    tri.setflags(write=False)
    return tri


# --------------------------------------------------------------------------
# assembly structure (topology only, cached)


class _Assembly:
    """Sparse pattern of the reduced system for one mesh topology."""

    def __init__(self, n, ncol, nlay, outer_dirichlet):
        tri = _triangles(n, ncol, nlay)
        nnodes = ncol * nlay
        fixed = np.zeros(nnodes, dtype=bool)
        fixed[:ncol] = True
        if outer_dirichlet:
            fixed[(nlay - 1) * ncol:] = True
        free_id = -np.ones(nnodes, dtype=np.int64)
        free_id[~fixed] = np.arange(int((~fixed).sum()))
        self.fixed = fixed
        self.free_nodes = np.flatnonzero(~fixed)
        self.nfree = self.free_nodes.size

        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        rf, cf = free_id[rows], free_id[cols]
        self.mask_ff = (rf >= 0) & (cf >= 0)
        self.mask_fd = (rf >= 0) & (cf < 0)
        self.row_fd = rf[self.mask_fd]
        self.col_fd = cols[self.mask_fd]

        keys = rf[self.mask_ff] * self.nfree + cf[self.mask_ff]
        ukeys, self.pos_ff = np.unique(keys, return_inverse=True)
        self.nnz = ukeys.size
        self.indices = (ukeys % self.nfree).astype(np.int32)
        self.indptr = np.searchsorted(ukeys // self.nfree, np.arange(self.nfree + 1)).astype(np.int32)
        self._ukeys = ukeys

        # outer ring edges (Robin term)
        self.periodic = n == 2
        base = (nlay - 1) * ncol
        j = np.arange(ncol if self.periodic else ncol - 1)
        self.outer_edges = np.column_stack([base + j, base + (j + 1) % ncol])
        if not outer_dirichlet:
            ea = free_id[self.outer_edges[:, 0]]
            eb = free_id[self.outer_edges[:, 1]]
            self.edge_pos = np.stack([self._find(ea, ea), self._find(ea, eb),
                                      self._find(eb, ea), self._find(eb, eb)], axis=1)

    def _find(self, r, c):
        pos = np.searchsorted(self._ukeys, r * self.nfree + c)
        return pos

    def matrix(self, data):
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.nfree, self.nfree))


@lru_cache(maxsize=16)
def _assembly(n, ncol, nlay, outer_dirichlet) -> _Assembly:
    return _Assembly(n, ncol, nlay, outer_dirichlet)


# --------------------------------------------------------------------------
# solve


@dataclass(frozen=True)
class PotentialSolution:
    mesh: ExteriorMesh
    p: float
    psi: np.ndarray  # (nlay, ncol)
    g: np.ndarray  # boundary gradient trace on the sphere grid
    capacity_energy: float
    capacity_poincare: float
    iterations: int
    residual_norm: float
    params: PLaplaceParams

    def dump_csv(self, path) -> None:
        """Debug dump ``rho,z_or_theta,layer,psi`` (x,y for n=2)."""
        xy = self.mesh.nodes
        with open(path, "w") as fh:
            fh.write("rho,z_or_theta,layer,psi\n")
            for k in range(self.mesh.nlay):
                for j in range(self.mesh.ncol):
                    x, y = xy[k, j]
                    fh.write(f"{float(x)!r},{float(y)!r},{k},{float(self.psi[k, j])!r}\n")


def _outer_edge_mass(mesh: ExteriorMesh, asm: _Assembly):
    """Edge lengths and the (aa, ab) entries of the weighted P1 edge mass."""
    xy = mesh.nodes.reshape(-1, 2)
    ea, eb = asm.outer_edges[:, 0], asm.outer_edges[:, 1]
    L = np.hypot(*(xy[eb] - xy[ea]).T)
    if mesh.n == 3:
        ra, rb = xy[ea, 0], xy[eb, 0]
        c = 2.0 * math.pi * L / 12.0
        return np.column_stack([c * (3 * ra + rb), c * (ra + rb), c * (ra + rb), c * (ra + 3 * rb)])
    return np.column_stack([L / 3.0, L / 6.0, L / 6.0, L / 3.0])


def _element_grad(u, tri, bx, by):
    ut = u[tri]
    return (ut * bx).sum(axis=1), (ut * by).sum(axis=1)


def solve_exterior(mesh: ExteriorMesh, p: float, params: PLaplaceParams | None = None,
                   initial=None) -> PotentialSolution:
    """Equilibrium potential on ``mesh``: ``u = 1`` on the body, decaying outward.

    ``initial`` is an optional nodal array (same mesh topology) to warm-start
    the nonlinear iteration.
    """
    params = params or PLaplaceParams()
    n = mesh.n
    _check_exponent(n, p)
    if params.outer_bc not in ("robin", "dirichlet"):
        raise ValueError(f"unknown outer_bc {params.outer_bc!r}")
    if params.method not in ("picard", "newton"):
        raise ValueError(f"unknown method {params.method!r}")
    a = decay_exponent(n, p)
    R = mesh.R_out
    tri = mesh.triangles
    bx, by, area, wa, local = mesh.geometry_data()
    asm = _assembly(n, mesh.ncol, mesh.nlay, params.outer_bc == "dirichlet")
    robin = params.outer_bc == "robin"
    edge_mass = _outer_edge_mass(mesh, asm) if robin else None

    rmax = float(np.max(np.hypot(mesh.nodes[0, :, 0], mesh.nodes[0, :, 1])))
    eps2 = (params.eps_reg / rmax) ** 2

    if initial is None:
        xy = mesh.nodes
        rad = np.hypot(xy[..., 0], xy[..., 1])
        u = (rad / rad[0][None, :]) ** (-a)
        if params.outer_bc == "dirichlet":
            # radial profile of the truncated problem
            u = (u - u[-1][None, :]) / (1.0 - u[-1][None, :])
    else:
        u = np.array(initial, dtype=float).reshape(mesh.nlay, mesh.ncol).copy()
    u = u.reshape(-1)
    u[: mesh.ncol] = 1.0
    if params.outer_bc == "dirichlet":
        u[(mesh.nlay - 1) * mesh.ncol:] = 0.0
    ufix = np.where(asm.fixed, u, 0.0)
    free = asm.free_nodes
    linear = p == 2.0

    change = np.inf
    it = 0
    use_newton = params.method == "newton"
    while it < params.picard_max:
        it += 1
        gx, gy = _element_grad(u, tri, bx, by)
        q = gx * gx + gy * gy + eps2
        coef = q ** (0.5 * (p - 2.0))
        K = (local * coef[:, None, None]).reshape(-1)
        data = np.bincount(asm.pos_ff, weights=K[asm.mask_ff], minlength=asm.nnz)
        coupling = np.bincount(asm.row_fd, weights=K[asm.mask_fd] * ufix[asm.col_fd],
                               minlength=asm.nfree)
        if robin:
            ue = 0.5 * (u[asm.outer_edges[:, 0]] + u[asm.outer_edges[:, 1]])
            kappa = (a / R) * ((a * ue / R) ** 2 + eps2) ** (0.5 * (p - 2.0))
            np.add.at(data, asm.edge_pos.ravel(), (kappa[:, None] * edge_mass).ravel())
        A = asm.matrix(data)
        unew = u.copy()
        if use_newton and not linear:
            res = A @ u[free] + coupling
            J = _newton_jacobian(asm, data, u, tri, bx, by, wa, gx, gy, q, p, a, R, eps2,
                                 edge_mass if robin else None)
            unew[free] += _factor(J).solve(-res)
        else:
            unew[free] = _factor(A).solve(-coupling)
        prev, change = change, float(np.max(np.abs(unew - u)))
        if use_newton and not (change < 0.5 * prev or it <= 8):
            # Newton stalled; finish with the monotone frozen-coefficient sweep
            use_newton = False
        u = unew
        if change <= params.picard_tol or linear:
            # p = 2: the frozen coefficient is exact after one solve
            break
    if change > params.picard_tol and not linear:
        raise NoConvergence(
            f"nonlinear iteration did not converge in {params.picard_max} steps "
            f"(last update {change:.3e})"
        )
    psi = u.reshape(mesh.nlay, mesh.ncol)
    g = boundary_trace(mesh, psi)
    cap_e = _capacity_energy(mesh, psi, p, params, bx, by, wa, tri)
    cap_p = float("nan")
    if mesh.h is not None and mesh.sigma is not None:
        cap_p = capacity_poincare(mesh.h, g, mesh.sigma, p)
    return PotentialSolution(mesh=mesh, p=p, psi=psi, g=g, capacity_energy=cap_e,
                             capacity_poincare=cap_p, iterations=it,
                             residual_norm=0.0 if linear else change, params=params)


def _newton_jacobian(asm, data, u, tri, bx, by, wa, gx, gy, q, p, a, R, eps2, edge_mass):
    c2 = (p - 2.0) * q ** (0.5 * (p - 4.0)) * wa
    dx = gx[:, None] * bx + gy[:, None] * by  # grad u . grad phi_a
    extra = c2[:, None, None] * dx[:, :, None] * dx[:, None, :]
    jd = data + np.bincount(asm.pos_ff, weights=extra.reshape(-1)[asm.mask_ff], minlength=asm.nnz)
    if edge_mass is not None:
        ue = 0.5 * (u[asm.outer_edges[:, 0]] + u[asm.outer_edges[:, 1]])
        s = (a * ue / R) ** 2
        # kappa depends on the edge mean; d kappa / d u_node = kappa'(ue) / 2
        dk = (a / R) * (s + eps2) ** (0.5 * (p - 4.0)) * (p - 2.0) * (a / R) ** 2 * ue
        ua, ub = u[asm.outer_edges[:, 0]], u[asm.outer_edges[:, 1]]
        mua = edge_mass[:, 0] * ua + edge_mass[:, 1] * ub
        mub = edge_mass[:, 2] * ua + edge_mass[:, 3] * ub
        vals = 0.5 * dk[:, None] * np.column_stack([mua, mua, mub, mub])
        np.add.at(jd, asm.edge_pos.ravel(), vals.ravel())
    return asm.matrix(jd)


def _factor(A):
    return splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})


def one_sided_derivative(u0, u1, u2, t1, t2):
    """Three-point one-sided first derivative at ``t=0`` from samples at 0, t1, t2."""
    return (-(t1 + t2) / (t1 * t2) * u0 + t2 / (t1 * (t2 - t1)) * u1
            - t1 / (t2 * (t2 - t1)) * u2)


def boundary_trace(mesh: ExteriorMesh, psi) -> np.ndarray:
    """``|grad psi|`` on the body at the sphere-grid normals.

    The nodes of a column lie on a straight ray leaving the body; the
    one-sided derivative along it is divided by ``ray . xi`` because the
    gradient on the boundary is normal to it.
    """
    cols = mesh.grid_cols
    x = mesh.nodes[:3, cols]
    ray = x[2] - x[0]
    ray_len = np.hypot(ray[:, 0], ray[:, 1])
    d = ray / ray_len[:, None]
    s = mesh.layer_s
    full = np.hypot(*(mesh.nodes[-1, cols] - mesh.nodes[0, cols]).T)
    t1, t2 = s[1] * full, s[2] * full
    du = one_sided_derivative(psi[0, cols], psi[1, cols], psi[2, cols], t1, t2)
    cosang = np.einsum("ij,ij->i", d, mesh.normals[cols])
    return -du / cosang


def boundary_gradient(sol: PotentialSolution) -> np.ndarray:
    return sol.g


def _capacity_energy(mesh, psi, p, params, bx, by, wa, tri):
    u = psi.reshape(-1)
    gx, gy = _element_grad(u, tri, bx, by)
    bulk = float(np.sum(wa * (gx * gx + gy * gy) ** (0.5 * p)))
    if params.outer_bc != "robin":
        return bulk
    a = decay_exponent(mesh.n, p)
    R = mesh.R_out
    outer = psi[-1, mesh.grid_cols]
    tail = a ** (p - 1.0) * R ** (mesh.n - p) * geometry.sphere_integral(np.abs(outer) ** p, mesh.n)
    return bulk + tail


def capacity_energy(sol: PotentialSolution, p: float | None = None) -> float:
    """Dirichlet p-energy on the mesh plus the far-field tail beyond ``R_out``."""
    if p is None or p == sol.p:
        return sol.capacity_energy
    m = sol.mesh
    bx, by, _, wa, _ = m.geometry_data()
    return _capacity_energy(m, sol.psi, p, sol.params, bx, by, wa, m.triangles)


def capacity_poincare(h: SupportFunction, g, sigma, p: float) -> float:
    """Capacity from the boundary trace: ``(p-1)/(n-p) * int h g^p sigma``."""
    _check_exponent(h.n, p)
    return (p - 1.0) / (h.n - p) * geometry.sphere_integral(
        h.values * np.asarray(g) ** p * np.asarray(sigma), h.n)


def mu_p_density(g, sigma, p: float) -> np.ndarray:
    """Density of the p-capacitary measure against the sphere measure."""
    return np.asarray(g) ** p * np.asarray(sigma)


def solve_body(h: SupportFunction, p: float, params: PLaplaceParams | None = None,
               initial=None) -> PotentialSolution:
    """Mesh the exterior of ``h`` and solve for its equilibrium potential."""
    params = params or PLaplaceParams()
    return solve_exterior(mesh_for(h, params), p, params, initial=initial)


# --------------------------------------------------------------------------
# point evaluation


def evaluate(sol: PotentialSolution, points, near_cols=None) -> np.ndarray:
    """Interpolate the nodal solution at ``points`` (shape ``(m, 2)``).

    ``near_cols`` optionally gives a column index per point to restrict the
    triangle search; points outside the mesh evaluate to NaN.
    """
    mesh = sol.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xy = mesh.nodes.reshape(-1, 2)
    tri = mesh.triangles
    u = sol.psi.reshape(-1)
    out = np.full(pts.shape[0], np.nan)
    x0 = xy[tri[:, 0]]
    e1 = xy[tri[:, 1]] - x0
    e2 = xy[tri[:, 2]] - x0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    ncell = mesh.ncol if mesh.n == 2 else mesh.ncol - 1
    half = (mesh.nlay - 1) * ncell
    for i, x in enumerate(pts):
        if near_cols is not None:
            j = int(near_cols[i])
            cells = np.array([(jj % mesh.ncol) for jj in range(j - 2, j + 2)])
            cells = cells[cells < ncell]
            layers = np.arange(min(6, mesh.nlay - 1))
            cand = (layers[:, None] * ncell + cells[None, :]).ravel()
            cand = np.concatenate([cand, cand + half])
        else:
            cand = np.arange(tri.shape[0])
        found = _locate(x, cand, x0, e1, e2, det)
        if found is None and near_cols is not None:
            found = _locate(x, np.arange(tri.shape[0]), x0, e1, e2, det)
        if found is None:
            continue
        t, l1, l2 = found
        out[i] = (1 - l1 - l2) * u[tri[t, 0]] + l1 * u[tri[t, 1]] + l2 * u[tri[t, 2]]
    return out


def _locate(x, cand, x0, e1, e2, det):
    r = x - x0[cand]
    l1 = (r[:, 0] * e2[cand, 1] - r[:, 1] * e2[cand, 0]) / det[cand]
    l2 = (e1[cand, 0] * r[:, 1] - e1[cand, 1] * r[:, 0]) / det[cand]
    tol = -1e-12
    ok = (l1 >= tol) & (l2 >= tol) & (1 - l1 - l2 >= tol)
    if not np.any(ok):
        return None
    k = int(np.flatnonzero(ok)[0])
    return int(cand[k]), float(l1[k]), float(l2[k])
