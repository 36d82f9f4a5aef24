"""Flat background surfaces, finite-difference operators and conformal curvatures.

Two backgrounds are shipped, both with vanishing Gauss curvature:

* ``disk``: the closed unit disk in polar coordinates ``(r, theta)``,
  metric ``dr^2 + r^2 dtheta^2``, boundary circle ``r = 1`` with geodesic
  curvature 1.
* ``cylinder``: the flat strip ``[0, L] x S^1``, metric ``dr^2 + ds^2``,
  two geodesic boundary circles ``r = 0`` and ``r = L``.

Fields are plain numpy arrays of shape ``(n_r + 1, n_theta)``; row ``i`` is
the ring ``r = r_i``. ``n_theta == 1`` selects the radially symmetric mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import GridError, NonFiniteStateError

DISK = "disk"
CYLINDER = "cylinder"
MIN_NR = 8


@dataclass(frozen=True)
class BoundaryComponent:
    """One boundary circle: the grid row it lives on and its outward normal.

    ``sign`` is +1 when the outward normal is ``+d/dr`` and -1 when it is
    ``-d/dr``. ``inward`` is the row index one step into the domain.
    """

    name: str
    row: int
    sign: int
    k_g: float

    @property
    def inward(self) -> int:
        return self.row - self.sign

    @property
    def inward2(self) -> int:
        return self.row - 2 * self.sign

    @property
    def inward3(self) -> int:
        return self.row - 3 * self.sign


@dataclass(frozen=True, eq=False)
class BackgroundMetric:
    """Discrete flat background with its curvature data.

    Build instances with :func:`make_disk` or :func:`make_cylinder`.
    """

    kind: str
    n_r: int
    n_theta: int
    L: float = 1.0
    r: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)
    K_g: np.ndarray = field(init=False, repr=False)
    components: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in (DISK, CYLINDER):
            raise GridError(f"unknown background kind {self.kind!r}")
        if int(self.n_r) != self.n_r or self.n_r < MIN_NR:
            raise GridError(f"grid too coarse: n_r={self.n_r} (need n_r >= {MIN_NR})")
        if int(self.n_theta) != self.n_theta or self.n_theta < 1:
            raise GridError(f"n_theta must be a positive integer, got {self.n_theta}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise GridError(f"length must be positive, got L={self.L}")
        if self.kind == DISK and self.L != 1.0:
            raise GridError("the disk has unit radius; L applies to the cylinder only")
        r = np.linspace(0.0, self.L, self.n_r + 1)
        theta = 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta
        K = np.zeros((self.n_r + 1, self.n_theta))
        for a in (r, theta, K):
            a.flags.writeable = False
        if self.kind == DISK:
            comps = (BoundaryComponent("outer", self.n_r, +1, 1.0),)
        else:
            comps = (
                BoundaryComponent("inner", 0, -1, 0.0),
                BoundaryComponent("outer", self.n_r, +1, 0.0),
            )
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "K_g", K)
        object.__setattr__(self, "components", comps)

    def __eq__(self, other):
        if not isinstance(other, BackgroundMetric):
            return NotImplemented
        return (self.kind, self.n_r, self.n_theta, self.L) == (
            other.kind,
            other.n_r,
            other.n_theta,
            other.L,
        )

    def __hash__(self):
        return hash((self.kind, self.n_r, self.n_theta, self.L))

    # -- grid facts ---------------------------------------------------------

    @property
    def h(self) -> float:
        return self.L / self.n_r

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def shape(self) -> tuple:
        return (self.n_r + 1, self.n_theta)

    @property
    def size(self) -> int:
        return (self.n_r + 1) * self.n_theta

    @property
    def radial(self) -> bool:
        return self.n_theta == 1

    @property
    def boundary_rows(self) -> tuple:
        return tuple(c.row for c in self.components)

    @cached_property
    def metric_coeff(self) -> np.ndarray:
        """Angular metric coefficient ``f`` in ``dr^2 + f ds^2`` at each ring."""
        f = self.r**2 if self.kind == DISK else np.ones_like(self.r)
        f.flags.writeable = False
        return f

    @cached_property
    def distance(self) -> np.ndarray:
        """Exact distance to the boundary at every node, shape ``self.shape``."""
        if self.kind == DISK:
            d = 1.0 - self.r
        else:
            d = np.minimum(self.r, self.L - self.r)
        out = np.repeat(d[:, None], self.n_theta, axis=1)
        out.flags.writeable = False
        return out

    @cached_property
    def interior_mask(self) -> np.ndarray:
        m = np.ones(self.shape, dtype=bool)
        for row in self.boundary_rows:
            m[row, :] = False
        m.flags.writeable = False
        return m

    def component(self, name) -> BoundaryComponent:
        """Look up a boundary component by name or position."""
        if isinstance(name, (int, np.integer)) and not isinstance(name, bool):
            if 0 <= name < len(self.components):
                return self.components[name]
        else:
            for c in self.components:
                if c.name == name:
                    return c
        known = ", ".join(c.name for c in self.components)
        raise GridError(f"unknown boundary component {name!r} (have: {known})")

    def compact_mask(self, region=None) -> np.ndarray:
        """Nodes of the monitored compact subset.

        Default: ``r <= 0.9`` on the disk, the middle half of the cylinder.
        ``region`` may be a float, read as the minimum distance to the
        boundary, or an explicit boolean mask.
        """
        if region is None:
            if self.kind == DISK:
                region = 0.1
            else:
                region = 0.25 * self.L
        if isinstance(region, np.ndarray) and region.dtype == bool:
            if region.shape != self.shape:
                raise GridError("compact mask has the wrong shape")
            return region
        # small slack so that r <= 0.9 keeps the node sitting on 0.9
        return self.distance >= float(region) - 1e-12

    # -- fields -------------------------------------------------------------

    def sample(self, func: Callable) -> np.ndarray:
        """Evaluate ``func(r, theta)`` on the grid (broadcast)."""
        R, T = np.meshgrid(self.r, self.theta, indexing="ij")
        return self.as_field(np.broadcast_to(func(R, T), self.shape))

    def sample_radial(self, func: Callable) -> np.ndarray:
        """Evaluate a function of ``r`` only on the grid."""
        vals = np.asarray(func(np.asarray(self.r)), dtype=float)
        return self.as_field(np.repeat(vals[:, None], self.n_theta, axis=1))

    def as_field(self, u, check=True) -> np.ndarray:
        """Coerce ``u`` to a float field of shape ``self.shape``.

        Scalars broadcast; 1-D input of length ``n_r + 1`` is read as a
        radial profile. With ``check`` the values must be finite and, on
        the 2-D disk, single-valued at the origin.
        """
        a = np.asarray(u, dtype=float)
        if a.ndim == 0:
            a = np.full(self.shape, float(a))
        elif a.ndim == 1 and a.shape[0] == self.n_r + 1:
            a = np.repeat(a[:, None], self.n_theta, axis=1)
        elif a.shape != self.shape:
            raise GridError(f"field shape {a.shape} does not match domain {self.shape}")
        else:
            a = np.array(a, dtype=float)
        if check:
            if not np.all(np.isfinite(a)):
                raise NonFiniteStateError("field contains non-finite values")
            if self.kind == DISK and self.n_theta > 1:
                origin = a[0]
                if np.ptp(origin) > 1e-10 * (1.0 + np.max(np.abs(origin))):
                    raise GridError("disk field is multi-valued at the origin")
        return a

    # -- operators ----------------------------------------------------------

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of :func:`laplacian` on the flattened field."""
        return _assemble(self, robin=False)[0]

    @cached_property
    def robin_stencil(self):
        """Laplacian with boundary rows closed by a centred ghost node.

        Returns ``(M, gain)``: at a boundary node, the ghost-eliminated
        Laplacian equals ``(M @ u)[node] + gain[node] * q`` where ``q`` is
        the outward normal derivative imposed there. ``gain`` vanishes off
        the boundary.
        """
        return _assemble(self, robin=True)


    @cached_property
    def gradient_matrices(self):
        """Sparse ``(G1, G2)`` with ``|grad u|^2 = (G1 u)^2 + (G2 u)^2``.

        ``G1`` is the centred ``d/dr``, ``G2`` the centred ``f^{-1/2} d/ds``.
        At the 2-D disk origin the pair holds Cartesian ``(d/dx, d/dy)``
        estimated from the first ring; in radial mode the origin gradient
        is zero. Boundary rows use one-sided 3-point ``d/dr``.
        """
        return _assemble_gradient(self)


def make_disk(n_r: int, n_theta: int = 1) -> BackgroundMetric:
    """Unit disk with ``n_r`` radial intervals and ``n_theta`` angular nodes."""
    return BackgroundMetric(DISK, n_r, n_theta)


def make_cylinder(L: float, n_r: int, n_theta: int = 1) -> BackgroundMetric:
    """Flat cylinder ``[0, L] x S^1``."""
    return BackgroundMetric(CYLINDER, n_r, n_theta, float(L))


def _flat_index(bg, i, j):
    return i * bg.n_theta + j


def _assemble(bg: BackgroundMetric, robin: bool):
    n, m, h = bg.n_r, bg.n_theta, bg.h
    rows, cols, vals = [], [], []
    gain = np.zeros(bg.shape)

    def add(i, j, ii, jj, v):
        rows.append(_flat_index(bg, i, j))
        cols.append(_flat_index(bg, ii, jj % m))
        vals.append(v)

    def angular(i, j):
        if m == 1:
            return
        f = bg.metric_coeff[i]
        c = 1.0 / (f * bg.dtheta**2)
        add(i, j, i, j + 1, c)
        add(i, j, i, j - 1, c)
        add(i, j, i, j, -2.0 * c)

    disk = bg.kind == DISK
    for j in range(m):
        if disk:
            # origin: 4 (mean of first ring - centre) / h^2
            add(0, j, 0, j, -4.0 / h**2)
            for jj in range(m):
                add(0, j, 1, jj, 4.0 / (m * h**2))
        for i in range(1, n):
            a = 1.0 / h**2
            b = 1.0 / (2.0 * h * bg.r[i]) if disk else 0.0
            add(i, j, i + 1, j, a + b)
            add(i, j, i - 1, j, a - b)
            add(i, j, i, j, -2.0 * a)
            angular(i, j)
        for comp in bg.components:
            i, s = comp.row, comp.sign
            if robin:
                add(i, j, comp.inward, j, 2.0 / h**2)
                add(i, j, i, j, -2.0 / h**2)
                gain[i, j] = 2.0 / h + (1.0 / bg.r[i] if disk else 0.0)
            else:
                for k, w in enumerate((2.0, -5.0, 4.0, -1.0)):
                    add(i, j, i - s * k, j, w / h**2)
                if disk:
                    for k, w in enumerate((3.0, -4.0, 1.0)):
                        add(i, j, i - s * k, j, s * w / (2.0 * h * bg.r[i]))
            angular(i, j)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(bg.size, bg.size))
    M.sum_duplicates()
    gain.flags.writeable = False
    return M, gain


def _assemble_gradient(bg: BackgroundMetric):
    n, m, h = bg.n_r, bg.n_theta, bg.h
    r1, c1, v1 = [], [], []
    r2, c2, v2 = [], [], []

    def add(store, i, j, ii, jj, v):
        rows, cols, vals = store
        rows.append(_flat_index(bg, i, j))
        cols.append(_flat_index(bg, ii, jj % m))
        vals.append(v)

    G1, G2 = (r1, c1, v1), (r2, c2, v2)
    disk = bg.kind == DISK
    for j in range(m):
        for i in range(1, n):
            add(G1, i, j, i + 1, j, 1.0 / (2.0 * h))
            add(G1, i, j, i - 1, j, -1.0 / (2.0 * h))
        for comp in bg.components:
            i, s = comp.row, comp.sign
            for k, w in enumerate((3.0, -4.0, 1.0)):
                add(G1, i, j, i - s * k, j, s * w / (2.0 * h))
        if m > 1:
            for i in range(0, n + 1):
                if disk and i == 0:
                    continue
                c = 1.0 / (2.0 * bg.dtheta * np.sqrt(bg.metric_coeff[i]))
                add(G2, i, j, i, j + 1, c)
                add(G2, i, j, i, j - 1, -c)
        if disk and m >= 3:
            for jj in range(m):
                add(G1, 0, j, 1, jj, 2.0 * np.cos(bg.theta[jj]) / (m * h))
                add(G2, 0, j, 1, jj, 2.0 * np.sin(bg.theta[jj]) / (m * h))
    shape = (bg.size, bg.size)
    A = sp.csr_matrix((v1, (r1, c1)), shape=shape)
    B = sp.csr_matrix((v2, (r2, c2)), shape=shape)
    A.sum_duplicates()
    B.sum_duplicates()
    return A, B


def gradient_squared(bg: BackgroundMetric, u) -> np.ndarray:
    """``|grad u|^2`` with centred differences (see ``gradient_matrices``)."""
    u = _check_domain(bg, u)
    G1, G2 = bg.gradient_matrices
    flat = u.ravel()
    return ((G1 @ flat) ** 2 + (G2 @ flat) ** 2).reshape(bg.shape)


def _check_domain(bg, u):
    if not isinstance(bg, BackgroundMetric):
        raise GridError("expected a BackgroundMetric")
    return bg.as_field(u)


def laplacian(bg: BackgroundMetric, u) -> np.ndarray:
    """Second-order finite-difference Laplace-Beltrami operator of ``bg``.

    Interior rings use centred differences; on the disk the radial term is
    ``u_rr + u_r / r`` and the origin uses ``4 (u(h) - u(0)) / h^2`` with
    ``u(h)`` averaged over the first ring. Boundary rows use one-sided
    second-order stencils; callers impose boundary conditions themselves.
    """
    u = _check_domain(bg, u)
    h = bg.h
    out = np.empty_like(u)
    d2 = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    if bg.kind == DISK:
        rr = bg.r[1:-1, None]
        out[1:-1] = d2 + (u[2:] - u[:-2]) / (2.0 * h * rr)
        out[0] = 4.0 * (u[1].mean() - u[0]) / h**2
    else:
        out[1:-1] = d2
    for comp in bg.components:
        i, s = comp.row, comp.sign
        ui = [u[i - s * k] for k in range(4)]
        out[i] = (2.0 * ui[0] - 5.0 * ui[1] + 4.0 * ui[2] - ui[3]) / h**2
        if bg.kind == DISK:
            out[i] += s * (3.0 * ui[0] - 4.0 * ui[1] + ui[2]) / (2.0 * h * bg.r[i])
    if bg.n_theta > 1:
        ang = (np.roll(u, -1, axis=1) - 2.0 * u + np.roll(u, 1, axis=1)) / bg.dtheta**2
        f = bg.metric_coeff
        start = 1 if bg.kind == DISK else 0
        out[start:] += ang[start:] / f[start:, None]
    return out


def normal_derivative(bg: BackgroundMetric, u, component) -> np.ndarray:
    """Outward normal derivative on one boundary circle (3-point one-sided).

    Accurate to O(h^2) only while ``u`` is resolved by the grid near the
    boundary; blow-up profiles need ``h`` well below the layer width.
    """
    u = _check_domain(bg, u)
    c = bg.component(component)
    return (3.0 * u[c.row] - 4.0 * u[c.inward] + u[c.inward2]) / (2.0 * bg.h)


def gauss_curvature_conformal(bg: BackgroundMetric, u) -> np.ndarray:
    """Gauss curvature of ``e^{2u} g``: ``e^{-2u} (K_g - Lap u)``."""
    u = _check_domain(bg, u)
    return np.exp(-2.0 * u) * (bg.K_g - laplacian(bg, u))


def geodesic_curvature_conformal(
    bg: BackgroundMetric, u, component, stencil: str = "log"
) -> np.ndarray:
    """Geodesic curvature of a boundary circle in ``e^{2u} g``.

    ``stencil="log"`` evaluates ``e^{-u} (du/dn + k_g)`` with the one-sided
    derivative of ``u``. ``stencil="reciprocal"`` evaluates the same
    quantity as ``-dv/dn + k_g v`` with ``v = e^{-u}``, which stays accurate
    when ``u`` blows up across the last few grid cells.
    """
    u = _check_domain(bg, u)
    c = bg.component(component)
    if stencil == "log":
        return np.exp(-u[c.row]) * (normal_derivative(bg, u, c.name) + c.k_g)
    if stencil == "reciprocal":
        v = np.exp(-u)
        return -normal_derivative(bg, v, c.name) + c.k_g * v[c.row]
    raise ValueError(f"unknown stencil {stencil!r}")
