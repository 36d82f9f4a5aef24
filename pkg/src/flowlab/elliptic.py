"""Liouville equation solves and the Loewner-Nirenberg ladder.

The steady state of the normalized flow on a flat background is the
Liouville equation ``Lap u = K_g + e^{2u}``. Dirichlet problems are solved
by damped Newton iteration; the complete hyperbolic (Loewner-Nirenberg)
solution is approached by raising the boundary level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _linalg
from .errors import NonConvergence, ScheduleExhausted
from .geometry import DISK, BackgroundMetric, gradient_squared, laplacian


@dataclass(frozen=True)
class NewtonSettings:
    """Controls for :func:`solve_liouville_dirichlet`.

    ``tol`` bounds the sup-norm of the scaled residual
    ``e^{-2u} (Lap u - K_g) - 1`` over interior nodes; this is exactly the
    time derivative the flow would see, so a converged solution is
    stationary for the flow to within ``tol``. ``damping`` is the first
    step fraction tried; it is halved while the residual fails to drop.
    """

    tol: float = 1e-10
    max_iter: int = 60
    damping: float = 1.0
    max_halvings: int = 40

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class LNSchedule:
    """Increasing boundary levels and the settling threshold of the ladder."""

    N_values: tuple = tuple(range(1, 41))
    stop_delta: float = 1e-6
    compact: object = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.N_values)
        if not vals:
            raise ValueError("schedule is empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("N_values must be strictly increasing")
        if not self.stop_delta > 0:
            raise ValueError("stop_delta must be positive")
        object.__setattr__(self, "N_values", vals)


def liouville_residual(bg: BackgroundMetric, u) -> np.ndarray:
    """Scaled residual ``e^{-2u} (Lap u - K_g) - 1``, zero on boundary rows."""
    u = bg.as_field(u)
    res = np.exp(-2.0 * u) * (laplacian(bg, u) - bg.K_g) - 1.0
    res[~bg.interior_mask] = 0.0
    return res


def _boundary_field(bg, boundary_values):
    """Expand per-component or per-node boundary data to a field mask/value pair."""
    vals = np.zeros(bg.shape)
    bv = boundary_values
    if isinstance(bv, dict):
        for name, v in bv.items():
            c = bg.component(name)
            vals[c.row] = np.broadcast_to(np.asarray(v, dtype=float), (bg.n_theta,))
    else:
        arr = np.asarray(bv, dtype=float)
        if arr.shape == bg.shape:
            for row in bg.boundary_rows:
                vals[row] = arr[row]
        else:
            for c in bg.components:
                vals[c.row] = np.broadcast_to(arr, (bg.n_theta,))
    rows = list(bg.boundary_rows)
    if not np.all(np.isfinite(vals[rows])):
        raise ValueError("boundary data must be finite")
    return vals


def _dirichlet_rows(bg, J):
    """Replace boundary rows of ``J`` by identity rows."""
    J = sp.lil_matrix(J)
    for row in bg.boundary_rows:
        for j in range(bg.n_theta):
            k = row * bg.n_theta + j
            J.rows[k] = [k]
            J.data[k] = [1.0]
    return sp.csr_matrix(J)


def rounding_floor(bg: BackgroundMetric, u) -> float:
    """Smallest scaled residual that double precision can resolve for ``u``.

    The stencil sums terms of size ``|L_ij u_j|`` ~ ``|u| / h^2``; their
    rounding error bounds how small the residual can get on fine grids.
    """
    absL = abs(bg.laplacian_matrix)
    mag = absL @ np.abs(u.ravel()) + np.exp(2.0 * u.ravel())
    scaled = np.exp(-2.0 * u.ravel()) * mag
    return float(16.0 * np.finfo(float).eps * np.max(scaled[bg.interior_mask.ravel()]))


def reciprocal_residual(bg: BackgroundMetric, v) -> np.ndarray:
    """Residual of the Liouville equation written for ``v = e^{-u}``.

    ``-(v Lap v - |grad v|^2 + 1 + K_g v^2)``; in the continuum this equals
    :func:`liouville_residual` of ``u = -log v``. Zero on boundary rows.
    """
    v = bg.as_field(v)
    res = -(v * laplacian(bg, v) - gradient_squared(bg, v) + 1.0 + bg.K_g * v * v)
    res[~bg.interior_mask] = 0.0
    return res


def _reciprocal_floor(bg, v):
    flat = np.abs(v.ravel())
    G1, G2 = bg.gradient_matrices
    mag = (
        flat * (abs(bg.laplacian_matrix) @ flat)
        + np.abs(G1 @ v.ravel()) * (abs(G1) @ flat)
        + np.abs(G2 @ v.ravel()) * (abs(G2) @ flat)
        + 1.0
    )
    return float(16.0 * np.finfo(float).eps * np.max(mag[bg.interior_mask.ravel()]))


def solve_liouville_dirichlet(
    bg: BackgroundMetric,
    boundary_values,
    guess=None,
    s: NewtonSettings | None = None,
    full_output: bool = False,
    form: str = "u",
):
    """Solve ``Lap u = K_g + e^{2u}`` with ``u`` prescribed on the boundary.

    ``boundary_values`` is a scalar (all components), a dict keyed by
    component name, or a field whose boundary rows are read. Returns the
    solution field, or ``(u, info)`` with ``full_output``.

    ``form="u"`` discretises the equation for ``u`` itself. ``form="v"``
    discretises it for ``v = e^{-u}`` (``v Lap v - |grad v|^2 + 1 = 0``),
    which stays resolved when the boundary level is so large that ``u``
    has a boundary layer thinner than the grid spacing.
    """
    s = s or NewtonSettings()
    if form not in ("u", "v"):
        raise ValueError(f"form must be 'u' or 'v', got {form!r}")
    bvals = _boundary_field(bg, boundary_values)
    u = bg.as_field(0.0 if guess is None else guess).copy()
    mask = ~bg.interior_mask
    u[mask] = bvals[mask]
    if form == "u":
        u, info = _newton_log(bg, u, s)
    else:
        v, info = _newton_reciprocal(bg, np.exp(-u), s)
        u = -np.log(v)
    if full_output:
        return u, info
    return u


def _damped_update(x, delta, res, residual_of, s, it, admissible):
    alpha = s.damping
    for _ in range(s.max_halvings):
        trial = x + alpha * delta
        if np.all(np.isfinite(trial)) and admissible(trial):
            with np.errstate(over="ignore", invalid="ignore"):
                r_trial = residual_of(trial)
            if r_trial < res:
                return trial, r_trial
        alpha *= 0.5
    raise NonConvergence(
        "damped Newton step failed to reduce the residual", residual=res, iterations=it
    )


def _newton_log(bg, u, s):
    L = bg.laplacian_matrix
    interior = bg.interior_mask.ravel()

    def sup_res(w):
        return float(np.max(np.abs(liouville_residual(bg, w))))

    res = sup_res(u)
    history = [res]
    it = 0
    while res > max(s.tol, rounding_floor(bg, u)):
        if it >= s.max_iter:
            raise NonConvergence(
                f"Newton did not converge in {s.max_iter} iterations (residual {res:.3e})",
                residual=res,
                iterations=it,
            )
        it += 1
        e2u = np.exp(2.0 * u.ravel())
        F = L @ u.ravel() - bg.K_g.ravel() - e2u
        F[~interior] = 0.0
        J = _dirichlet_rows(bg, L - sp.diags(2.0 * e2u))
        # row scaling keeps the refinement threshold meaningful near the boundary
        scale = np.where(interior, np.exp(-2.0 * u.ravel()), 1.0)
        delta = _linalg.solve(
            sp.diags(scale) @ J, -scale * F, bg.radial, refine_tol=s.tol / 10
        ).reshape(bg.shape)
        u, res = _damped_update(
            u, delta, res, sup_res, s, it, lambda w: bool(np.all(w < 350.0))
        )
        history.append(res)
    return u, {"iterations": it, "residuals": history, "floor": rounding_floor(bg, u)}


def _newton_reciprocal(bg, v, s):
    L = bg.laplacian_matrix
    G1, G2 = bg.gradient_matrices
    interior = bg.interior_mask.ravel()
    K = bg.K_g.ravel()

    def sup_res(w):
        return float(np.max(np.abs(reciprocal_residual(bg, w))))

    res = sup_res(v)
    history = [res]
    it = 0
    while res > max(s.tol, _reciprocal_floor(bg, v)):
        if it >= s.max_iter:
            raise NonConvergence(
                f"Newton did not converge in {s.max_iter} iterations (residual {res:.3e})",
                residual=res,
                iterations=it,
            )
        it += 1
        flat = v.ravel()
        Lv, g1, g2 = L @ flat, G1 @ flat, G2 @ flat
        F = flat * Lv - g1**2 - g2**2 + 1.0 + K * flat**2
        F[~interior] = 0.0
        J = (
            sp.diags(Lv + 2.0 * K * flat)
            + sp.diags(flat) @ L
            - 2.0 * sp.diags(g1) @ G1
            - 2.0 * sp.diags(g2) @ G2
        )
        J = _dirichlet_rows(bg, J)
        # the gradient term couples beyond the tridiagonal band in radial mode
        # only through boundary rows, which are identity rows here
        delta = _linalg.solve(J, -F, bg.radial, refine_tol=s.tol / 10).reshape(bg.shape)
        v, res = _damped_update(
            v, delta, res, sup_res, s, it, lambda w: bool(np.all(w[bg.interior_mask] > 0))
        )
        history.append(res)
    return v, {"iterations": it, "residuals": history, "floor": _reciprocal_floor(bg, v)}


def trusted_mask(bg: BackgroundMetric) -> np.ndarray:
    """Nodes at distance >= 2h from the boundary, where LN output is certified."""
    return bg.distance >= 2.0 * bg.h - 1e-12


def loewner_nirenberg(
    bg: BackgroundMetric,
    sched: LNSchedule | None = None,
    s: NewtonSettings | None = None,
    full_output: bool = False,
    form: str = "v",
):
    """Loewner-Nirenberg solution as the limit of Dirichlet solves ``u = N``.

    Each level is warm-started from the previous one. The ladder stops when
    the sup-change between consecutive levels on the monitored compact set
    drops to ``sched.stop_delta``. Values within ``2h`` of the boundary are
    not resolved; ``info["trusted"]`` marks the certified nodes.

    The default ``form="v"`` solves each level for ``e^{-u}``. With
    ``form="u"`` the levels past ``N ~ log(1/h)`` have unresolved boundary
    layers and the ladder creeps upward by O(h) per decade of ``N``.
    """
    sched = sched or LNSchedule()
    s = s or NewtonSettings()
    compact = bg.compact_mask(sched.compact)
    u = None
    changes = []
    ladder = []
    for N in sched.N_values:
        guess = np.full(bg.shape, min(N, 0.0)) if u is None else u
        u_new = solve_liouville_dirichlet(bg, N, guess, s, form=form)
        if u is not None:
            changes.append(float(np.max(np.abs(u_new - u)[compact])))
        ladder.append(N)
        u = u_new
        if changes and changes[-1] <= sched.stop_delta:
            info = {"levels": ladder, "changes": changes, "trusted": trusted_mask(bg)}
            return (u, info) if full_output else u
    raise ScheduleExhausted(
        f"ladder did not settle to {sched.stop_delta:g} (last change "
        f"{changes[-1] if changes else float('nan'):.3e})",
        last=u,
        last_change=changes[-1] if changes else None,
    )


def disk_level(m: float) -> float:
    """``a_m`` for the disk Dirichlet problem with boundary value ``m``.

    Uses ``a_m = 1 / (e^{-m} + sqrt(1 + e^{-2m}))``, algebraically equal to
    the square root of ``1 + 2e^{-2m} - 2e^{-m} sqrt(1 + e^{-2m})`` but free
    of cancellation for large ``m``.
    """
    e = np.exp(-float(m))
    return 1.0 / (e + np.sqrt(1.0 + e * e))


def exact_disk_dirichlet(m: float):
    """Closed-form solution of ``Lap u = e^{2u}``, ``u = m`` on the unit circle.

    Returns ``(a_m, profile)`` with ``profile(r) = log(2 a_m / (1 - a_m^2 r^2))``.
    """
    a = disk_level(m)

    def profile(r):
        r = np.asarray(r, dtype=float)
        return np.log(2.0 * a) - np.log1p(-(a * r) ** 2)

    return a, profile


def exact_disk_ln(r):
    """Loewner-Nirenberg solution of the unit disk, ``log(2 / (1 - r^2))``."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(r < 1.0, np.log(2.0) - np.log1p(-np.minimum(r, 1.0) ** 2), np.inf)


def exact_cylinder_ln(L: float):
    """Loewner-Nirenberg profile of the flat cylinder ``[0, L] x S^1``.

    ``r -> log(pi / L) - log(sin(pi r / L))``, ``+inf`` at both ends.
    """
    if not L > 0:
        raise ValueError("L must be positive")

    def profile(r):
        r = np.asarray(r, dtype=float)
        inside = (r > 0) & (r < L)
        sn = np.sin(np.pi * np.where(inside, r, 0.5 * L) / L)
        return np.where(inside, np.log(np.pi / L) - np.log(sn), np.inf)

    return profile


def exact_ln(bg: BackgroundMetric) -> np.ndarray:
    """Closed-form Loewner-Nirenberg field on ``bg`` (``+inf`` on the boundary)."""
    if bg.kind == DISK:
        vals = exact_disk_ln(bg.r)
    else:
        vals = exact_cylinder_ln(bg.L)(bg.r)
    return np.repeat(vals[:, None], bg.n_theta, axis=1)
