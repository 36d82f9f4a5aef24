"""Time integration of the normalized Ricci flow for the conformal factor.

The unknown ``u`` evolves by ``u_t = e^{-2u} (Lap u - K_g) - 1`` under one
of two boundary closures:

* Dirichlet: ``u = phi(x, t)`` on the boundary;
* curvature (Robin): ``du/dn + k_g = psi(x, t) e^u``, which prescribes the
  geodesic curvature of the boundary in ``e^{2u} g``.

Each step is semi-implicit: the diffusion coefficient ``e^{-2u}`` is lagged,
the Laplacian is implicit. The Robin relation is closed with a ghost node
and a Picard loop on the lagged ``e^u``.

``form="v"`` integrates the same flow for ``v = e^{-u}``,
``v_t = v^2 Lap v - v |grad v|^2 + K_g v^3 + v``, where the curvature
condition becomes linear, ``dv/dn = k_g v - psi``. Use it when the boundary
data drive ``u`` past ``log(1/h)``, where the ``u`` profile is unresolved.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import _linalg
from .errors import (
    CompatibilityError,
    NonFiniteStateError,
    SingularLinearSystem,
    StepCollapse,
)
from .geometry import (
    BackgroundMetric,
    geodesic_curvature_conformal,
    laplacian,
    normal_derivative,
)

log = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
CURVATURE = "curvature"

REACHED_HORIZON = "ReachedHorizon"
BLOW_DOWN = "BlowDown"
STEP_COLLAPSE = "StepCollapse"

# e^{-phi} underflows once phi > ~708; the reciprocal form solves with such
# boundary values pinned at the smallest normal double instead of zero.
V_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary data for one run.

    ``schedule(t, theta)`` returns ``phi`` (Dirichlet) or ``psi``
    (curvature) at the angular nodes ``theta`` of a boundary circle; a
    scalar result is broadcast. A dict maps component names to separate
    schedules. ``time_derivative`` has the same signature and is only
    needed by :func:`check_compatibility_dirichlet`.
    """

    mode: str
    schedule: Callable | dict
    time_derivative: Callable | dict | None = None
    growth_class: str = "custom"
    name: str = ""

    def __post_init__(self):
        if self.mode not in (DIRICHLET, CURVATURE):
            raise ValueError(f"mode must be {DIRICHLET!r} or {CURVATURE!r}")
        if self.growth_class not in ("low_speed", "fast_growth", "custom"):
            raise ValueError(f"unknown growth class {self.growth_class!r}")

    def _pick(self, table, comp):
        if isinstance(table, dict):
            return table[comp.name]
        return table

    def values(self, bg: BackgroundMetric, component, t: float) -> np.ndarray:
        comp = bg.component(component)
        f = self._pick(self.schedule, comp)
        out = np.broadcast_to(np.asarray(f(t, bg.theta), dtype=float), (bg.n_theta,))
        if not np.all(np.isfinite(out)):
            raise NonFiniteStateError(f"boundary data not finite at t={t}")
        return out

    def rates(self, bg: BackgroundMetric, component, t: float) -> np.ndarray:
        if self.time_derivative is None:
            raise CompatibilityError("boundary spec has no time derivative")
        comp = bg.component(component)
        f = self._pick(self.time_derivative, comp)
        return np.broadcast_to(np.asarray(f(t, bg.theta), dtype=float), (bg.n_theta,))


def constant_schedule(value: float) -> Callable:
    """Schedule returning ``value`` at all times and nodes."""
    return lambda t, theta: float(value)


@dataclass(frozen=True)
class FlowConfig:
    """Everything :func:`run` needs.

    ``du_max`` bounds the per-step sup-change of ``u`` on nodes the scheme
    solves for (Dirichlet boundary nodes are data and do not count). In
    ``form="v"`` it bounds ``|dv| / max(v, h)`` instead, which is the same
    test where ``v = e^{-u}`` is resolved and ignores nodes where ``v``
    has fallen below grid scale.
    ``dt_max`` caps the step; at most 0.5 keeps the lagged-coefficient update
    order preserving near equilibrium. ``output_times``, when given, are
    hit exactly and snapshotted, so runs can be compared time by time.
    """

    bg: BackgroundMetric
    u0: np.ndarray
    bc: BoundarySpec
    dt0: float = 1e-3
    t_end: float = 1.0
    du_max: float = 0.05
    snapshot_stride: int = 10
    picard_tol: float = 1e-10
    picard_max: int = 200
    dt_max: float = 0.25
    dt_growth: float = 1.5
    output_times: tuple | None = None
    blowdown_drop: float = 20.0
    compat_warn: float = 1e-3
    form: str = "u"
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.dt0 > 0:
            raise ValueError("dt0 must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if not self.du_max > 0:
            raise ValueError("du_max must be positive")
        if self.form not in ("u", "v"):
            raise ValueError("form must be 'u' or 'v'")
        object.__setattr__(self, "u0", self.bg.as_field(self.u0))
        if self.output_times is not None:
            ts = tuple(sorted(float(t) for t in self.output_times if 0 < t <= self.t_end))
            object.__setattr__(self, "output_times", ts)


@dataclass(frozen=True)
class FlowState:
    t: float
    u: np.ndarray
    dt: float | None = None
    picard_iterations: int = 0


@dataclass
class Trajectory:
    """Snapshots of ``u`` plus per-step diagnostics.

    ``diagnostics`` holds equal-length arrays keyed ``t``, ``dt``, ``sup``,
    ``inf`` and, per boundary component ``c``, ``k_min:c`` / ``k_max:c``.
    """

    bg: BackgroundMetric
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    status: str = REACHED_HORIZON
    form: str = "u"
    name: str = ""
    message: str = ""

    def add_snapshot(self, t, u):
        if self.times and t <= self.times[-1]:
            return
        self.times.append(float(t))
        self.snapshots.append(np.array(u, copy=True))

    def snapshot_at(self, t) -> np.ndarray:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.snapshots[i]

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    @property
    def curvature_stencil(self) -> str:
        return "reciprocal" if self.form == "v" else "log"


# -- compatibility -----------------------------------------------------------


def check_compatibility_dirichlet(bg: BackgroundMetric, u0, bc: BoundarySpec):
    """Zeroth- and first-order corner compatibility of Dirichlet data.

    Returns ``(sup |u0 - phi(., 0)|, sup |phi_t(., 0) - (e^{-2u0}(Lap u0 - K_g) - 1)|)``
    over all boundary nodes. The Laplacian on the boundary uses the
    one-sided stencil of :func:`laplacian`.
    """
    if bc.mode != DIRICHLET:
        raise CompatibilityError("Dirichlet compatibility needs a Dirichlet boundary spec")
    if bc.time_derivative is None:
        raise CompatibilityError("boundary spec has no time derivative")
    u0 = bg.as_field(u0)
    lap = laplacian(bg, u0)
    r0 = r1 = 0.0
    for c in bg.components:
        phi0 = bc.values(bg, c.name, 0.0)
        rate = bc.rates(bg, c.name, 0.0)
        speed = np.exp(-2.0 * u0[c.row]) * (lap[c.row] - bg.K_g[c.row]) - 1.0
        r0 = max(r0, float(np.max(np.abs(u0[c.row] - phi0))))
        r1 = max(r1, float(np.max(np.abs(rate - speed))))
    return r0, r1


def check_compatibility_robin(bg: BackgroundMetric, u0, bc: BoundarySpec) -> dict:
    """Sup-norm of ``du0/dn + k_g - psi(., 0) e^{u0}`` on each boundary circle."""
    if bc.mode != CURVATURE:
        raise CompatibilityError("Robin compatibility needs a curvature boundary spec")
    u0 = bg.as_field(u0)
    out = {}
    for c in bg.components:
        psi0 = bc.values(bg, c.name, 0.0)
        gap = normal_derivative(bg, u0, c.name) + c.k_g - psi0 * np.exp(u0[c.row])
        out[c.name] = float(np.max(np.abs(gap)))
    return out


def discrete_robin_data(bg: BackgroundMetric, u) -> dict:
    """Curvature data that make ``u`` stationary under the ghost-node closure.

    For each boundary node, solves the ghost-eliminated boundary row
    ``e^{-2u} (Lap_ghost u - K_g) - 1 = 0`` for the imposed normal
    derivative ``q`` and returns ``psi = e^{-u} (q + k_g)``. This differs from
    :func:`geodesic_curvature_conformal` by the O(h^2) gap between the
    ghost and one-sided stencils.
    """
    u = bg.as_field(u)
    M, gain = bg.robin_stencil
    Mu = (M @ u.ravel()).reshape(bg.shape)
    out = {}
    for c in bg.components:
        row = c.row
        q = (np.exp(2.0 * u[row]) + bg.K_g[row] - Mu[row]) / gain[row]
        out[c.name] = np.exp(-u[row]) * (q + c.k_g)
    return out


# -- single step ---------------------------------------------------------------


def _solved_mask(bg, bc):
    if bc.mode == DIRICHLET:
        return bg.interior_mask
    return np.ones(bg.shape, dtype=bool)


def _dirichlet_system(bg, A, rhs, values):
    A = sp.lil_matrix(A)
    for c, vals in values.items():
        comp = bg.component(c)
        for j in range(bg.n_theta):
            k = comp.row * bg.n_theta + j
            A.rows[k] = [k]
            A.data[k] = [1.0]
            rhs[k] = vals[j]
    return sp.csr_matrix(A), rhs


def _step_log(bg, bc, u, t_new, dt, cfg):
    """One semi-implicit step for ``u``; returns ``(u_new, picard_iterations)``."""
    flat = u.ravel()
    coef = np.exp(-2.0 * flat)
    base_rhs = flat + dt * (-coef * bg.K_g.ravel() - 1.0)
    if bc.mode == DIRICHLET:
        A = sp.identity(bg.size, format="csr") - dt * sp.diags(coef) @ bg.laplacian_matrix
        values = {c.name: bc.values(bg, c.name, t_new) for c in bg.components}
        A, rhs = _dirichlet_system(bg, A, base_rhs.copy(), values)
        return _linalg.solve(A, rhs, bg.radial).reshape(bg.shape), 0

    M, gain = bg.robin_stencil
    A = sp.identity(bg.size, format="csr") - dt * sp.diags(coef) @ M
    psi = np.zeros(bg.shape)
    kg = np.zeros(bg.shape)
    rows = []
    for c in bg.components:
        psi[c.row] = bc.values(bg, c.name, t_new)
        kg[c.row] = c.k_g
        rows.append(c.row)
    current = u
    for it in range(1, cfg.picard_max + 1):
        q = np.zeros(bg.shape)
        q[rows] = psi[rows] * np.exp(current[rows]) - kg[rows]
        rhs = base_rhs + dt * coef * (gain * q).ravel()
        new = _linalg.solve(A, rhs, bg.radial).reshape(bg.shape)
        if not np.all(np.isfinite(new)):
            raise NonFiniteStateError("non-finite iterate in Picard loop")
        gap = np.max(np.abs(psi[rows] * np.exp(new[rows]) - kg[rows] - q[rows]))
        current = new
        if gap <= cfg.picard_tol * max(1.0, float(np.max(np.abs(q[rows])))):
            return current, it
    raise _PicardFailure(f"Picard loop stalled (gap {gap:.3e})")


def _step_reciprocal(bg, bc, u, t_new, dt, cfg):
    """One semi-implicit step for ``v = e^{-u}``; returns ``(u_new, 0)``."""
    v = np.exp(-u)
    flat = v.ravel()
    G1, G2 = bg.gradient_matrices
    g1, g2 = G1 @ flat, G2 @ flat
    K = bg.K_g.ravel()
    rhs = flat * (1.0 + dt) + dt * K * flat**3
    if bc.mode == DIRICHLET:
        grad2 = g1**2 + g2**2
        A = (
            sp.identity(bg.size, format="csr")
            - dt * sp.diags(flat**2) @ bg.laplacian_matrix
            + dt * sp.diags(grad2)
        )
        phis = {c.name: bc.values(bg, c.name, t_new) for c in bg.components}
        values = {name: np.maximum(np.exp(-phi), V_FLOOR) for name, phi in phis.items()}
        A, rhs = _dirichlet_system(bg, A, rhs, values)
    else:
        M, gain = bg.robin_stencil
        diag = np.zeros(bg.size)
        g1 = g1.copy()
        for c in bg.components:
            psi = bc.values(bg, c.name, t_new)
            sl = slice(c.row * bg.n_theta, (c.row + 1) * bg.n_theta)
            # imposed outward derivative dv/dn = k_g v - psi (lagged for the gradient term)
            g1[sl] = c.sign * (c.k_g * flat[sl] - psi)
            diag[sl] += -dt * flat[sl] ** 2 * gain.ravel()[sl] * c.k_g
            rhs[sl] += -dt * flat[sl] ** 2 * gain.ravel()[sl] * psi
        grad2 = g1**2 + g2**2
        A = (
            sp.identity(bg.size, format="csr")
            - dt * sp.diags(flat**2) @ M
            + dt * sp.diags(grad2)
            + sp.diags(diag)
        )
    v_new = _linalg.solve(A, rhs, bg.radial).reshape(bg.shape)
    if not np.all(np.isfinite(v_new)) or np.any(v_new < -V_FLOOR):
        raise _PicardFailure("reciprocal step left the positive cone")
    # values that underflowed are unresolved anyway
    u_new = -np.log(np.maximum(v_new, V_FLOOR))
    if bc.mode == DIRICHLET:
        # keep the exact data, which may exceed what v can represent
        for name, phi in phis.items():
            u_new[bg.component(name).row] = phi
    return u_new, 0


class _PicardFailure(RuntimeError):
    """Internal signal: reject the step and retry with a smaller dt."""


def _change(bg, form, u_old, u_new, solved):
    if form == "u":
        return float(np.max(np.abs(u_new - u_old)[solved]))
    # relative change of v, measured against h where v is below grid scale
    v_old, v_new = np.exp(-u_old[solved]), np.exp(-u_new[solved])
    return float(np.max(np.abs(v_new - v_old) / np.maximum(v_old, bg.h)))


def step(state: FlowState, cfg: FlowConfig, dt: float) -> FlowState:
    """Advance one accepted step, halving ``dt`` until the step is acceptable.

    A step is accepted when its sup-change on solved nodes is at most
    ``cfg.du_max`` (and, for curvature data, the Picard loop converged).
    Raises :class:`StepCollapse` once ``dt`` falls below ``1e-12 * cfg.dt0``.
    The input state is never modified.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    bg, bc = cfg.bg, cfg.bc
    solved = _solved_mask(bg, bc)
    advance = _step_reciprocal if cfg.form == "v" else _step_log
    floor = 1e-12 * cfg.dt0
    while dt >= floor:
        t_new = state.t + dt
        try:
            with np.errstate(over="raise", invalid="raise"):
                u_new, its = advance(bg, bc, state.u, t_new, dt, cfg)
        except (_PicardFailure, FloatingPointError, SingularLinearSystem) as exc:
            log.debug("step rejected at t=%g dt=%g: %s", state.t, dt, exc)
            dt *= 0.5
            continue
        if not np.all(np.isfinite(u_new)):
            dt *= 0.5
            continue
        change = _change(bg, cfg.form, state.u, u_new, solved)
        if change <= cfg.du_max:
            return FlowState(t_new, u_new, dt, its)
        dt *= 0.5
    raise StepCollapse(f"time step collapsed below {floor:g} at t={state.t:.6g}")


# -- driver ----------------------------------------------------------------------


def _record(traj, bg, u, t, dt):
    d = traj.diagnostics
    d["t"].append(t)
    d["dt"].append(np.nan if dt is None else dt)
    d["sup"].append(float(np.max(u)))
    d["inf"].append(float(np.min(u)))
    for c in bg.components:
        k = geodesic_curvature_conformal(bg, u, c.name, stencil=traj.curvature_stencil)
        d["k_min:" + c.name].append(float(np.min(k)))
        d["k_max:" + c.name].append(float(np.max(k)))


def run(cfg: FlowConfig, name: str = "") -> Trajectory:
    """Integrate ``cfg`` from 0 to ``cfg.t_end``.

    Stops early with status ``BlowDown`` once ``sup u`` drops below
    ``inf u0 - cfg.blowdown_drop``, or ``StepCollapse`` when no acceptable
    step exists. Compatibility violations above ``cfg.compat_warn`` only
    warn.
    """
    bg, bc = cfg.bg, cfg.bc
    _warn_compatibility(cfg)
    traj = Trajectory(bg=bg, form=cfg.form, name=name)
    keys = ["t", "dt", "sup", "inf"]
    for c in bg.components:
        keys += ["k_min:" + c.name, "k_max:" + c.name]
    traj.diagnostics = {k: [] for k in keys}

    u0 = cfg.u0.copy()
    if bc.mode == DIRICHLET:
        # boundary nodes carry the data from the first instant
        for c in bg.components:
            u0[c.row] = bc.values(bg, c.name, 0.0)
    state = FlowState(0.0, u0)
    traj.add_snapshot(0.0, u0)
    _record(traj, bg, u0, 0.0, None)
    floor_level = float(np.min(cfg.u0)) - cfg.blowdown_drop

    targets = list(cfg.output_times or ())
    dt = min(cfg.dt0, cfg.dt_max)
    steps = 0
    while state.t < cfg.t_end:
        if steps >= cfg.max_steps:
            traj.status = STEP_COLLAPSE
            traj.message = f"step budget {cfg.max_steps} exhausted at t={state.t:.6g}"
            break
        while targets and targets[0] <= state.t:
            targets.pop(0)
        goal = min(cfg.t_end, targets[0]) if targets else cfg.t_end
        trial = min(dt, goal - state.t)
        landing = trial >= goal - state.t
        try:
            new = step(state, cfg, trial)
        except StepCollapse as exc:
            traj.status = STEP_COLLAPSE
            traj.message = str(exc)
            break
        # halved steps can stop a rounding error short of the goal
        snap = 64 * np.finfo(float).eps * max(1.0, abs(goal))
        if (landing and new.dt == trial) or abs(goal - new.t) <= snap:
            new = replace(new, t=goal)
        steps += 1
        state = new
        _record(traj, bg, state.u, state.t, state.dt)
        at_target = bool(targets) and state.t == targets[0]
        if at_target or (cfg.snapshot_stride and steps % cfg.snapshot_stride == 0):
            traj.add_snapshot(state.t, state.u)
        if float(np.max(state.u)) < floor_level:
            traj.status = BLOW_DOWN
            traj.message = f"sup u fell below {floor_level:.3g} at t={state.t:.6g}"
            break
        # grow only after a full-size step that changed u comfortably
        if state.dt >= trial:
            dt = min(cfg.dt_max, max(dt, state.dt) * cfg.dt_growth)
        else:
            dt = state.dt
    traj.add_snapshot(state.t, state.u)
    traj.diagnostics = {k: np.asarray(v, dtype=float) for k, v in traj.diagnostics.items()}
    return traj


def _warn_compatibility(cfg):
    bg, bc = cfg.bg, cfg.bc
    try:
        if bc.mode == DIRICHLET:
            if bc.time_derivative is None:
                return
            worst = max(check_compatibility_dirichlet(bg, cfg.u0, bc))
        else:
            worst = max(check_compatibility_robin(bg, cfg.u0, bc).values())
    except FloatingPointError:
        return
    if worst > cfg.compat_warn:
        warnings.warn(
            f"initial/boundary data violate compatibility by {worst:.3g}; "
            "the first steps carry a transient",
            RuntimeWarning,
            stacklevel=3,
        )
