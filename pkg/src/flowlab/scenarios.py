"""Boundary-data classes and the named experiment setups."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import EmptyWindow, GridError
from .flow import CURVATURE, DIRICHLET, BoundarySpec, Trajectory
from .geometry import BackgroundMetric

LOG_SHIFT = "LogShift"
POWER = "Power"
LOG_LOG = "LogLog"
CUSTOM = "Custom"


@dataclass(frozen=True)
class LowSpeedFunction:
    """A positive function growing to infinity with eventually small slope.

    ``kind`` picks the closed form: ``LogShift`` is ``log(t + 1)``,
    ``Power`` is ``(t + 1)^alpha`` with ``0 < alpha < 1``, ``LogLog`` is
    ``log(log(t + 100))``. ``Custom`` takes ``params = {"f": ..., "df": ...}``.
    """

    kind: str = LOG_SHIFT
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == POWER:
            alpha = self.params.get("alpha", 0.5)
            if not 0 < alpha < 1:
                raise ValueError(f"Power needs 0 < alpha < 1, got {alpha}")
        elif self.kind == CUSTOM:
            if not (callable(self.params.get("f")) and callable(self.params.get("df"))):
                raise ValueError("Custom needs callables 'f' and 'df'")
        elif self.kind not in (LOG_SHIFT, LOG_LOG):
            raise ValueError(f"unknown low-speed kind {self.kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == LOG_SHIFT:
            return np.log1p(t)
        if self.kind == POWER:
            return (t + 1.0) ** self.params.get("alpha", 0.5)
        if self.kind == LOG_LOG:
            return np.log(np.log(t + 100.0))
        return self.params["f"](t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == LOG_SHIFT:
            return 1.0 / (t + 1.0)
        if self.kind == POWER:
            a = self.params.get("alpha", 0.5)
            return a * (t + 1.0) ** (a - 1.0)
        if self.kind == LOG_LOG:
            return 1.0 / ((t + 100.0) * np.log(t + 100.0))
        return self.params["df"](t)

    def check(self, horizon=1000.0, tau=0.5, n=2001) -> bool:
        """Sampled class test: positive for ``t > 0``, increasing, slope ``<= tau`` on the tail."""
        t = np.linspace(0.0, horizon, n)
        vals, rates = self(t), self.derivative(t)
        tail = t >= horizon / 2
        return bool(
            np.all(vals[1:] > 0)
            and np.all(np.diff(vals) > 0)
            and np.all(rates[tail] <= tau)
            and tau < 1
        )


@dataclass(frozen=True)
class FastGrowthFunction:
    """``y(t) = (y0 + 1/3) e^{3t} - 1/3``, the equality case of ``y' >= 3y + 1``."""

    y0: float = 1.0

    def __post_init__(self):
        if not self.y0 > 0:
            raise ValueError("y0 must be positive")

    def __call__(self, t):
        return (self.y0 + 1.0 / 3.0) * np.exp(3.0 * np.asarray(t, dtype=float)) - 1.0 / 3.0

    def derivative(self, t):
        return 3.0 * (self.y0 + 1.0 / 3.0) * np.exp(3.0 * np.asarray(t, dtype=float))


def _scalar_schedule(func):
    return lambda t, theta: float(func(t))


def low_speed_phi(kind=LOG_SHIFT, params=None) -> BoundarySpec:
    """Dirichlet data ``phi = xi(t)`` for a low-speed function ``xi``."""
    xi = LowSpeedFunction(kind, dict(params or {}))
    return BoundarySpec(
        DIRICHLET,
        _scalar_schedule(xi),
        _scalar_schedule(xi.derivative),
        growth_class="low_speed",
        name=f"low_speed:{kind}",
    )


def fast_growth_y(y0=1.0) -> FastGrowthFunction:
    return FastGrowthFunction(float(y0))


def fast_growth_phi(y0=1.0) -> BoundarySpec:
    """Dirichlet data ``phi = y(t)``."""
    y = fast_growth_y(y0)
    return BoundarySpec(
        DIRICHLET,
        _scalar_schedule(y),
        _scalar_schedule(y.derivative),
        growth_class="fast_growth",
        name=f"fast_growth:{y0:g}",
    )


@dataclass(frozen=True)
class PsiWindow:
    """Admissible curvature band ``lower(t) <= psi <= upper(t)``.

    ``lower`` interpolates the largest measured boundary curvature of the
    auxiliary Dirichlet run (held constant past its horizon). ``first_time``
    is the first sample where ``upper >= lower``.
    """

    times: np.ndarray
    lower_values: np.ndarray
    y: FastGrowthFunction
    first_time: float

    def lower(self, t):
        return np.interp(t, self.times, self.lower_values)

    def upper(self, t):
        return np.cbrt(self.y(t)) - 2.0

    def midpoint_or_lower(self, t):
        lo, hi = self.lower(t), self.upper(t)
        return np.where(hi >= lo, 0.5 * (lo + hi), lo)


def psi_window(u1_traj: Trajectory, y: FastGrowthFunction) -> PsiWindow:
    d = u1_traj.diagnostics
    t = np.asarray(d["t"], dtype=float)
    lower = np.max(
        np.vstack([d["k_max:" + c.name] for c in u1_traj.bg.components]), axis=0
    )
    upper = np.cbrt(y(t)) - 2.0
    ok = np.nonzero(upper >= lower)[0]
    if ok.size == 0:
        raise EmptyWindow(f"window empty on [0, {t[-1]:g}]")
    return PsiWindow(t, lower, y, float(t[ok[0]]))


def divergence_example(bg: BackgroundMetric, eps0=0.1, psi=1.0, margin=0.05):
    """Radial bump below ``-log(1 + eps0)`` with constant curvature data ``psi``.

    ``u0 = c0 + alpha r^2 - r^4`` has its maximum at ``r = sqrt(alpha/2) < 1``.
    ``c0`` puts that maximum ``margin`` below ``-log(1 + eps0)`` and ``alpha``
    is solved so that ``psi = e^{-u0(1)} (u0'(1) + 1)`` holds exactly.
    Raises ``ValueError`` when the rim ends up less than ``1e-3`` below the
    top (small ``eps0 + margin``). Returns ``(u0, bc)``.
    """
    if bg.kind != "disk":
        raise GridError("divergence example lives on the disk")
    if not 0 < eps0 < 1:
        raise ValueError("eps0 must lie in (0, 1)")
    if not 0 < psi <= 1 + eps0:
        raise ValueError("need 0 < psi <= 1 + eps0")
    if not margin > 0:
        raise ValueError("margin must be positive")
    top = -math.log1p(eps0) - margin

    def gap(alpha):
        u_b = top - alpha * alpha / 4.0 + alpha - 1.0
        return (2.0 * alpha - 4.0) + 1.0 - psi * math.exp(u_b)

    # gap(0) < 0 < gap(2) because psi e^{top} < 1
    alpha = brentq(gap, 0.0, 2.0, xtol=1e-15, rtol=1e-15)
    if not alpha > 0:
        raise ValueError("infeasible bump parameters")
    c0 = top - alpha * alpha / 4.0
    u0 = bg.sample_radial(lambda r: c0 + alpha * r**2 - r**4)
    # the rim sits (1 - alpha/2)^2 below the top, which shrinks as alpha -> 2
    if float(np.max(u0)) - float(np.max(u0[-1])) < 1e-3:
        raise ValueError(
            f"bump too flat at the rim for eps0={eps0:g}, margin={margin:g}; raise margin"
        )
    bc = BoundarySpec(CURVATURE, lambda t, theta: float(psi), name=f"divergence:{eps0:g}")
    return u0, bc


def steady_radial_example(bg: BackgroundMetric, b=0.5):
    """``u0 = log(2b / (1 - b^2 r^2))`` with ``psi(t) = 1 + (psi0 - 1) e^{-t}``.

    ``psi0 = e^{-u0(1)} (u0'(1) + 1) = b + (1 - b^2) / (2b)`` is the curvature
    of ``u0`` itself. Returns ``(u0, bc)``.
    """
    if bg.kind != "disk":
        raise GridError("steady radial example lives on the disk")
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    psi0 = b + (1.0 - b * b) / (2.0 * b)
    u0 = bg.sample_radial(lambda r: np.log(2.0 * b) - np.log1p(-(b * r) ** 2))
    bc = BoundarySpec(
        CURVATURE,
        lambda t, theta: 1.0 + (psi0 - 1.0) * math.exp(-t),
        lambda t, theta: -(psi0 - 1.0) * math.exp(-t),
        name=f"steady_radial:{b:g}",
    )
    return u0, bc


def window_psi(win: PsiWindow, gap=0.05, ramp=0.1) -> BoundarySpec:
    """Curvature data inside the window: its midpoint once it opens.

    Before the window opens, and while it is narrower than ``2 * gap``, the
    data sit ``gap`` above the lower edge. The offset ramps in linearly over
    ``ramp`` time units, so ``psi(0)`` equals the lower edge and the data are
    compatible with an initial state shared with the auxiliary run.
    """
    if gap < 0 or ramp <= 0:
        raise ValueError("need gap >= 0 and ramp > 0")

    def psi(t, theta):
        lifted = win.lower(t) + gap * min(1.0, t / ramp)
        return float(max(win.midpoint_or_lower(t), lifted))

    return BoundarySpec(CURVATURE, psi, name="window_midpoint")
