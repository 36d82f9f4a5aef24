"""Boundary-collar test functions and their flow residuals.

The test function is

    B(r, t) = -log(a r + eps(t)) + sign * w(r) + c(t) r,
    w(r)    = A ((r + delta)^-p - delta^-p) <= 0,

with ``r`` the distance to the boundary. Its residual against the flow,
``e^{-2B} (Lap B - K_g) - 1 - B_t``, is evaluated from closed-form
derivatives: ``>= 0`` everywhere on a band certifies a subsolution,
``<= 0`` a supersolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import BackgroundMetric


def _as_callable(x):
    if callable(x):
        return x
    return lambda t, _x=float(x): _x


def _zero(t):
    return 0.0


@dataclass(frozen=True)
class BarrierParams:
    """Parameters of one test function.

    ``slope`` and ``eps`` may be numbers or functions of ``t``; time
    derivatives default to zero for numbers and must be supplied for
    functions (``slope_dot``, ``eps_dot``). ``A = 0`` switches the ``w``
    term off. ``extra_linear`` is the coefficient ``c(t)`` of the optional
    linear term.
    """

    slope: float | Callable = 1.0
    eps: float | Callable = 0.1
    A: float = 2.0
    p: float = 12.0
    delta: float = 0.05
    sign: int = 1
    extra_linear: float | Callable | None = None
    slope_dot: Callable | None = None
    eps_dot: Callable | None = None
    extra_linear_dot: Callable | None = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.A < 0 or (self.A > 0 and self.A < 1):
            raise ValueError("A must be 0 (term off) or at least 1")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        for val, rate, label in (
            (self.slope, self.slope_dot, "slope"),
            (self.eps, self.eps_dot, "eps"),
            (self.extra_linear, self.extra_linear_dot, "extra_linear"),
        ):
            if callable(val) and rate is None:
                raise ValueError(f"time-dependent {label} needs {label}_dot")

    def _rates(self, t):
        a = _as_callable(self.slope)(t)
        eps = _as_callable(self.eps)(t)
        c = _as_callable(self.extra_linear or 0.0)(t)
        a_t = (self.slope_dot or _zero)(t)
        eps_t = (self.eps_dot or _zero)(t)
        c_t = (self.extra_linear_dot or _zero)(t)
        return a, eps, c, a_t, eps_t, c_t

    def w(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * ((r + self.delta) ** -self.p - self.delta**-self.p)


def barrier_value(bp: BarrierParams, r, t: float):
    """Value of the test function at distance ``r`` and time ``t``."""
    r = np.asarray(r, dtype=float)
    a, eps, c, *_ = bp._rates(t)
    if not eps > 0:
        raise ValueError("eps(t) must be positive")
    return -np.log(a * r + eps) + bp.sign * bp.w(r) + c * r


def _collar_coefficient(bg: BackgroundMetric, r):
    """``f_r / (2 f)`` in the distance coordinate."""
    if bg.kind == "disk":
        return -1.0 / (1.0 - r)
    return np.zeros_like(r)


def barrier_residual(
    bp: BarrierParams,
    bg: BackgroundMetric,
    t: float,
    band=(0.0, 0.02),
    n_samples: int = 10_000,
):
    """Flow residual of the test function on ``n_samples`` distances in ``band``.

    Returns ``(r, residual)``. The exponential factor is combined in log
    space; where it overflows the residual is a signed infinity, which
    still carries the certified sign.
    """
    lo, hi = map(float, band)
    limit = 1.0 if bg.kind == "disk" else bg.L / 2
    if not 0 <= lo < hi < limit:
        raise ValueError(f"band must lie in [0, {limit:g}) with lo < hi")
    r = np.linspace(lo, hi, n_samples)
    a, eps, c, a_t, eps_t, c_t = bp._rates(t)
    if not eps > 0:
        raise ValueError("eps(t) must be positive")
    s = a * r + eps
    A, p, d, sg = bp.A, bp.p, bp.delta, bp.sign
    w1 = -A * p * (r + d) ** (-p - 1)
    w2 = A * p * (p + 1) * (r + d) ** (-p - 2)
    B = -np.log(s) + sg * bp.w(r) + c * r
    B_r = -a / s + sg * w1 + c
    B_rr = a * a / (s * s) + sg * w2
    K = 0.0  # both shipped backgrounds are flat
    lap = B_rr + _collar_coefficient(bg, r) * B_r - K
    B_t = -(a_t * r + eps_t) / s + c_t * r
    with np.errstate(over="ignore", divide="ignore"):
        scaled = np.sign(lap) * np.exp(-2.0 * B + np.log(np.abs(lap)))
    scaled = np.where(lap == 0.0, 0.0, scaled)
    return r, scaled - 1.0 - B_t
