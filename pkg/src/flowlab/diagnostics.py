"""Trajectory post-processing, the comparison checker and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import Trajectory
from .geometry import BackgroundMetric, geodesic_curvature_conformal

ORDERED = "ordered"
VIOLATED = "violated"


@dataclass(frozen=True)
class TimeSeries:
    """Values sampled at strictly increasing times.

    ``values`` is 1-D, or 2-D with one column per entry of ``columns``.
    """

    times: np.ndarray
    values: np.ndarray
    columns: tuple = ("value",)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1) if len(self.columns) == 1 else v.reshape(-1, len(self.columns))
        if v.shape[0] != t.size:
            raise ValueError(f"{t.size} times but {v.shape[0]} value rows")
        if v.shape[1] != len(self.columns):
            raise ValueError(f"{v.shape[1]} value columns but {len(self.columns)} names")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", tuple(self.columns))

    def __len__(self):
        return self.times.size

    def column(self, name=None) -> np.ndarray:
        j = 0 if name is None else self.columns.index(name)
        return self.values[:, j]

    def window(self, t0, t1) -> "TimeSeries":
        m = (self.times >= t0) & (self.times <= t1)
        return TimeSeries(self.times[m], self.values[m], self.columns)

    def slope(self, t0=-np.inf, t1=np.inf, column=None) -> float:
        """Least-squares slope on ``[t0, t1]``; NaN with fewer than two samples."""
        w = self.window(t0, t1)
        if len(w) < 2:
            return float("nan")
        return float(np.polyfit(w.times, w.column(column), 1)[0])


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    first_violation_time: float | None
    verdict: str
    tol: float
    times_compared: int


def _require(traj: Trajectory):
    if not traj.snapshots:
        raise ValueError("trajectory has no snapshots")


def sup_inf_trace(traj: Trajectory):
    """``(sup u, inf u)`` over all nodes at every snapshot."""
    _require(traj)
    t = np.asarray(traj.times)
    sup = np.array([np.max(u) for u in traj.snapshots])
    inf = np.array([np.min(u) for u in traj.snapshots])
    return TimeSeries(t, sup, ("sup",)), TimeSeries(t, inf, ("inf",))


def boundary_curvature_trace(traj: Trajectory, stencil=None) -> dict:
    """Min and max boundary curvature per component at every snapshot.

    The stencil defaults to the one matching the trajectory's form.
    """
    _require(traj)
    stencil = stencil or traj.curvature_stencil
    out = {}
    t = np.asarray(traj.times)
    for c in traj.bg.components:
        rows = []
        for u in traj.snapshots:
            k = geodesic_curvature_conformal(traj.bg, u, c.name, stencil=stencil)
            rows.append((np.min(k), np.max(k)))
        out[c.name] = TimeSeries(t, np.array(rows), ("k_min", "k_max"))
    return out


def step_curvature_trace(traj: Trajectory) -> dict:
    """Per-step min/max boundary curvature recorded during the run."""
    d = traj.diagnostics
    return {
        c.name: TimeSeries(
            d["t"], np.column_stack([d["k_min:" + c.name], d["k_max:" + c.name]]),
            ("k_min", "k_max"),
        )
        for c in traj.bg.components
    }


def ln_distance_trace(traj: Trajectory, u_ln, compact=None) -> TimeSeries:
    """``sup |u(., t) - u_ln|`` over the monitored compact set at every snapshot."""
    _require(traj)
    bg = traj.bg
    # u_ln may be infinite on the boundary; only the compact set is read
    u_ln = bg.as_field(u_ln, check=False)
    mask = bg.compact_mask(compact)
    vals = [np.max(np.abs(u - u_ln)[mask]) for u in traj.snapshots]
    return TimeSeries(np.asarray(traj.times), np.array(vals), ("ln_distance",))


def comparison_check(traj_a: Trajectory, traj_b: Trajectory, tol=1e-6) -> ComparisonReport:
    """Largest ``u_a - u_b`` over nodes and shared snapshot times.

    Verdict is ``ordered`` iff that maximum is at most ``tol``.
    """
    if traj_a.bg != traj_b.bg:
        raise ValueError("trajectories live on different grids")
    _require(traj_a)
    _require(traj_b)
    index_b = {t: i for i, t in enumerate(traj_b.times)}
    worst, first, n = -np.inf, None, 0
    for t, ua in zip(traj_a.times, traj_a.snapshots):
        j = index_b.get(t)
        if j is None:
            continue
        n += 1
        gap = float(np.max(ua - traj_b.snapshots[j]))
        if gap > tol and first is None:
            first = float(t)
        worst = max(worst, gap)
    if n == 0:
        raise ValueError("trajectories share no snapshot times")
    verdict = ORDERED if worst <= tol else VIOLATED
    return ComparisonReport(worst, first, verdict, tol, n)


def fit_fast_growth_constant(times, k, phi, t_min=1.0):
    """Fit ``C`` in ``k >= phi^(1/3) - 1 - C e^{-phi}`` and test it.

    ``C`` is the non-negative least-squares coefficient of
    ``phi^(1/3) - 1 - k ~ C e^{-phi}`` on samples with ``t >= t_min``.
    Returns ``(C, holds, worst_margin)`` where ``worst_margin`` is the least
    ``k - (phi^(1/3) - 1 - C e^{-phi})``; ``holds`` allows a rounding slack
    of ``1e-12`` relative to ``k``.
    """
    t = np.asarray(times, dtype=float)
    k = np.asarray(k, dtype=float)
    phi = np.asarray(phi, dtype=float)
    m = t >= t_min
    if not np.any(m):
        return float("nan"), False, float("nan")
    deficit = np.cbrt(phi[m]) - 1.0 - k[m]
    basis = np.exp(-phi[m])
    denom = float(np.dot(basis, basis))
    C = max(0.0, float(np.dot(basis, deficit)) / denom) if denom > 0 else 0.0
    margin = -deficit + C * basis
    worst = float(np.min(margin))
    # data sitting exactly on the bound should pass despite rounding
    slack = 1e-12 * (1.0 + float(np.max(np.abs(k[m]))))
    return C, bool(np.isfinite(C) and worst >= -slack), worst


# -- CSV ----------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(obj, path, bg: BackgroundMetric | None = None):
    """Write a :class:`TimeSeries` as ``t,<columns>`` or a field as ``r,theta,u``.

    A field is passed as ``obj`` together with its ``bg``. Floats use 17
    significant digits so reading back is exact.
    """
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if isinstance(obj, TimeSeries):
                w.writerow(("t",) + obj.columns)
                for t, row in zip(obj.times, obj.values):
                    w.writerow([_fmt(t)] + [_fmt(v) for v in row])
            else:
                if bg is None:
                    raise TypeError("writing a field needs its background metric")
                u = bg.as_field(obj)
                w.writerow(("r", "theta", "u"))
                for i, r in enumerate(bg.r):
                    for j, th in enumerate(bg.theta):
                        w.writerow((_fmt(r), _fmt(th), _fmt(u[i, j])))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> TimeSeries:
    """Read a time series written by :func:`write_csv`."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(
        len(body), len(header)
    )
    return TimeSeries(data[:, 0], data[:, 1:], tuple(header[1:]))
