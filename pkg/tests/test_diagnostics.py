import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowlab import diagnostics, elliptic
from flowlab.diagnostics import TimeSeries
from flowlab.flow import DIRICHLET, BoundarySpec, FlowConfig, Trajectory, constant_schedule, run
from flowlab.geometry import make_disk


def steady_run(bg, m=2.0, t_end=1.0, form="u"):
    u0 = elliptic.solve_liouville_dirichlet(bg, m, form=form)
    bc = BoundarySpec(DIRICHLET, constant_schedule(m), constant_schedule(0.0))
    return run(FlowConfig(bg, u0, bc, t_end=t_end, form=form, snapshot_stride=1))


def single(bg, u):
    traj = Trajectory(bg=bg)
    traj.add_snapshot(0.0, bg.as_field(u))
    return traj


def test_time_series_validation():
    with pytest.raises(ValueError):
        TimeSeries([0, 1], [1.0])
    with pytest.raises(ValueError):
        TimeSeries([1, 0], [1.0, 2.0])
    with pytest.raises(ValueError):
        TimeSeries([0, 1], np.ones((2, 3)), ("a", "b"))
    ts = TimeSeries([0, 1, 2, 3], [[0, 1], [2, 1], [4, 1], [6, 1]], ("a", "b"))
    assert ts.slope() == pytest.approx(2.0)
    assert ts.slope(column="b") == pytest.approx(0.0, abs=1e-14)
    assert len(ts.window(1, 2)) == 2
    assert math.isnan(ts.slope(10, 20))


def test_sup_inf_single_snapshot():
    bg = make_disk(16)
    sup, inf = diagnostics.sup_inf_trace(single(bg, 0.0))
    assert sup.column()[0] == 0.0 and inf.column()[0] == 0.0


def test_traces_need_snapshots():
    with pytest.raises(ValueError):
        diagnostics.sup_inf_trace(Trajectory(bg=make_disk(16)))


def test_steady_traces_constant():
    bg = make_disk(128)
    traj = steady_run(bg)
    sup, inf = diagnostics.sup_inf_trace(traj)
    assert np.ptp(sup.column()) <= 1e-9 and np.ptp(inf.column()) <= 1e-9
    k = diagnostics.boundary_curvature_trace(traj)["outer"]
    assert np.ptp(k.values) <= 1e-9
    a, _ = elliptic.exact_disk_dirichlet(2.0)
    assert k.column("k_min")[0] == pytest.approx(a + (1 - a * a) / (2 * a), abs=2e-3)
    steps = diagnostics.step_curvature_trace(traj)["outer"]
    assert np.ptp(steps.values) <= 1e-9


def test_ln_distance_of_ln_itself():
    bg = make_disk(256)
    u = elliptic.loewner_nirenberg(bg)
    d = diagnostics.ln_distance_trace(single(bg, u), elliptic.exact_ln(bg))
    assert d.column()[0] < 1e-4


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-2, 2))
def test_curvature_trace_shift(c):
    bg = make_disk(64, 4)
    u = bg.sample_radial(lambda r: np.log(1.4 / (1 - 0.49 * r * r)))
    k0 = diagnostics.boundary_curvature_trace(single(bg, u))["outer"].values
    k1 = diagnostics.boundary_curvature_trace(single(bg, u + c))["outer"].values
    assert np.allclose(k1, math.exp(-c) * k0, rtol=1e-10)


def test_comparison_identical_and_swapped():
    bg = make_disk(32)
    bc = BoundarySpec(DIRICHLET, constant_schedule(0.0), constant_schedule(0.0))
    times = (0.5, 1.0)
    lo = run(FlowConfig(bg, bg.as_field(0.0), bc, output_times=times, snapshot_stride=0))
    hi_bc = BoundarySpec(DIRICHLET, constant_schedule(0.2), constant_schedule(0.0))
    hi = run(FlowConfig(bg, bg.as_field(0.2), hi_bc, output_times=times, snapshot_stride=0))
    rep = diagnostics.comparison_check(lo, lo)
    assert rep.max_violation == 0.0 and rep.verdict == diagnostics.ORDERED
    assert rep.first_violation_time is None and rep.times_compared == 3
    assert diagnostics.comparison_check(lo, hi, 1e-6).verdict == diagnostics.ORDERED
    bad = diagnostics.comparison_check(hi, lo, 1e-6)
    assert bad.verdict == diagnostics.VIOLATED
    assert bad.first_violation_time == 0.0
    assert bad.max_violation == pytest.approx(0.2, abs=1e-12)


def test_comparison_needs_same_grid():
    with pytest.raises(ValueError):
        diagnostics.comparison_check(single(make_disk(16), 0), single(make_disk(32), 0))


def test_fast_growth_fit():
    t = np.linspace(0, 3, 31)
    phi = 1 + t
    k = np.cbrt(phi) - 1 - 2.5 * np.exp(-phi)
    C, holds, worst = diagnostics.fit_fast_growth_constant(t, k, phi)
    assert C == pytest.approx(2.5, rel=1e-12)
    assert holds
    assert worst == pytest.approx(0.0, abs=1e-12)
    bent = k.copy()
    bent[-1] -= 1.0
    C, holds, _ = diagnostics.fit_fast_growth_constant(t, bent, phi)
    assert not holds
    assert diagnostics.fit_fast_growth_constant(t, k, phi, t_min=10)[1] is False


def test_csv_empty_series(tmp_path):
    p = tmp_path / "e.csv"
    diagnostics.write_csv(TimeSeries([], []), p)
    assert p.read_text() == "t,value\n"


def test_csv_two_rows(tmp_path):
    p = tmp_path / "s.csv"
    diagnostics.write_csv(TimeSeries([0, 1], [1, 2]), p)
    assert p.read_text().splitlines() == ["t,value", "0,1", "1,2"]


def test_csv_field(tmp_path):
    bg = make_disk(8)
    p = tmp_path / "f.csv"
    diagnostics.write_csv(bg.sample_radial(lambda r: r), p, bg)
    lines = p.read_text().splitlines()
    assert len(lines) == 10
    assert lines[0] == "r,theta,u"
    with pytest.raises(TypeError):
        diagnostics.write_csv(bg.as_field(0.0), p)


def test_csv_unwritable(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        diagnostics.write_csv(TimeSeries([0], [1]), tmp_path / "missing" / "x.csv")


@settings(max_examples=50, deadline=None)
@given(
    vals=st.lists(
        st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False)),
        min_size=0,
        max_size=20,
    )
)
def test_csv_round_trip(tmp_path_factory, vals):
    p = tmp_path_factory.mktemp("rt") / "x.csv"
    ts = TimeSeries(np.arange(len(vals), dtype=float) * 0.1, np.array(vals).reshape(-1, 2), ("a", "b"))
    diagnostics.write_csv(ts, p)
    back = diagnostics.read_csv(p)
    assert back.columns == ("a", "b")
    assert np.array_equal(back.times, ts.times)
    assert np.array_equal(back.values, ts.values)
