import math

import numpy as np
import pytest

from flowlab import elliptic
from flowlab.errors import ScheduleExhausted
from flowlab.geometry import gauss_curvature_conformal, make_cylinder, make_disk


def a_of(m):
    # direct form of the closed-form radius parameter
    e = math.exp(-m)
    return math.sqrt(1 + 2 * e * e - 2 * e * math.sqrt(1 + e * e))


def test_closed_form_radius_parameter():
    a, _ = elliptic.exact_disk_dirichlet(1.0)
    assert a == pytest.approx(0.697627, abs=1e-4)
    # root of e a^2 + 2a - e = 0, i.e. log(2a / (1 - a^2)) = 1
    assert a == pytest.approx((math.sqrt(1 + math.e**2) - 1) / math.e, rel=1e-14)
    for m in (0.5, 1, 2, 3, 5):
        assert elliptic.disk_level(m) == pytest.approx(a_of(m), rel=1e-12)


def test_closed_form_boundary_value_and_equation():
    for m in (1.0, 3.0):
        a, prof = elliptic.exact_disk_dirichlet(m)
        assert float(prof(1.0)) == pytest.approx(m, abs=1e-10)
        r = np.linspace(0.05, 1.0, 50)
        # u' = 2a^2 r / (1 - a^2 r^2), u'' = 2a^2 (1 + a^2 r^2) / (1 - a^2 r^2)^2
        d = 1 - a * a * r * r
        lap = 2 * a * a * (1 + a * a * r * r) / d**2 + 2 * a * a / d
        assert np.allclose(lap, np.exp(2 * prof(r)), rtol=1e-12)


def test_radius_parameter_increases_to_one():
    vals = [elliptic.disk_level(m) for m in np.linspace(0, 40, 81)]
    assert np.all(np.diff(vals) >= 0)
    assert vals[-1] == pytest.approx(1.0, abs=1e-15)


def test_newton_matches_closed_form():
    bg = make_disk(1024)
    _, prof = elliptic.exact_disk_dirichlet(1.0)
    u = elliptic.solve_liouville_dirichlet(bg, 1.0)
    assert np.max(np.abs(u - bg.sample_radial(prof))) <= 1e-4


def test_newton_second_order_rate():
    _, prof = elliptic.exact_disk_dirichlet(2.0)
    errs = []
    for n in (128, 256):
        bg = make_disk(n)
        errs.append(np.max(np.abs(elliptic.solve_liouville_dirichlet(bg, 2.0) - bg.sample_radial(prof))))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_newton_from_a_solution_stops_fast():
    bg = make_disk(128)
    u0 = elliptic.solve_liouville_dirichlet(bg, math.log(1.4 / 0.51))
    _, info = elliptic.solve_liouville_dirichlet(bg, math.log(1.4 / 0.51), u0, full_output=True)
    assert info["iterations"] <= 2


def test_newton_2d_matches_radial():
    u1 = elliptic.solve_liouville_dirichlet(make_disk(64, 1), 1.0)
    u2 = elliptic.solve_liouville_dirichlet(make_disk(64, 8), 1.0)
    assert np.max(np.abs(u2 - u1)) <= 1e-9


def test_cylinder_high_level_approximates_ln():
    bg = make_cylinder(math.pi, 512)
    u = elliptic.solve_liouville_dirichlet(bg, 8.0, form="v")
    m = (bg.r >= 0.5) & (bg.r <= math.pi - 0.5)
    want = -np.log(np.sin(bg.r[m]))
    assert np.max(np.abs(u[m, 0] - want)) <= 1e-3


def test_cylinder_ln_values():
    prof = elliptic.exact_cylinder_ln(math.pi)
    assert float(prof(math.pi / 2)) == pytest.approx(0.0, abs=1e-15)
    assert float(prof(math.pi / 4)) == pytest.approx(0.5 * math.log(2), abs=1e-12)
    assert np.isinf(prof(0.0)) and np.isinf(prof(math.pi))
    L = 2.0
    r = np.linspace(0.2, 1.8, 20)
    u = elliptic.exact_cylinder_ln(L)(r)
    upp = (math.pi / L) ** 2 / np.sin(math.pi * r / L) ** 2
    assert np.allclose(upp, np.exp(2 * u), rtol=1e-12)


def test_ln_disk_values():
    bg = make_disk(512)
    u = elliptic.loewner_nirenberg(bg)
    assert np.interp(0.0, bg.r, u[:, 0]) == pytest.approx(math.log(2), abs=1e-4)
    assert np.interp(0.5, bg.r, u[:, 0]) == pytest.approx(math.log(8 / 3), abs=1e-4)


def test_short_ladder_does_not_settle():
    # the level-to-level change near r = 0.9 decays like e^{-N}; ten levels are not enough
    with pytest.raises(ScheduleExhausted):
        elliptic.loewner_nirenberg(make_disk(256), elliptic.LNSchedule(tuple(range(1, 11)), 1e-6))


def test_ln_cylinder_midpoint():
    bg = make_cylinder(math.pi, 1024)
    u = elliptic.loewner_nirenberg(bg)
    assert u[512, 0] == pytest.approx(0.0, abs=1e-4)


def test_ln_ladder_monotone():
    bg = make_disk(256)
    prev = None
    for N in range(1, 15):
        u = elliptic.solve_liouville_dirichlet(bg, float(N), prev, form="v")
        if prev is not None:
            assert np.min(u - prev) >= -1e-8
        prev = u


def test_ln_is_hyperbolic_on_trusted_region():
    bg = make_disk(256)
    u = elliptic.loewner_nirenberg(bg)
    K = gauss_curvature_conformal(bg, u)
    m = elliptic.trusted_mask(bg) & (bg.r <= 0.9)[:, None]
    assert np.max(np.abs(K + 1)[m]) < 1e-3


def test_ladder_exhausted():
    with pytest.raises(ScheduleExhausted):
        elliptic.loewner_nirenberg(make_disk(32), elliptic.LNSchedule((1.0, 2.0), 1e-12))


@pytest.mark.parametrize(
    "kwargs", [{"tol": 0}, {"max_iter": 0}, {"damping": 1.5}]
)
def test_newton_settings_validation(kwargs):
    with pytest.raises(ValueError):
        elliptic.NewtonSettings(**kwargs)


def test_schedule_validation():
    with pytest.raises(ValueError):
        elliptic.LNSchedule((2.0, 1.0))
    with pytest.raises(ValueError):
        elliptic.LNSchedule(())
