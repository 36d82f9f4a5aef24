import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowlab.errors import GridError
from flowlab.geometry import (
    gauss_curvature_conformal,
    geodesic_curvature_conformal,
    gradient_squared,
    laplacian,
    make_cylinder,
    make_disk,
    normal_derivative,
)

A1 = 0.697627  # a_1 for boundary value 1, from 1/(e^-1 + sqrt(1 + e^-2))


def hyperbolic(r):
    # the boundary node is clipped; only r <= 0.9 is ever checked
    r = np.minimum(r, 0.99)
    return np.log(2.0) - np.log1p(-r * r)


def test_disk_grid():
    bg = make_disk(8, 1)
    assert np.allclose(bg.r, np.arange(9) / 8)
    assert bg.components[0].k_g == 1.0
    assert make_disk(256, 64).shape == (257, 64)


def test_grid_too_coarse():
    with pytest.raises(GridError, match="coarse"):
        make_disk(4, 1)


def test_cylinder_grid():
    bg = make_cylinder(math.pi, 64, 1)
    assert bg.r[-1] == pytest.approx(math.pi)
    assert [c.name for c in bg.components] == ["inner", "outer"]
    assert all(c.k_g == 0.0 for c in bg.components)
    assert make_cylinder(2, 128, 32).shape == (129, 32)
    with pytest.raises(GridError):
        make_cylinder(-1, 64, 1)


@pytest.mark.parametrize("n_theta", [1, 16])
def test_laplacian_quadratic_exact(n_theta):
    bg = make_disk(32, n_theta)
    lap = laplacian(bg, bg.sample_radial(lambda r: r**2))
    assert np.max(np.abs(lap - 4.0)) <= 1e-12


def test_laplacian_hyperbolic_second_order():
    errs = []
    for n in (128, 256, 512):
        bg = make_disk(n)
        u = bg.sample_radial(hyperbolic)
        m = bg.r <= 0.9
        errs.append(np.max(np.abs(laplacian(bg, u) - np.exp(2 * u))[m]))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_laplacian_cylinder_sine():
    L = 2.0
    errs = []
    for n in (64, 128):
        bg = make_cylinder(L, n)
        u = bg.sample_radial(lambda r: np.sin(np.pi * r / L))
        want = -((np.pi / L) ** 2) * u
        errs.append(np.max(np.abs(laplacian(bg, u) - want)[1:-1]))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_laplacian_harmonic_2d_converges_in_theta():
    # x^2 - y^2 + x is harmonic; the error is the angular truncation
    errs = []
    for nt in (32, 64, 128):
        bg = make_disk(64, nt)
        u = bg.sample(lambda R, T: R**2 * np.cos(2 * T) + R * np.cos(T))
        errs.append(np.max(np.abs(laplacian(bg, u))[:-1]))
    assert errs[2] < 0.05
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_normal_derivative_examples():
    bg = make_disk(128)
    assert normal_derivative(bg, bg.sample_radial(lambda r: r**2), "outer") == pytest.approx(2.0)
    cyl = make_cylinder(math.pi, 64)
    assert normal_derivative(cyl, cyl.sample_radial(lambda r: r), "inner") == pytest.approx(-1.0)
    # bounded profile with b = 0.7: 2 b^2 / (1 - b^2)
    u = bg.sample_radial(lambda r: np.log(1.4 / (1 - 0.49 * r * r)))
    assert normal_derivative(bg, u, "outer")[0] == pytest.approx(0.98 / 0.51, abs=1e-3)


@pytest.mark.parametrize("c", [0.0, 0.7, -1.3])
def test_gauss_curvature_flat(c):
    bg = make_disk(32, 8)
    assert np.max(np.abs(gauss_curvature_conformal(bg, bg.as_field(c)))) <= 1e-10


def test_gauss_curvature_hyperbolic():
    bg = make_disk(256)
    K = gauss_curvature_conformal(bg, bg.sample_radial(hyperbolic))
    assert np.max(np.abs(K + 1.0)[bg.r <= 0.9]) < 1e-3


def test_geodesic_curvature_examples():
    bg = make_disk(64, 4)
    for stencil in ("log", "reciprocal"):
        assert np.allclose(geodesic_curvature_conformal(bg, bg.as_field(0.0), "outer", stencil), 1.0)
    cyl = make_cylinder(math.pi, 64)
    for comp in ("inner", "outer"):
        assert geodesic_curvature_conformal(cyl, cyl.as_field(0.0), comp)[0] == 0.0
    bg = make_disk(1024)
    u = bg.sample_radial(lambda r: np.log(2 * A1 / (1 - A1**2 * r**2)))
    k = geodesic_curvature_conformal(bg, u, "outer")[0]
    assert k == pytest.approx(1.06553, abs=1e-4)


def test_geodesic_curvature_unknown_stencil():
    bg = make_disk(16)
    with pytest.raises(ValueError):
        geodesic_curvature_conformal(bg, bg.as_field(0.0), "outer", "cubic")


def test_gradient_squared_linear():
    bg = make_cylinder(1.0, 32)
    g = gradient_squared(bg, bg.sample_radial(lambda r: 3 * r))
    assert np.allclose(g, 9.0)


def test_field_checks():
    bg = make_disk(16, 4)
    with pytest.raises(GridError):
        bg.as_field(np.zeros((3, 3)))
    bad = np.zeros(bg.shape)
    bad[0, 1] = 1.0
    with pytest.raises(GridError, match="origin"):
        bg.as_field(bad)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-3, 3), b=st.floats(0.1, 0.9))
def test_curvature_scaling_identities(c, b):
    bg = make_disk(64, 4)
    u = bg.sample_radial(lambda r: np.log(2 * b / (1 - b * b * r * r)))
    K0 = gauss_curvature_conformal(bg, u)
    K1 = gauss_curvature_conformal(bg, u + c)
    assert np.allclose(K1, np.exp(-2 * c) * K0, rtol=1e-8, atol=0)
    for stencil in ("log", "reciprocal"):
        k0 = geodesic_curvature_conformal(bg, u, "outer", stencil)
        k1 = geodesic_curvature_conformal(bg, u + c, "outer", stencil)
        assert np.allclose(k1, np.exp(-c) * k0, rtol=1e-8)


@settings(max_examples=20, deadline=None)
@given(coeffs=st.lists(st.floats(-2, 2), min_size=3, max_size=3), kind=st.sampled_from(["disk", "cylinder"]))
def test_radial_and_2d_agree(coeffs, kind):
    def prof(r):
        return coeffs[0] + coeffs[1] * r**2 + coeffs[2] * np.sin(r)

    if kind == "disk":
        b1, b2 = make_disk(32, 1), make_disk(32, 12)
    else:
        b1, b2 = make_cylinder(2.0, 32, 1), make_cylinder(2.0, 32, 12)
    l1 = laplacian(b1, b1.sample_radial(prof))
    l2 = laplacian(b2, b2.sample_radial(prof))
    assert np.max(np.abs(l2 - l1)) <= 1e-12 * (1 + np.max(np.abs(l1)))
