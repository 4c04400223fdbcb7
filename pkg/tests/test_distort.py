import numpy as np
import pytest
from scipy.integrate import quad

from starkcap.distort import (CappedCone, ConeParams, ZeroField, bump_mass, build_field_1d, build_field_2d,
                              cone_contains, mollifier)

P = ConeParams(0.25, 5.0, 1.0)
C = P.scale


def test_params_validation():
    with pytest.raises(ValueError):
        ConeParams(0.0, 1.0)
    with pytest.raises(ValueError):
        ConeParams(1.0, 1.0, 1.5)
    assert ConeParams(1.0, 0.0).scale == pytest.approx(np.sqrt(2))


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("radius", [1.0, 0.4])
def test_mollifier_unit_mass(dim, radius):
    if dim == 1:
        mass = quad(lambda s: mollifier(np.array([s]), radius)[0], -radius, radius, epsabs=1e-14)[0]
    else:
        mass = 2 * np.pi * quad(lambda s: s * mollifier(np.array([[s, 0.0]]), radius, dim=2)[0], 0, radius,
                                epsabs=1e-14)[0]
    assert abs(mass - 1) < 1e-10


def test_bump_mass_values():
    # the 1D value is a classical constant
    assert bump_mass(1) == pytest.approx(0.443993816168, rel=1e-10)
    with pytest.raises(ValueError):
        bump_mass(3)


def test_cone_contains_examples():
    assert cone_contains([-5.0], P)
    assert not cone_contains([-5.01], P)
    assert cone_contains([0.0, 1.25], P)
    assert not cone_contains([0.0, 1.26], P)
    assert not cone_contains([-6.0, 0.0], P)


# -------------------------------------------------------------------- 1D

F1 = build_field_1d(P)


def test_1d_field_plateaus():
    assert np.all(F1.v(np.linspace(-4, 20, 50)) == 0)
    assert np.allclose(F1.v(np.linspace(-100, -6, 50)), C, rtol=0, atol=1e-15)
    assert np.all(F1.v(np.linspace(-100, -6, 50)) >= 1)


def test_1d_field_midpoint():
    assert F1.v(np.array([-5.0]))[0] == pytest.approx(C / 2, abs=1e-10)


def test_1d_field_is_gradient_and_derivatives_consistent():
    x = np.linspace(-6.3, -3.7, 27)
    h = 1e-4
    for f, df in ((F1.F, F1.v), (F1.v, F1.dv), (F1.dv, F1.d2v), (F1.d2v, F1.d3v)):
        fd = (f(x + h) - f(x - h)) / (2 * h)
        # central differences carry an O(h^2) truncation error; d3v reaches ~70 here
        scale = max(1.0, np.abs(df(x)).max())
        assert np.max(np.abs(fd - df(x))) < 1e-5 * scale


def test_1d_field_F_outside():
    x = np.array([-10.0, -3.0])
    assert np.allclose(F1.F(x), [C * (-5.0), 0.0])


def test_1d_field_monotone_and_bounded():
    x = np.linspace(-8, -2, 400)
    v = F1.v(x)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all((v >= 0) & (v <= C))
    assert np.all(F1.dv(x) <= 0)


def test_zero_field():
    Z = ZeroField(P)
    x = np.linspace(-10, 10, 11)
    for f in (Z.F, Z.v, Z.dv, Z.d2v, Z.d3v):
        assert np.all(f(x) == 0)


# -------------------------------------------------------------------- 2D

@pytest.fixture(scope="module")
def field2():
    return build_field_2d(ConeParams(0.5, 3.0, 1.0))


def test_capped_cone_geometry():
    S = CappedCone(0.5, 3.0)
    assert S.contains(np.array([10.0, 0.0]))
    assert S.contains(np.array([0.0, 1.49]))
    assert not S.contains(np.array([0.0, 1.6]))
    assert not S.contains(np.array([-3.0, 0.0]))  # the apex is cut off
    # distance is 1-Lipschitz
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-10, 10, (2, 500, 2))
    da, db = S.project(a)[0], S.project(b)[0]
    assert np.all(np.abs(da - db) <= np.linalg.norm(a - b, axis=1) + 1e-12)
    # the capped set sits inside the cone
    p = rng.uniform(-10, 10, (2000, 2))
    inside = S.contains(p)
    cone = np.abs(p[:, 1]) <= 0.5 * (p[:, 0] + 3.0)
    assert np.all(cone[inside])


def test_2d_v_direction_outside_upper_face(field2):
    # beyond the upper face, farther than the bump radius, v = -c * outward normal
    p = field2.params
    S = field2.set
    s = np.array([2.0, 10.0, 40.0])
    d = np.array([1.5, 7.0, 30.0])
    pts = S.tangent + s[:, None] * S.direction + d[:, None] * S.outward
    v = field2.v(pts)
    assert np.allclose(v[:, 1], -v[:, 0] / p.K, rtol=1e-8, atol=1e-12)
    assert np.allclose(v[:, 0], 1.0, rtol=2e-6)


def test_2d_signs_in_second_quadrant(field2):
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.uniform(-30, 0, 300), rng.uniform(0, 30, 300)])
    v = field2.v(pts)
    assert np.all(v[:, 0] >= -1e-14)
    assert np.all(v[:, 1] <= 1e-14)


def test_2d_vanishes_deep_inside(field2):
    pts = np.array([[10.0, 0.0], [20.0, 5.0], [5.0, -2.0]])
    assert np.all(field2.v(pts) == 0)
    assert np.all(field2.dv(pts) == 0)


def test_2d_mirror_symmetry(field2):
    rng = np.random.default_rng(2)
    pts = rng.uniform(-15, 10, (100, 2))
    mir = pts * np.array([1.0, -1.0])
    v, vm = field2.v(pts), field2.v(mir)
    assert np.allclose(vm[:, 0], v[:, 0], atol=1e-13)
    assert np.allclose(vm[:, 1], -v[:, 1], atol=1e-13)


def test_2d_gradient_of_F(field2):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-6, 2, (20, 2))
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fdF = (field2.F(pts + e) - field2.F(pts - e)) / (2 * h)
        assert np.max(np.abs(fdF - field2.v(pts)[:, j])) < 1e-6


def test_2d_jacobian_converges(field2):
    # dv is not a difference quotient of the quadrature v; compare it with
    # a finer rule instead
    fine = build_field_2d(field2.params, nodes_per_axis=128)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-8, 4, (100, 2))
    J, Jf = field2.dv(pts), fine.dv(pts)
    assert np.max(np.abs(J - Jf)) < 0.05 * np.abs(Jf).max()
    assert np.max(np.abs(Jf - Jf.transpose(0, 2, 1))) < 5e-3 * np.abs(Jf).max()


def test_2d_derivative_decay(field2):
    # |dv(x)| <x> stays bounded along rays leaving the cone
    for angle in (0.6 * np.pi, 0.8 * np.pi, np.pi):
        r = np.geomspace(5, 500, 20)
        pts = np.column_stack([r * np.cos(angle), r * np.sin(angle)])
        norms = np.linalg.norm(field2.dv(pts), axis=(1, 2)) * np.sqrt(1 + r**2)
        assert norms.max() < 10
        assert norms[-1] <= norms[:5].max() + 1e-12


def test_2d_too_few_nodes():
    with pytest.raises(ValueError):
        build_field_2d(P, nodes_per_axis=8)
