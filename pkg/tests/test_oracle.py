import numpy as np
import pytest

from starkcap.oracle import ROTATION, free_stark_cap_spectrum, harmonic_cap_spectrum, level_multiplicity


def test_harmonic_ground_state_example():
    z = harmonic_cap_spectrum(1.0, count=1).eigenvalues[0]
    assert abs(z - (0.70711 - 0.70711j)) < 1e-5


def test_harmonic_levels_1d():
    vals = harmonic_cap_spectrum(0.25, count=4).array()
    assert np.allclose(vals, 0.5 * ROTATION * np.array([1, 3, 5, 7]))


def test_harmonic_multiplicity_2d():
    vals = harmonic_cap_spectrum(1.0, dim=2, count=6).array()
    assert np.allclose(vals, ROTATION * np.array([2, 4, 4, 6, 6, 6]))


def test_free_is_shifted_harmonic():
    for eps in (0.05, 0.3, 2.0):
        h = harmonic_cap_spectrum(eps, dim=2, count=7).array()
        f = free_stark_cap_spectrum(eps, dim=2, count=7).array()
        assert np.allclose(f, h - 0.25j / eps, rtol=0, atol=1e-14)


def test_free_example():
    z = free_stark_cap_spectrum(0.25, count=1).eigenvalues[0]
    assert abs(z - (0.353553 - 1.353553j)) < 1e-6


@pytest.mark.parametrize("eps", [0.01, 0.5, 4.0])
def test_spacing_and_scaling(eps):
    vals = harmonic_cap_spectrum(eps, count=6).array()
    assert np.allclose(np.diff(vals), 2 * np.sqrt(eps) * ROTATION)
    scaled = harmonic_cap_spectrum(4 * eps, count=6).array()
    assert np.allclose(scaled, 2 * vals)


def test_sorted_by_modulus():
    for spec in (harmonic_cap_spectrum(0.3, dim=3, count=20), free_stark_cap_spectrum(0.3, dim=3, count=20)):
        a = np.abs(spec.array())
        assert np.all(np.diff(a) >= -1e-14)


def test_level_multiplicity():
    assert [level_multiplicity(n, 1) for n in range(4)] == [1, 1, 1, 1]
    assert [level_multiplicity(n, 2) for n in range(4)] == [1, 2, 3, 4]
    assert [level_multiplicity(n, 3) for n in range(4)] == [1, 3, 6, 10]


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        harmonic_cap_spectrum(0.0)
    with pytest.raises(ValueError):
        free_stark_cap_spectrum(-1.0)
    with pytest.raises(ValueError):
        harmonic_cap_spectrum(1.0, dim=0)


def test_metadata():
    s = free_stark_cap_spectrum(0.5, dim=2, count=3)
    assert (s.formula_id, s.eps, s.dim, len(s.eigenvalues)) == ("free_stark_cap", 0.5, 2, 3)
