"""Closed-form spectra of the free CAP operators.

``-Delta - i eps x^2`` has eigenvalues ``sqrt(eps) e^{-i pi/4} (2|alpha| + n)``
and ``-Delta + x_1 - i eps x^2`` the same values shifted by ``-i/(4 eps)``
(complete the square in ``x_1``), over multi-indices ``alpha`` in
``Z^n_{>=0}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

ROTATION = np.exp(-0.25j * np.pi)


@dataclass(frozen=True)
class OracleSpectrum:
    eigenvalues: tuple
    formula_id: str
    eps: float
    dim: int

    def array(self):
        return np.asarray(self.eigenvalues, dtype=complex)


def level_multiplicity(level, dim):
    """Number of multi-indices in Z^dim_{>=0} with |alpha| = level."""
    return comb(level + dim - 1, dim - 1)


def _enumerate(eps, dim, count, offset):
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if dim < 1 or count < 0:
        raise ValueError("need dim >= 1 and count >= 0")
    vals = []
    level = 0
    while len(vals) < count:
        z = np.sqrt(eps) * ROTATION * (2 * level + dim) + offset
        vals.extend([complex(z)] * level_multiplicity(level, dim))
        level += 1
    vals = vals[:count]
    # |z| grows with the level for both families, so this is already sorted;
    # the explicit sort pins the tie-breaking rule.
    arr = np.asarray(vals, dtype=complex)
    idx = np.lexsort((arr.real, arr.imag, np.abs(arr)))
    return tuple(complex(v) for v in arr[idx])


def harmonic_cap_spectrum(eps, dim=1, count=5):
    """The ``count`` smallest eigenvalues of ``-Delta - i eps x^2``, with multiplicity."""
    return OracleSpectrum(_enumerate(eps, dim, count, 0.0), "harmonic_cap", float(eps), int(dim))


def free_stark_cap_spectrum(eps, dim=1, count=5):
    """The ``count`` smallest eigenvalues of ``-Delta + x_1 - i eps x^2``."""
    return OracleSpectrum(_enumerate(eps, dim, count, -0.25j / eps), "free_stark_cap", float(eps), int(dim))
