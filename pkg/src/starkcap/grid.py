"""Model potentials, truncated grids, and finite-difference operator assembly.

All operators live on a uniform grid of ``m`` interior nodes in ``(a, b)``
with Dirichlet conditions at both ends and are returned as complex band
matrices:

* ``assemble_cap_hamiltonian``: ``-D2 + x + V(x) - i eps x^2``
* ``assemble_distorted_hamiltonian``: ``-D g D + r + x + theta v + V(x + theta v)``
* ``assemble_cap_distorted``: the latter plus ``-i eps (x + theta v)^2``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """A potential was evaluated outside the region where it is analytic."""


class SingularJacobianError(ValueError):
    """``1 + theta v'(x)`` came too close to zero on the grid."""


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``m`` interior nodes ``a + i h``, ``h = (b - a)/(m + 1)``."""

    a: float
    b: float
    m: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"grid needs a < b, got a={self.a}, b={self.b}")
        if int(self.m) != self.m or self.m < 3:
            raise ValueError(f"grid needs m >= 3 interior points, got m={self.m}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def with_spacing(cls, a, b, h):
        """Grid on [a, b] with spacing as close to ``h`` as the endpoints allow."""
        return cls(a, b, max(3, int(round((b - a) / h)) - 1))

    @property
    def h(self):
        return (self.b - self.a) / (self.m + 1)

    @property
    def x(self):
        return self.a + self.h * np.arange(1, self.m + 1)

    @property
    def midpoints(self):
        """The m + 1 half-integer points a + (i + 1/2) h, i = 0..m."""
        return self.a + self.h * (np.arange(self.m + 1) + 0.5)

    def refined(self):
        """The grid with spacing halved (same endpoints)."""
        return Grid1D(self.a, self.b, 2 * self.m + 1)


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------

class PotentialSpec:
    """A real potential with an analytic continuation off the real axis."""

    kind = "abstract"

    def eval_real(self, x):
        x = np.asarray(x, dtype=float)
        return np.real(self.eval_complex(x.astype(complex)))

    def eval_complex(self, z):
        raise NotImplementedError

    def params(self):
        return {}


@dataclass(frozen=True)
class Zero(PotentialSpec):
    kind = "zero"

    def eval_complex(self, z):
        return np.zeros_like(np.asarray(z, dtype=complex))


@dataclass(frozen=True)
class GaussianWell(PotentialSpec):
    """``-depth * exp(-((x - center)/width)^2)``; entire in x."""

    depth: float
    width: float
    center: float = 0.0
    kind = "gaussian_well"

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("gaussian_well width must be > 0")

    def eval_complex(self, z):
        u = (np.asarray(z, dtype=complex) - self.center) / self.width
        return -self.depth * np.exp(-u * u)

    def params(self):
        return {"depth": self.depth, "width": self.width, "center": self.center}


@dataclass(frozen=True)
class SoftCoulomb(PotentialSpec):
    """``charge / sqrt(reg^2 + (x - center)^2)`` on the principal branch.

    The continuation is only accepted where ``Re(reg^2 + (z - center)^2) > 0``,
    i.e. the square root stays away from its branch cut.
    """

    charge: float
    reg: float
    center: float = 0.0
    kind = "soft_coulomb"

    def __post_init__(self):
        if not self.reg > 0:
            raise ValueError("soft_coulomb reg must be > 0")

    def eval_complex(self, z):
        w = np.asarray(z, dtype=complex) - self.center
        q = self.reg**2 + w * w
        if np.any(q.real <= 0):
            raise DomainError("soft_coulomb continued past Re(reg^2 + (z - center)^2) > 0")
        return self.charge / np.sqrt(q)

    def eval_real(self, x):
        w = np.asarray(x, dtype=float) - self.center
        return self.charge / np.sqrt(self.reg**2 + w * w)

    def params(self):
        return {"charge": self.charge, "reg": self.reg, "center": self.center}


@dataclass(frozen=True)
class SquareWell(PotentialSpec):
    """``-depth`` on ``|x| < half_width``, zero outside, ``-depth/2`` on the walls.

    The wall value is the mean of the two sides, which keeps the
    finite-difference error second order when the walls sit on grid nodes.
    Not analytic at the walls, so complex arguments are accepted only where
    the potential is identically zero (``|Re z| > half_width``) or on the
    real axis.
    """

    depth: float
    half_width: float
    kind = "square_well"

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("square_well half_width must be > 0")

    def eval_real(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return np.where(x < self.half_width, -self.depth, np.where(x == self.half_width, -0.5 * self.depth, 0.0))

    def eval_complex(self, z):
        z = np.asarray(z, dtype=complex)
        inside = np.abs(z.real) <= self.half_width
        if np.any(inside & (z.imag != 0)):
            raise DomainError("square_well has no continuation across its walls")
        return self.eval_real(z.real).astype(complex)

    def params(self):
        return {"depth": self.depth, "half_width": self.half_width}


POTENTIALS = {
    "zero": Zero,
    "gaussian_well": GaussianWell,
    "soft_coulomb": SoftCoulomb,
    "square_well": SquareWell,
}


def make_potential(kind, **params):
    try:
        cls = POTENTIALS[kind]
    except KeyError:
        raise ValueError(f"unknown potential kind {kind!r}; expected one of {sorted(POTENTIALS)}") from None
    return cls(**params)


# --------------------------------------------------------------------------
# matrices
# --------------------------------------------------------------------------

class ComplexBandedMatrix:
    """Square complex matrix in LAPACK band storage.

    ``data[ku + i - j, j] == A[i, j]`` for ``-ku <= i - j <= kl``; the unused
    corners of ``data`` are zero.  Instances are read-only.
    """

    __slots__ = ("n", "kl", "ku", "data")

    def __init__(self, data, kl, ku):
        data = np.array(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] != kl + ku + 1:
            raise ValueError(f"band storage must have kl + ku + 1 = {kl + ku + 1} rows")
        n = data.shape[1]
        if not np.all(np.isfinite(data)):
            raise ValueError("band matrix entries must be finite")
        for r in range(kl + ku + 1):
            off = ku - r  # superdiagonal index of row r
            if off > 0:
                data[r, :off] = 0
            elif off < 0:
                data[r, n + off:] = 0
        data.setflags(write=False)
        self.n, self.kl, self.ku, self.data = n, int(kl), int(ku), data

    @classmethod
    def from_diagonals(cls, diagonals):
        """Build from ``{offset: values}``; offset > 0 is above the diagonal."""
        n = len(diagonals[0])
        kl = max([-k for k in diagonals if k < 0], default=0)
        ku = max([k for k in diagonals if k > 0], default=0)
        data = np.zeros((kl + ku + 1, n), dtype=np.complex128)
        for k, vals in diagonals.items():
            vals = np.asarray(vals)
            if len(vals) != n - abs(k):
                raise ValueError(f"diagonal {k} must have length {n - abs(k)}")
            if k >= 0:
                data[ku - k, k:] = vals
            else:
                data[ku - k, : n + k] = vals
        return cls(data, kl, ku)

    @classmethod
    def from_dense(cls, a, kl, ku):
        a = np.asarray(a, dtype=np.complex128)
        n = a.shape[0]
        i, j = np.indices(a.shape)
        if np.any(a[(i - j > kl) | (j - i > ku)] != 0):
            raise ValueError("matrix has entries outside the requested band")
        data = np.zeros((kl + ku + 1, n), dtype=np.complex128)
        for k in range(-kl, ku + 1):
            d = np.diagonal(a, k)
            if k >= 0:
                data[ku - k, k:] = d
            else:
                data[ku - k, : n + k] = d
        return cls(data, kl, ku)

    def diagonal(self, k=0):
        if k >= 0:
            return self.data[self.ku - k, k:].copy()
        return self.data[self.ku - k, : self.n + k].copy()

    def to_dense(self):
        a = np.zeros((self.n, self.n), dtype=np.complex128)
        idx = np.arange(self.n)
        for k in range(-self.kl, self.ku + 1):
            d = self.diagonal(k)
            if k >= 0:
                a[idx[: self.n - k], idx[k:]] = d
            else:
                a[idx[-k:], idx[: self.n + k]] = d
        return a

    def matvec(self, x):
        from ._kernels import gbmv

        return gbmv(self.data, self.kl, self.ku, np.asarray(x, dtype=np.complex128))

    def conj_transpose(self):
        diags = {-k: np.conj(self.diagonal(k)) for k in range(-self.kl, self.ku + 1)}
        return ComplexBandedMatrix.from_diagonals(diags)

    def add_diagonal(self, d):
        data = self.data.copy()
        data[self.ku, :] += d
        return ComplexBandedMatrix(data, self.kl, self.ku)

    def norm1(self):
        return float(np.max(np.sum(np.abs(self.data), axis=0)))

    def __eq__(self, other):
        if not isinstance(other, ComplexBandedMatrix):
            return NotImplemented
        return (self.n, self.kl, self.ku) == (other.n, other.kl, other.ku) and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.n, self.kl, self.ku, self.data.tobytes()))

    def __repr__(self):
        return f"ComplexBandedMatrix(n={self.n}, kl={self.kl}, ku={self.ku})"


class ComplexDenseMatrix:
    """Square complex matrix; NaN and Inf entries are rejected."""

    __slots__ = ("n", "entries")

    def __init__(self, entries):
        a = np.array(entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("dense matrix must be square")
        if not np.all(np.isfinite(a)):
            raise ValueError("dense matrix entries must be finite")
        a.setflags(write=False)
        self.n, self.entries = a.shape[0], a


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def laplacian_diagonals(grid, fd_order=2):
    """Diagonals of ``-D2`` with Dirichlet ends.

    Order 4 uses the five-point stencil; the ghost value one node beyond
    each wall is taken from the odd reflection u(a - h) = -u(a + h).
    """
    m, h2 = grid.m, grid.h**2
    if fd_order == 2:
        return {0: np.full(m, 2.0 / h2), 1: np.full(m - 1, -1.0 / h2), -1: np.full(m - 1, -1.0 / h2)}
    if fd_order == 4:
        main = np.full(m, 30.0 / (12 * h2))
        main[0] -= 1.0 / (12 * h2)
        main[-1] -= 1.0 / (12 * h2)
        one = np.full(m - 1, -16.0 / (12 * h2))
        two = np.full(m - 2, 1.0 / (12 * h2))
        return {0: main, 1: one, -1: one, 2: two, -2: two}
    raise ValueError(f"fd_order must be 2 or 4, got {fd_order}")


def assemble_cap_hamiltonian(grid, V, eps, fd_order=2, include_stark=True):
    """Matrix of ``-D2 + diag(x + V(x) - i eps x^2)``.

    ``include_stark=False`` drops the ``x`` term, giving ``-D2 + V - i eps x^2``.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    x = grid.x
    diags = laplacian_diagonals(grid, fd_order)
    pot = V.eval_real(x).astype(complex)
    if include_stark:
        pot = pot + x
    if eps:
        pot = pot - 1j * eps * x * x
    diags[0] = diags[0] + pot
    return ComplexBandedMatrix.from_diagonals(diags)


JACOBIAN_FLOOR = 0.1


def _distortion_terms(grid, theta, field):
    """Node and midpoint quantities of the map x -> x + theta v(x)."""
    x, xm = grid.x, grid.midpoints
    theta = complex(theta)
    jac_nodes = 1 + theta * field.dv(x)
    jac_mid = 1 + theta * field.dv(xm)
    jmin = min(np.abs(jac_nodes).min(), np.abs(jac_mid).min())
    if jmin < JACOBIAN_FLOOR:
        raise SingularJacobianError(f"min |1 + theta v'| = {jmin:.3g} < {JACOBIAN_FLOOR}")
    g_mid = jac_mid**-2
    dj = theta * field.d2v(x)
    d2j = theta * field.d3v(x)
    # r = -J^{-1/2} (J^{-1} (J^{-1/2})')' for the 1D metric g = J^2
    r = 0.5 * d2j / jac_nodes**3 - 1.25 * dj * dj / jac_nodes**4
    shift = theta * field.v(x)
    return x, g_mid, r, shift


def divergence_form_diagonals(grid, g_mid):
    """Diagonals of ``-D g D`` with g sampled at the m + 1 midpoints."""
    h2 = grid.h**2
    main = (g_mid[:-1] + g_mid[1:]) / h2
    off = -g_mid[1:-1] / h2
    return {0: main, 1: off, -1: off.copy()}


def assemble_distorted_hamiltonian(grid, V, theta, field):
    """Matrix of the distorted operator

    ``-D g D + diag(r(x) + x + theta v(x) + V(x + theta v(x)))`` with
    ``g = (1 + theta v')^-2`` at midpoints.
    """
    x, g_mid, r, shift = _distortion_terms(grid, theta, field)
    diags = divergence_form_diagonals(grid, g_mid)
    diags[0] = diags[0] + (V.eval_complex(x + shift) + x) + (r + shift)
    return ComplexBandedMatrix.from_diagonals(diags)


def assemble_cap_distorted(grid, V, theta, field, eps):
    """Distorted operator plus ``diag(-i eps (x + theta v(x))^2)``."""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    A = assemble_distorted_hamiltonian(grid, V, theta, field)
    if not eps:
        return A
    xt = grid.x + complex(theta) * field.v(grid.x)
    return A.add_diagonal(-1j * eps * xt * xt)


def kinetic_form_block(grid, theta, field):
    """The ``-D g D`` block of the distorted operator on its own."""
    _, g_mid, _, _ = _distortion_terms(grid, theta, field)
    return ComplexBandedMatrix.from_diagonals(divergence_form_diagonals(grid, g_mid))
