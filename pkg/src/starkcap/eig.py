"""Non-Hermitian eigenvalue kernels for complex banded and dense matrices.

Dense path: Householder reduction to Hessenberg form followed by
single-shift complex QR.  Banded path: partial-pivoting LU in band storage
driving a Krylov-Schur restarted shift-invert Arnoldi iteration.  Also
inverse iteration for eigenvector residuals and a smallest-singular-value
probe of ``A - z``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import ComplexBandedMatrix, ComplexDenseMatrix

log = logging.getLogger(__name__)

DENSE_CAP = 4000


class SolverError(RuntimeError):
    """Base class for eigensolver failures."""


class ConvergenceError(SolverError):
    """Raised when an iteration does not converge; carries the partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SingularMatrixError(SolverError):
    """Raised when a pivot falls below the singularity threshold."""

    def __init__(self, message, column):
        super().__init__(message)
        self.column = column


@dataclass(frozen=True)
class SpectrumResult:
    """Eigenvalues with optional residual norms and solver provenance.

    ``residuals[i]`` is ``||A v - lambda v|| / ||v||`` for the returned
    eigenvector, or NaN when no eigenvector was computed.
    """

    eigenvalues: tuple
    residuals: tuple
    method: str
    tol: float = float("nan")
    converged: bool = True
    flags: tuple = ()
    info: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.eigenvalues)

    def array(self):
        return np.asarray(self.eigenvalues, dtype=complex)

    def windowed(self, window):
        keep = [i for i, z in enumerate(self.eigenvalues) if window.contains(z)]
        return SpectrumResult(
            eigenvalues=tuple(self.eigenvalues[i] for i in keep),
            residuals=tuple(self.residuals[i] for i in keep),
            method=self.method,
            tol=self.tol,
            converged=self.converged,
            flags=self.flags,
            info=dict(self.info),
        )


def order_near(values, sigma):
    """Indices sorting ``values`` by distance to ``sigma``.

    Ties in distance are broken by smaller imaginary part, then smaller
    real part, so the ordering is deterministic.
    """
    values = np.asarray(values, dtype=complex)
    d = np.abs(values - sigma)
    return np.lexsort((values.real, values.imag, d))


# --------------------------------------------------------------------------
# dense
# --------------------------------------------------------------------------

def _as_dense_array(A):
    if isinstance(A, ComplexDenseMatrix):
        return np.array(A.entries, dtype=np.complex128)
    if isinstance(A, ComplexBandedMatrix):
        return A.to_dense()
    arr = np.array(A, dtype=np.complex128)
    return ComplexDenseMatrix(arr).entries.copy()


def dense_eigenvalues(A, tol=None, dense_cap=DENSE_CAP, schur=False):
    """All eigenvalues of a dense (or banded) matrix.

    Hessenberg reduction, then implicit single-shift QR with Wilkinson
    shifts and deflation when a subdiagonal entry drops below machine
    epsilon relative to its diagonal neighbours.  ``tol`` is recorded but
    the deflation test is always at working precision.

    With ``schur=True`` also returns ``(T, Z)`` with ``A = Z T Z^H``.

    Raises :class:`ConvergenceError` if an eigenvalue needs more than
    ``40 n`` QR sweeps; the exception's ``partial`` attribute holds the
    eigenvalues that did converge.
    """
    a = _as_dense_array(A)
    n = a.shape[0]
    if n > dense_cap:
        raise ValueError(f"dense solver limited to n <= {dense_cap}, got {n}")
    if n == 0:
        return SpectrumResult((), (), "dense_qr", tol=tol or 0.0)
    kl = _lower_bandwidth(a)
    if kl > 1:
        z = _kernels.hessenberg(a, schur)
    else:
        z = np.eye(n, dtype=np.complex128) if schur else np.zeros((0, 0), np.complex128)
    w, info, sweeps = _kernels.hqr(a, schur, z, 40 * max(n, 1))
    if info >= 0:
        partial = SpectrumResult(
            tuple(complex(x) for x in w[info + 1:]),
            (float("nan"),) * (n - info - 1),
            "dense_qr",
            converged=False,
            flags=("no_convergence",),
        )
        raise ConvergenceError(f"QR failed to converge for eigenvalue {info}", partial)
    idx = order_near(w, 0.0)
    res = SpectrumResult(
        eigenvalues=tuple(complex(x) for x in w[idx]),
        residuals=(float("nan"),) * n,
        method="dense_qr",
        tol=float("nan") if tol is None else float(tol),
        info={"sweeps": int(sweeps)},
    )
    if schur:
        return res, a, z
    return res


def _lower_bandwidth(a):
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        if np.any(np.diagonal(a, -k) != 0):
            return k
    return 0


# --------------------------------------------------------------------------
# banded LU
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BandedLU:
    """Partial-pivoting LU factors of a band matrix.

    ``factors`` uses LAPACK ``gbtrf`` storage (2 kl + ku + 1 rows); the U
    factor carries bandwidth up to kl + ku after pivoting.
    """

    factors: np.ndarray
    pivots: np.ndarray
    kl: int
    ku: int
    norm: float

    @property
    def n(self):
        return self.factors.shape[1]

    def solve(self, b, adjoint=False):
        b = np.asarray(b, dtype=np.complex128)
        if b.shape != (self.n,):
            raise ValueError(f"right-hand side must have shape ({self.n},)")
        if adjoint:
            return _kernels.gbtrs_adjoint(self.factors, self.pivots, self.kl, self.ku, b)
        return _kernels.gbtrs(self.factors, self.pivots, self.kl, self.ku, b)


PIVOT_RTOL = 1e-14


def banded_lu(A, shift=0.0):
    """Factor ``A - shift I`` in band storage.

    Raises :class:`SingularMatrixError` when a pivot magnitude falls below
    ``1e-14 * ||A - shift I||_1``.
    """
    ab = A.data
    if shift != 0:
        ab = ab.copy()
        ab[A.ku, :] -= shift
    nrm = float(np.max(np.sum(np.abs(ab), axis=0))) if ab.size else 0.0
    lu, ipiv, info = _kernels.gbtrf(ab, A.kl, A.ku, PIVOT_RTOL * nrm)
    if info >= 0:
        raise SingularMatrixError(f"singular pivot in column {info}", info)
    return BandedLU(lu, ipiv, A.kl, A.ku, nrm)


def solve(lu, b):
    """Solve ``A x = b`` given :func:`banded_lu` factors."""
    return lu.solve(b)


# --------------------------------------------------------------------------
# shift-invert Arnoldi (Krylov-Schur restarts)
# --------------------------------------------------------------------------

def _small_schur(S):
    """Complex Schur form of a small dense matrix: S = Q T Q^H."""
    T = np.array(S, dtype=np.complex128)
    Q = _kernels.hessenberg(T, True)
    _, info, _ = _kernels.hqr(T, True, Q, 40 * max(T.shape[0], 1))
    if info >= 0:
        raise ConvergenceError("QR failed on the projected matrix")
    return np.triu(T), Q


def _reorder(T, Q, select):
    """Move the diagonal entries flagged in ``select`` to the top (stable)."""
    T = T.copy()
    Q = Q.copy()
    sel = list(select)
    ks = 0
    for k in range(len(sel)):
        if sel[k]:
            for j in range(k - 1, ks - 1, -1):
                _kernels.swap_schur(T, Q, j)
                sel[j], sel[j + 1] = sel[j + 1], sel[j]
            ks += 1
    return T, Q


def _triangular_eigvec(T, i):
    """Eigenvector of upper triangular T for eigenvalue T[i, i]."""
    y = np.zeros(T.shape[0], dtype=np.complex128)
    y[i] = 1.0
    lam = T[i, i]
    small = np.finfo(float).eps * max(np.abs(T).max(), 1.0)
    for j in range(i - 1, -1, -1):
        d = T[j, j] - lam
        if abs(d) < small:
            d = small
        y[j] = -(T[j, j + 1:i + 1] @ y[j + 1:i + 1]) / d
    return y / np.linalg.norm(y)


def _orthogonalize(V, j, w):
    """Modified Gram-Schmidt against V[:, :j] with one reorthogonalization."""
    h = np.zeros(j, dtype=np.complex128)
    for _ in range(2):
        for i in range(j):
            c = np.vdot(V[:, i], w)
            h[i] += c
            w -= c * V[:, i]
    return h, w


def shift_invert_arnoldi(A, sigma, k, tol=1e-8, max_restarts=200, v0=None, seed=0):
    """The ``k`` eigenvalues of a banded matrix nearest ``sigma``.

    Arnoldi on ``(A - sigma I)^{-1}`` with Krylov dimension
    ``max(2k + 10, 30)``, Krylov-Schur restarts, and modified Gram-Schmidt
    with one reorthogonalization pass.  Each returned eigenpair satisfies
    ``||A v - lambda v|| / ||v|| <= tol`` unless ``converged`` is False, in
    which case only the converged subset is returned and the result is
    flagged.
    """
    n = A.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    sigma = complex(sigma)
    flags = []
    try:
        lu = banded_lu(A, sigma)
    except SingularMatrixError:
        sigma = sigma + 1e-8 * (1 + abs(sigma))
        flags.append("shift_perturbed")
        lu = banded_lu(A, sigma)

    if n <= max(2 * k + 10, 30) or n <= 40:
        return _arnoldi_small(A, sigma, k, tol, flags)

    m = min(max(2 * k + 10, 30), n - 1)
    rng = np.random.default_rng(seed)
    V = np.zeros((n, m + 1), dtype=np.complex128)
    H = np.zeros((m + 1, m), dtype=np.complex128)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n) if v0 is None else np.array(v0, np.complex128)
    V[:, 0] = v / np.linalg.norm(v)
    anorm = float(np.max(np.sum(np.abs(A.data), axis=0))) + abs(sigma)

    p = 0
    restarts = 0
    inner_tol = tol / anorm
    while True:
        for j in range(p, m):
            w = lu.solve(V[:, j])
            h, w = _orthogonalize(V, j + 1, w)
            H[: j + 1, j] = h
            beta = np.linalg.norm(w)
            H[j + 1, j] = beta
            if beta < 1e-14 * max(np.abs(h).max(), 1.0):
                # invariant subspace: continue with a fresh orthogonal direction
                w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                _, w = _orthogonalize(V, j + 1, w)
                H[j + 1, j] = 0.0
                V[:, j + 1] = w / np.linalg.norm(w)
            else:
                V[:, j + 1] = w / beta

        T, Q = _small_schur(H[:m, :m])
        theta = np.diag(T)
        want = np.argsort(-np.abs(theta), kind="stable")[:k]
        sel = np.zeros(m, dtype=bool)
        sel[want] = True
        T, Q = _reorder(T, Q, sel)
        b = H[m, :m] @ Q

        conv = 0
        for i in range(k):
            y = _triangular_eigvec(T, i)
            if abs(b @ y) <= max(inner_tol, 1e-15) * abs(T[i, i]):
                conv += 1
        if conv >= k:
            vals, vecs, resid = _ritz_pairs(A, V[:, :m] @ Q[:, :k], T[:k, :k], sigma, tol)
            if np.all(resid <= tol) or restarts >= max_restarts:
                break
            inner_tol *= 0.01
        if restarts >= max_restarts:
            vals, vecs, resid = _ritz_pairs(A, V[:, :m] @ Q[:, :k], T[:k, :k], sigma, tol)
            break

        p = min(k + (m - k) // 2, m - 1)
        V[:, :p] = V[:, :m] @ Q[:, :p]
        V[:, p] = V[:, m]
        H[:] = 0
        H[:p, :p] = T[:p, :p]
        H[p, :p] = b[:p]
        restarts += 1

    ok = resid <= tol
    converged = bool(np.all(ok))
    if not converged:
        flags.append("not_converged")
        vals, resid = vals[ok], resid[ok]
    if restarts > 10 * max(1, _TYPICAL_RESTARTS):
        flags.append("slow_convergence")
    idx = order_near(vals, sigma)
    return SpectrumResult(
        eigenvalues=tuple(complex(x) for x in vals[idx]),
        residuals=tuple(float(r) for r in resid[idx]),
        method="shift_invert_arnoldi",
        tol=float(tol),
        converged=converged,
        flags=tuple(flags),
        info={"restarts": restarts, "krylov_dim": m, "sigma": sigma,
              "basis_orthogonality": float(np.abs(V[:, :m].conj().T @ V[:, :m] - np.eye(m)).max())},
    )


_TYPICAL_RESTARTS = 5


def _polish(A, lam, x):
    """Two inverse-iteration steps from ``x`` and a Rayleigh-quotient update.

    Ritz vectors of strongly non-normal matrices can carry residuals well
    above the accuracy of the Ritz value itself; a couple of solves with
    ``A - lam`` recover a vector at roundoff level.
    """
    try:
        v, _ = inverse_iteration(A, lam, iters=2, v0=x)
    except SingularMatrixError:
        return lam, x, float(np.linalg.norm(A.matvec(x) - lam * x))
    Av = A.matvec(v)
    mu = complex(np.vdot(v, Av))
    return mu, v, float(np.linalg.norm(Av - mu * v))


def _ritz_pairs(A, X, Tk, sigma, tol=np.inf):
    k = Tk.shape[0]
    vals = np.empty(k, dtype=np.complex128)
    resid = np.empty(k)
    vecs = np.empty((X.shape[0], k), dtype=np.complex128)
    for i in range(k):
        y = _triangular_eigvec(Tk, i)
        x = X @ y
        x /= np.linalg.norm(x)
        lam = sigma + 1.0 / Tk[i, i]
        r = np.linalg.norm(A.matvec(x) - lam * x)
        if r > tol:
            mu, v, rp = _polish(A, lam, x)
            if rp < r:
                lam, x, r = mu, v, rp
        vals[i] = lam
        vecs[:, i] = x
        resid[i] = r
    return vals, vecs, resid


def _arnoldi_small(A, sigma, k, tol, flags):
    # tiny problems: the Krylov space is the whole space, so solve densely
    res = dense_eigenvalues(A)
    w = res.array()
    idx = order_near(w, sigma)[:k]
    vals = w[idx]
    resid = np.array([inverse_iteration(A, lam)[1] for lam in vals])
    return SpectrumResult(
        eigenvalues=tuple(complex(x) for x in vals),
        residuals=tuple(float(r) for r in resid),
        method="shift_invert_arnoldi",
        tol=float(tol),
        converged=bool(np.all(resid <= tol)),
        flags=tuple(flags) + ("dense_fallback",),
    )


# --------------------------------------------------------------------------
# inverse iteration and sigma_min
# --------------------------------------------------------------------------

def inverse_iteration(A, lam, iters=3, seed=0, v0=None):
    """Eigenvector for a computed eigenvalue ``lam`` of a banded matrix.

    Returns ``(v, residual)`` with ``residual = ||A v - lam v||`` for unit
    ``v``.  The start vector is ``v0`` or a seeded random vector.
    """
    shift = complex(lam)
    for attempt in range(4):
        try:
            lu = banded_lu(A, shift)
            break
        except SingularMatrixError:
            shift = complex(lam) + 10.0 ** (attempt - 12) * (1 + abs(lam))
    else:
        raise SingularMatrixError("could not factor A - lam I", -1)
    if v0 is None:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(A.n) + 1j * rng.standard_normal(A.n)
    else:
        v = np.array(v0, dtype=np.complex128)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    return v, float(np.linalg.norm(A.matvec(v) - lam * v))


@dataclass(frozen=True)
class SigmaMin:
    """Smallest singular value of ``A - z``; ``singular`` marks an LU breakdown."""

    value: float
    iterations: int
    converged: bool
    singular: bool = False

    def __float__(self):
        return self.value


def smallest_singular_value(A, z, rtol=1e-6, maxiter=500, seed=0):
    """sigma_min(A - z I) by inverse iteration on (A - z)^H (A - z).

    Each step solves with the banded LU of ``A - z`` and its adjoint.  A
    singular factorization (``z`` numerically an eigenvalue) yields
    ``SigmaMin(0.0, ..., singular=True)``.
    """
    try:
        lu = banded_lu(A, z)
    except SingularMatrixError:
        return SigmaMin(0.0, 0, True, singular=True)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.n) + 1j * rng.standard_normal(A.n)
    x /= np.linalg.norm(x)
    est = None
    for it in range(1, maxiter + 1):
        y = lu.solve(x, adjoint=True)
        ny = np.linalg.norm(y)
        new = 1.0 / ny
        x = lu.solve(y)
        x /= np.linalg.norm(x)
        if est is not None and abs(new - est) <= rtol * new:
            return SigmaMin(float(new), it, True)
        est = new
    return SigmaMin(float(est), maxiter, False)
