"""Compiled inner loops for the eigenvalue and linear-solver routines.

Everything here works on plain complex128 arrays; the public wrappers in
:mod:`starkcap.eig` do validation and packaging.
"""
import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def _cabs1(z):
    return abs(z.real) + abs(z.imag)


@njit(cache=True, nogil=True)
def givens(x, y):
    """Return (c, s, r) with [[c, s], [-conj(s), c]] @ [x, y] = [r, 0]."""
    if y == 0:
        return 1.0, 0j, x
    if x == 0:
        ay = abs(y)
        return 0.0, np.conj(y) / ay, complex(ay)
    nx = abs(x)
    nrm = np.hypot(nx, abs(y))
    alpha = x / nx
    return nx / nrm, alpha * np.conj(y) / nrm, alpha * nrm


# --------------------------------------------------------------------------
# banded LU with partial pivoting (LAPACK gbtf2 layout)
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def gbtrf(ab, kl, ku, pivtol):
    """Factor a band matrix held as ab[ku + i - j, j] = A[i, j].

    Returns (lu, ipiv, info); ``lu`` has 2*kl + ku + 1 rows so that the
    U factor may grow to bandwidth kl + ku.  ``info`` is -1 on success,
    otherwise the first column whose pivot fell below ``pivtol``.
    """
    n = ab.shape[1]
    kv = kl + ku
    lu = np.zeros((2 * kl + ku + 1, n), dtype=np.complex128)
    lu[kl:, :] = ab
    ipiv = np.empty(n, dtype=np.int64)
    info = -1
    ju = 0
    for j in range(n):
        km = min(kl, n - 1 - j)
        p = 0
        best = abs(lu[kv, j])
        for i in range(1, km + 1):
            a = abs(lu[kv + i, j])
            if a > best:
                best = a
                p = i
        ipiv[j] = j + p
        if best <= pivtol:
            if info < 0:
                info = j
            continue
        ju = max(ju, min(j + ku + p, n - 1))
        if p != 0:
            for c in range(j, ju + 1):
                t = lu[kv + j - c, c]
                lu[kv + j - c, c] = lu[kv + j + p - c, c]
                lu[kv + j + p - c, c] = t
        piv = lu[kv, j]
        for i in range(1, km + 1):
            lu[kv + i, j] /= piv
        for c in range(j + 1, ju + 1):
            t = lu[kv + j - c, c]
            if t != 0:
                for i in range(1, km + 1):
                    lu[kv + j + i - c, c] -= lu[kv + i, j] * t
    return lu, ipiv, info


@njit(cache=True, nogil=True)
def gbtrs(lu, ipiv, kl, ku, b):
    """Solve A x = b with the factors from :func:`gbtrf` (b is copied)."""
    n = lu.shape[1]
    kv = kl + ku
    x = b.copy()
    for j in range(n - 1):
        km = min(kl, n - 1 - j)
        p = ipiv[j]
        if p != j:
            t = x[j]
            x[j] = x[p]
            x[p] = t
        xj = x[j]
        if xj != 0:
            for i in range(1, km + 1):
                x[j + i] -= lu[kv + i, j] * xj
    for i in range(n - 1, -1, -1):
        s = x[i]
        for c in range(i + 1, min(i + kv, n - 1) + 1):
            s -= lu[kv + i - c, c] * x[c]
        x[i] = s / lu[kv, i]
    return x


@njit(cache=True, nogil=True)
def gbtrs_adjoint(lu, ipiv, kl, ku, b):
    """Solve A^H x = b with the factors of A."""
    n = lu.shape[1]
    kv = kl + ku
    x = b.copy()
    for i in range(n):
        s = x[i]
        for c in range(max(0, i - kv), i):
            s -= np.conj(lu[kv + c - i, i]) * x[c]
        x[i] = s / np.conj(lu[kv, i])
    for j in range(n - 2, -1, -1):
        km = min(kl, n - 1 - j)
        s = x[j]
        for i in range(1, km + 1):
            s -= np.conj(lu[kv + i, j]) * x[j + i]
        x[j] = s
        p = ipiv[j]
        if p != j:
            t = x[j]
            x[j] = x[p]
            x[p] = t
    return x


@njit(cache=True, nogil=True)
def gbmv(ab, kl, ku, x):
    n = ab.shape[1]
    y = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        xj = x[j]
        for i in range(max(0, j - ku), min(n - 1, j + kl) + 1):
            y[i] += ab[ku + i - j, j] * xj
    return y


# --------------------------------------------------------------------------
# dense Hessenberg reduction and single-shift complex QR
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def hessenberg(a, wantq):
    """Householder reduction to upper Hessenberg form, in place.

    Returns Q (identity-sized, or 0x0 when ``wantq`` is False) with
    a_original = Q @ H @ Q^H.
    """
    n = a.shape[0]
    if wantq:
        q = np.eye(n, dtype=np.complex128)
    else:
        q = np.zeros((0, 0), dtype=np.complex128)
    v = np.empty(n, dtype=np.complex128)
    w = np.empty(n, dtype=np.complex128)
    for k in range(n - 2):
        m = n - k - 1
        xnorm2 = 0.0
        for i in range(1, m):
            z = a[k + 1 + i, k]
            xnorm2 += z.real * z.real + z.imag * z.imag
        if xnorm2 == 0.0:
            continue
        x0 = a[k + 1, k]
        xnorm = np.sqrt(xnorm2 + x0.real * x0.real + x0.imag * x0.imag)
        ax0 = abs(x0)
        phase = x0 / ax0 if ax0 > 0 else 1.0 + 0j
        alpha = -phase * xnorm
        v[0] = x0 - alpha
        for i in range(1, m):
            v[i] = a[k + 1 + i, k]
        vn2 = 0.0
        for i in range(m):
            vn2 += v[i].real * v[i].real + v[i].imag * v[i].imag
        if vn2 == 0.0:
            # column already negligible (squares underflowed)
            continue
        beta = 2.0 / vn2
        # left: rows k+1.., columns k..
        for j in range(k, n):
            s = 0j
            for i in range(m):
                s += np.conj(v[i]) * a[k + 1 + i, j]
            s *= beta
            for i in range(m):
                a[k + 1 + i, j] -= v[i] * s
        # right: all rows, columns k+1..
        for i in range(n):
            s = 0j
            for jj in range(m):
                s += a[i, k + 1 + jj] * v[jj]
            w[i] = s * beta
        for i in range(n):
            wi = w[i]
            for jj in range(m):
                a[i, k + 1 + jj] -= wi * np.conj(v[jj])
        for i in range(2, m + 1):
            a[k + i, k] = 0j
        a[k + 1, k] = alpha
        if wantq:
            for i in range(n):
                s = 0j
                for jj in range(m):
                    s += q[i, k + 1 + jj] * v[jj]
                s *= beta
                for jj in range(m):
                    q[i, k + 1 + jj] -= s * np.conj(v[jj])
    return q


@njit(cache=True, nogil=True)
def wilkinson_shift(h, ihi):
    a = h[ihi - 1, ihi - 1]
    b = h[ihi - 1, ihi]
    c = h[ihi, ihi - 1]
    d = h[ihi, ihi]
    tr2 = 0.5 * (a + d)
    disc = np.sqrt((0.5 * (a - d)) ** 2 + b * c)
    l1 = tr2 + disc
    l2 = tr2 - disc
    if abs(l1 - d) <= abs(l2 - d):
        return l1
    return l2


@njit(cache=True, nogil=True, fastmath=True)
def qr_sweep(h, ilo, ihi, shift, full, z):
    """One implicit single-shift QR sweep on the active block ilo..ihi.

    With ``full`` the rotations are applied to the whole matrix (Schur
    form) and accumulated into ``z``; otherwise only the active block is
    touched.
    """
    n = h.shape[0]
    jmax = n - 1 if full else ihi
    imin = 0 if full else ilo
    x = h[ilo, ilo] - shift
    y = h[ilo + 1, ilo]
    for k in range(ilo, ihi):
        if k > ilo:
            x = h[k, k - 1]
            y = h[k + 1, k - 1]
        c, s, r = givens(x, y)
        if k > ilo:
            h[k, k - 1] = r
            h[k + 1, k - 1] = 0j
        sc = np.conj(s)
        for j in range(k, jmax + 1):
            a = h[k, j]
            b = h[k + 1, j]
            h[k, j] = c * a + s * b
            h[k + 1, j] = c * b - sc * a
        for i in range(imin, min(k + 2, ihi) + 1):
            a = h[i, k]
            b = h[i, k + 1]
            h[i, k] = c * a + sc * b
            h[i, k + 1] = c * b - s * a
        if full:
            for i in range(z.shape[0]):
                a = z[i, k]
                b = z[i, k + 1]
                z[i, k] = c * a + np.conj(s) * b
                z[i, k + 1] = -s * a + c * b


@njit(cache=True, nogil=True)
def hqr(h, full, z, maxit):
    """Eigenvalues of an upper Hessenberg matrix by shifted QR.

    Returns (w, info, iterations): info is -1 on success, otherwise the
    index of the eigenvalue that failed to converge within ``maxit``
    iterations (entries w[info+1:] are valid).
    """
    n = h.shape[0]
    w = np.zeros(n, dtype=np.complex128)
    ihi = n - 1
    its = 0
    total = 0
    while ihi >= 0:
        l = ihi
        while l > 0:
            tst = _cabs1(h[l - 1, l - 1]) + _cabs1(h[l, l])
            if tst == 0.0:
                tst = 1.0
            if _cabs1(h[l, l - 1]) <= _EPS * tst:
                h[l, l - 1] = 0j
                break
            l -= 1
        if l == ihi:
            w[ihi] = h[ihi, ihi]
            ihi -= 1
            its = 0
            continue
        if its >= maxit:
            return w, ihi, total
        # exceptional shifts break cycles of the Wilkinson shift
        if its > 0 and its % 20 == 10:
            shift = h[l, l] + 0.75 * abs(h[l + 1, l].real)
        elif its > 0 and its % 20 == 0:
            shift = h[ihi, ihi] + 0.75 * abs(h[ihi, ihi - 1].real)
        else:
            shift = wilkinson_shift(h, ihi)
        qr_sweep(h, l, ihi, shift, full, z)
        its += 1
        total += 1
    return w, -1, total


@njit(cache=True, nogil=True)
def swap_schur(t, q, k):
    """Swap diagonal entries k and k+1 of an upper triangular Schur form."""
    n = t.shape[0]
    t11 = t[k, k]
    t22 = t[k + 1, k + 1]
    c, s, r = givens(t[k, k + 1], t22 - t11)
    for j in range(k + 2, n):
        a = t[k, j]
        b = t[k + 1, j]
        t[k, j] = c * a + s * b
        t[k + 1, j] = c * b - np.conj(s) * a
    sc = np.conj(s)
    for i in range(k):
        a = t[i, k]
        b = t[i, k + 1]
        t[i, k] = c * a + sc * b
        t[i, k + 1] = c * b - s * a
    t[k, k] = t22
    t[k + 1, k + 1] = t11
    for i in range(q.shape[0]):
        a = q[i, k]
        b = q[i, k + 1]
        q[i, k] = c * a + sc * b
        q[i, k + 1] = c * b - s * a
