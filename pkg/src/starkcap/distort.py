"""Complex distortion outside a cone.

The distortion moves points by ``x -> x + theta v(x)`` with
``v = grad F`` and ``F = -(1 + K^-2)^(1/2) * (dist(., C~) * phi)``, where
``C~`` is a smoothed version of the cone ``|x'| <= K (x_1 + rho)`` and
``phi`` is a normalized bump of radius ``mollifier_radius``.

In 1D the cone is the half line ``x >= -rho`` and every derivative of
``v`` reduces to a point evaluation of the bump.  In 2D the set ``C~`` is
the cone with its apex replaced by a circular fillet and the convolution
is done by tensor Gauss-Legendre quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad


@dataclass(frozen=True)
class ConeParams:
    K: float
    rho: float
    mollifier_radius: float = 1.0

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError(f"cone aperture K must be > 0, got {self.K}")
        if not 0 < self.mollifier_radius <= 1:
            raise ValueError(f"mollifier_radius must be in (0, 1], got {self.mollifier_radius}")

    @property
    def scale(self):
        """The prefactor (1 + K^-2)^(1/2)."""
        return float(np.sqrt(1.0 + self.K**-2))


def cone_contains(x, params):
    """True iff ``|x'| <= K (x_1 + rho)``; in 1D this is ``x >= -rho``."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if x.size == 1:
        return bool(x[0] >= -params.rho)
    xp = np.linalg.norm(x[1:])
    return bool(xp <= params.K * (x[0] + params.rho))


# --------------------------------------------------------------------------
# the bump
# --------------------------------------------------------------------------

def _raw_bump(s2):
    out = np.zeros_like(s2)
    inside = s2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s2[inside]))
    return out


@lru_cache(maxsize=None)
def bump_mass(dim):
    """Integral of exp(-1/(1 - |y|^2)) over the unit ball in ``dim`` dimensions."""
    f = lambda s: np.exp(-1.0 / (1.0 - s * s)) if abs(s) < 1 else 0.0
    if dim == 1:
        return quad(f, -1, 1, epsabs=1e-14, epsrel=1e-13)[0]
    if dim == 2:
        return 2 * np.pi * quad(lambda s: s * f(s), 0, 1, epsabs=1e-14, epsrel=1e-13)[0]
    raise ValueError("only dimensions 1 and 2 are supported")


def mollifier(y, radius, dim=1):
    """Normalized bump ``phi``; ``y`` is (N,) in 1D or (N, 2) in 2D."""
    y = np.asarray(y, dtype=float)
    s2 = (y / radius) ** 2 if dim == 1 else np.sum((y / radius) ** 2, axis=-1)
    return _raw_bump(s2) / (bump_mass(dim) * radius**dim)


def _bump_derivs_1d(t, radius):
    """phi, phi', phi'' in 1D."""
    t = np.asarray(t, dtype=float)
    u = t / radius
    p0 = np.zeros_like(u)
    p1 = np.zeros_like(u)
    p2 = np.zeros_like(u)
    m = np.abs(u) < 1
    um = u[m]
    q = 1.0 - um * um
    e = np.exp(-1.0 / q) / (bump_mass(1) * radius)
    a = -2.0 * um / q**2  # d/du of -1/q
    da = (-2.0 * q - 8.0 * um * um) / q**3
    p0[m] = e
    p1[m] = e * a / radius
    p2[m] = e * (a * a + da) / radius**2
    return p0, p1, p2


def _bump_cdf_1d(t, radius):
    """Integral of phi from -inf to t."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= radius, 1.0, 0.0)
    m = np.abs(t) < radius
    if np.any(m):
        norm = bump_mass(1)
        f = lambda s: np.exp(-1.0 / (1.0 - s * s))
        vals = []
        for tt in t[m] / radius:
            # integrate over the shorter side for accuracy near the tails
            if tt <= 0:
                vals.append(quad(f, -1.0, tt, epsabs=1e-13, epsrel=1e-12)[0] / norm)
            else:
                vals.append(1.0 - quad(f, tt, 1.0, epsabs=1e-13, epsrel=1e-12)[0] / norm)
        out[m] = vals
    return out


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

class DistortionField:
    """The vector field ``v = grad F`` together with its derivatives."""

    dimension = 0

    def __init__(self, params):
        self.params = params


class DistortionField1D(DistortionField):
    """1D field: ``v(x) = c * (1 - Phi(x + rho))`` with ``Phi`` the bump CDF.

    ``dv``, ``d2v`` and ``d3v`` are ``-c`` times the bump and its first two
    derivatives at ``x + rho``.
    """

    dimension = 1

    def _t(self, x):
        return np.asarray(x, dtype=float) + self.params.rho

    def F(self, x):
        p = self.params
        t = self._t(x)
        r = p.mollifier_radius
        out = np.where(t <= -r, p.scale * t, 0.0)
        m = np.abs(t) < r
        if np.any(m):
            vals = []
            for tt in np.atleast_1d(t[m]):
                # (dist * phi)(x) = int phi(s) max(s - t, 0) ds
                g = lambda s: float(mollifier(np.array([s]), r)[0]) * (s - tt)
                vals.append(quad(g, tt, r, epsabs=1e-13, epsrel=1e-12)[0])
            out[m] = -p.scale * np.asarray(vals)
        return out

    def v(self, x):
        return self.params.scale * (1.0 - _bump_cdf_1d(self._t(x), self.params.mollifier_radius))

    def dv(self, x):
        return -self.params.scale * _bump_derivs_1d(self._t(x), self.params.mollifier_radius)[0]

    def d2v(self, x):
        return -self.params.scale * _bump_derivs_1d(self._t(x), self.params.mollifier_radius)[1]

    def d3v(self, x):
        return -self.params.scale * _bump_derivs_1d(self._t(x), self.params.mollifier_radius)[2]


def build_field_1d(params):
    return DistortionField1D(params)


class ZeroField(DistortionField1D):
    """A field that vanishes identically (no distortion anywhere)."""

    def F(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    v = dv = d2v = d3v = F


# --------------------------------------------------------------------------
# 2D
# --------------------------------------------------------------------------

class CappedCone:
    """Convex set: the cone ``|x_2| <= K (x_1 + rho)`` for ``x_1 >= 1 - rho``,
    closed off for ``x_1 < 1 - rho`` by a circular arc tangent to both rays.
    """

    def __init__(self, K, rho):
        self.K, self.rho = float(K), float(rho)
        s = np.sqrt(1.0 + K * K)
        self.t1 = 1.0 - rho
        self.tangent = np.array([self.t1, K])
        self.direction = np.array([1.0, K]) / s
        self.outward = np.array([-K, 1.0]) / s
        self.radius = K * s
        self.center = np.array([self.t1 + K * K, 0.0])

    def project(self, p):
        """Distance to the set and the outward unit normal ``grad dist``.

        ``p`` has shape (..., 2); the normal is zero inside the set.
        """
        p = np.asarray(p, dtype=float)
        sign = np.where(p[..., 1] < 0, -1.0, 1.0)
        q1 = p[..., 0]
        q2 = np.abs(p[..., 1])
        d1 = q1 - self.tangent[0]
        d2 = q2 - self.tangent[1]
        along = d1 * self.direction[0] + d2 * self.direction[1]
        off = d1 * self.outward[0] + d2 * self.outward[1]
        c1 = q1 - self.center[0]
        rc = np.hypot(c1, q2)
        ray = along >= 0
        dist = np.where(ray, np.maximum(off, 0.0), np.maximum(rc - self.radius, 0.0))
        outside = dist > 0
        safe = np.where(rc > 0, rc, 1.0)
        n1 = np.where(ray, self.outward[0], c1 / safe)
        n2 = np.where(ray, self.outward[1], q2 / safe)
        n1 = np.where(outside, n1, 0.0)
        n2 = np.where(outside, n2, 0.0) * sign
        return dist, np.stack([n1, n2], axis=-1)

    def contains(self, p):
        return self.project(p)[0] <= 0


class DistortionField2D(DistortionField):
    """2D field from tensor Gauss-Legendre quadrature of the mollified distance.

    ``v`` integrates the bump against ``grad dist``, which is the exact
    gradient of the quadrature sum for ``F``.  ``dv`` integrates the bump
    gradient against ``grad dist``.  Both sums jump slightly as nodes cross
    the boundary of the set, so ``dv`` is not a difference quotient of
    ``v``; it converges to the derivative as nodes are added.  Quadrature
    nodes are symmetric under ``y_2 -> -y_2``, so the field inherits the
    mirror symmetry of the set exactly.
    """

    dimension = 2

    def __init__(self, params, nodes_per_axis=32, batch=2048):
        super().__init__(params)
        if nodes_per_axis < 32:
            raise ValueError("need at least 32 quadrature nodes per axis")
        r = params.mollifier_radius
        g, w = np.polynomial.legendre.leggauss(nodes_per_axis)
        y1, y2 = np.meshgrid(g * r, g * r, indexing="ij")
        W = np.outer(w, w).ravel() * r * r
        Y = np.stack([y1.ravel(), y2.ravel()], axis=-1)
        phi = mollifier(Y, r, dim=2)
        keep = phi > 0
        self.nodes = Y[keep]
        self.weights = W[keep]
        self.phi = phi[keep]
        s2 = np.sum((self.nodes / r) ** 2, axis=-1)
        # grad phi = phi * (-2 y / r^2) / (1 - |y/r|^2)^2
        self.grad_phi = self.phi[:, None] * (-2.0 * self.nodes / r**2) / (1.0 - s2)[:, None] ** 2
        self.set = CappedCone(params.K, params.rho)
        self.batch = batch

    def _apply(self, x, fn):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = []
        for start in range(0, len(x), self.batch):
            xb = x[start:start + self.batch]
            dist, normal = self.set.project(xb[:, None, :] - self.nodes[None, :, :])
            out.append(fn(dist, normal))
        return np.concatenate(out, axis=0)

    def F(self, x):
        c = self.params.scale
        wp = self.weights * self.phi
        return self._apply(x, lambda d, n: -c * d @ wp)

    def v(self, x):
        c = self.params.scale
        wp = self.weights * self.phi
        return self._apply(x, lambda d, n: -c * np.einsum("bqi,q->bi", n, wp))

    def dv(self, x):
        """Jacobian ``dv[b, i, j] = d v_i / d x_j``."""
        c = self.params.scale
        wg = self.weights[:, None] * self.grad_phi
        return self._apply(x, lambda d, n: -c * np.einsum("bqi,qj->bij", n, wg))


def build_field_2d(params, nodes_per_axis=32):
    return DistortionField2D(params, nodes_per_axis=nodes_per_axis)
