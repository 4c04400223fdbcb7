"""CAP eigenvalue sweeps, trajectory linking, and resonance extraction.

Eigenvalues of ``P - i eps x^2`` are computed inside a window for a
geometric schedule of ``eps``, linked into trajectories, and each
trajectory is reduced to a resonance estimate at its point of minimal
logarithmic speed ``|eps d lambda / d eps|``.  The estimates can be
checked against eigenvalues of the complex-distorted operator, which are
the resonances themselves.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import eig
from .grid import Zero, assemble_cap_distorted, assemble_cap_hamiltonian, assemble_distorted_hamiltonian

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpsilonSchedule:
    eps0: float = 0.5
    ratio: float = 0.6
    count: int = 20

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError(f"eps0 must be > 0, got {self.eps0}")
        if not 0 < self.ratio < 1:
            raise ValueError(f"ratio must be in (0, 1), got {self.ratio}")
        if int(self.count) != self.count or self.count < 3:
            raise ValueError(f"count must be an integer >= 3, got {self.count}")

    @property
    def values(self):
        return self.eps0 * self.ratio ** np.arange(self.count)


@dataclass(frozen=True)
class Window:
    """Rectangle ``re_min <= Re z <= re_max``, ``im_min < Im z <= im_max``."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not self.re_min < self.re_max:
            raise ValueError("window needs re_min < re_max")
        if not self.im_min < self.im_max:
            raise ValueError("window needs im_min < im_max")

    def contains(self, z):
        z = complex(z)
        return self.re_min <= z.real <= self.re_max and self.im_min < z.imag <= self.im_max

    @property
    def centroid(self):
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def diagonal(self):
        return float(np.hypot(self.re_max - self.re_min, self.im_max - self.im_min))

    @property
    def corners(self):
        return [complex(r, i) for r in (self.re_min, self.re_max) for i in (self.im_min, self.im_max)]


@dataclass(frozen=True)
class SolverConfig:
    """How windowed spectra are computed.

    ``method`` is ``"dense"``, ``"arnoldi"`` or ``"auto"`` (dense up to
    ``dense_cap`` unknowns).  For Arnoldi, ``k`` is the initial number of
    requested eigenvalues; it doubles until the disc around the window
    centroid that contains all returned values also covers the window,
    giving up past ``k_max``.
    """

    method: str = "auto"
    k: int = 8
    tol: float = 1e-8
    max_restarts: int = 300
    dense_cap: int = 1500
    workers: int = 1
    k_max: int = 128

    def __post_init__(self):
        if self.method not in ("auto", "dense", "arnoldi"):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True)
class Trajectory:
    """One eigenvalue branch followed across decreasing ``eps``."""

    id: int
    points: tuple  # ((eps, lambda), ...) in order of decreasing eps
    status: str = "divergent"

    @property
    def eps(self):
        return np.array([p[0] for p in self.points])

    @property
    def values(self):
        return np.array([p[1] for p in self.points], dtype=complex)

    @property
    def speed(self):
        """``|eps d lambda/d eps|`` by centered differences in ``log eps``."""
        if len(self.points) < 3:
            return np.zeros(0)
        e = np.log(self.eps)
        lam = self.values
        return np.abs(lam[2:] - lam[:-2]) / np.abs(e[2:] - e[:-2])


@dataclass(frozen=True)
class ResonanceEstimate:
    z: complex
    eps_star: float
    uncertainty: float
    trajectory_id: int
    boundary: bool = False


# --------------------------------------------------------------------------
# windowed spectra
# --------------------------------------------------------------------------

def windowed_spectrum(A, window, solver=SolverConfig()):
    """All eigenvalues of ``A`` inside ``window``."""
    method = solver.method
    if method == "auto":
        method = "dense" if A.n <= solver.dense_cap else "arnoldi"
    if method == "dense":
        return eig.dense_eigenvalues(A, dense_cap=max(solver.dense_cap, eig.DENSE_CAP)).windowed(window)

    sigma = window.centroid
    radius = max(abs(c - sigma) for c in window.corners)
    k = min(solver.k, A.n)
    while True:
        res = eig.shift_invert_arnoldi(A, sigma, k, tol=solver.tol, max_restarts=solver.max_restarts)
        vals = res.array()
        if len(vals) and np.max(np.abs(vals - sigma)) > radius:
            if not res.converged:
                log.warning("Arnoldi converged %d of %d values near %s", len(vals), k, sigma)
            break
        if k >= A.n:
            break
        if k >= solver.k_max:
            raise eig.ConvergenceError(
                f"could not cover the window with k <= {solver.k_max} eigenvalues near {sigma}", res)
        k = min(2 * k, A.n, solver.k_max)
    return res.windowed(window)


# --------------------------------------------------------------------------
# linking
# --------------------------------------------------------------------------

def _canonical(values):
    values = np.asarray(values, dtype=complex)
    return values[np.lexsort((values.imag, values.real))]


def link_trajectories(eps_values, spectra, window):
    """Link per-``eps`` eigenvalue lists into trajectories.

    Active trajectories predict their next value by linear extrapolation
    from their last two points (the first step predicts no motion).
    Predictions and new eigenvalues are paired greedily by distance, up
    to a jump of half the window diagonal.  Unmatched eigenvalues start new
    trajectories.  A trajectory of two or more points whose extrapolated
    prediction is still inside the window but finds no partner is marked
    ``lost``; one predicted to leave the window, or a single point with no
    partner, simply ends.

    ``spectra[j]`` is a sequence of failures-as-None or eigenvalue lists.
    """
    max_jump = 0.5 * window.diagonal
    tracks = []  # dicts: points, active, lost
    for eps, vals in zip(eps_values, spectra):
        active = [t for t in tracks if t["active"]]
        if vals is None:
            for t in active:
                t["active"] = False
                t["lost"] = True
            continue
        vals = _canonical(vals)
        preds = []
        for t in active:
            pts = t["points"]
            if len(pts) >= 2:
                preds.append(2 * pts[-1][1] - pts[-2][1])
            else:
                preds.append(pts[-1][1])
        pairs = []
        for ti, p in enumerate(preds):
            for vi, v in enumerate(vals):
                d = abs(v - p)
                if d <= max_jump:
                    pairs.append((d, ti, vi))
        pairs.sort()
        used_t, used_v = set(), set()
        for d, ti, vi in pairs:
            if ti in used_t or vi in used_v:
                continue
            used_t.add(ti)
            used_v.add(vi)
            active[ti]["points"].append((float(eps), complex(vals[vi])))
        for ti, t in enumerate(active):
            if ti not in used_t:
                t["active"] = False
                # one point gives no direction, so no claim it should still be here
                if len(t["points"]) >= 2 and window.contains(preds[ti]):
                    t["lost"] = True
        for vi, v in enumerate(vals):
            if vi not in used_v:
                tracks.append({"points": [(float(eps), complex(v))], "active": True, "lost": False})
    return [
        Trajectory(id=i, points=tuple(t["points"]), status="lost" if t["lost"] else "divergent")
        for i, t in enumerate(tracks)
    ]


# --------------------------------------------------------------------------
# sweep and stabilization
# --------------------------------------------------------------------------

def sweep(grid, V, schedule, window, solver=SolverConfig(), fd_order=2, include_stark=True):
    """CAP eigenvalues inside ``window`` along ``schedule``, linked into trajectories.

    A failed solve at one ``eps`` is logged, the trajectories active at
    that step are marked lost, and the sweep carries on.
    """
    eps_values = schedule.values

    def solve(eps):
        A = assemble_cap_hamiltonian(grid, V, float(eps), fd_order=fd_order, include_stark=include_stark)
        try:
            return windowed_spectrum(A, window, solver).array()
        except eig.SolverError as exc:
            log.warning("solve failed at eps=%g: %s", eps, exc)
            return None

    if solver.workers > 1:
        with ThreadPoolExecutor(solver.workers) as pool:
            spectra = list(pool.map(solve, eps_values))
    else:
        spectra = [solve(e) for e in eps_values]
    return link_trajectories(eps_values, spectra, window)


def stabilize(trajectory, speed_threshold=1e-2, allow_boundary=False):
    """Resonance estimate at the point of minimal logarithmic speed.

    The minimum must sit at an interior entry of the speed list; with
    ``allow_boundary`` a minimum at the small-``eps`` end is accepted too
    and flagged.  Returns None when there is no acceptable minimum below
    ``speed_threshold``.
    """
    if len(trajectory.points) < 3:
        return None
    s = trajectory.speed
    smin = s.min()
    if not smin < speed_threshold:
        return None
    candidates = np.flatnonzero(s == smin)
    last = len(s) - 1
    interior = [int(i) for i in candidates if 0 < i < last]
    boundary = False
    if interior:
        j = interior[0]
    elif allow_boundary and last in candidates and last > 0:
        j = last
        boundary = True
    else:
        return None
    eps_star, z = trajectory.points[j + 1]
    return ResonanceEstimate(complex(z), float(eps_star), float(smin), trajectory.id, boundary)


def estimate_resonances(trajectories, speed_threshold=1e-2, allow_boundary=False):
    """Stabilize every trajectory; returns (estimates, trajectories with status)."""
    estimates, out = [], []
    for t in trajectories:
        est = stabilize(t, speed_threshold, allow_boundary)
        if est is not None:
            estimates.append(est)
            t = Trajectory(t.id, t.points, "stabilized")
        out.append(t)
    return estimates, out


@dataclass(frozen=True)
class Cluster:
    z: complex
    count: int
    members: tuple


def cluster_estimates(estimates, tol):
    """Group estimates closer than ``tol`` (single linkage); counts approximate multiplicity."""
    groups = []
    for e in sorted(estimates, key=lambda e: (e.z.real, e.z.imag)):
        for g in groups:
            if any(abs(e.z - o.z) <= tol for o in g):
                g.append(e)
                break
        else:
            groups.append([e])
    return [Cluster(complex(np.mean([e.z for e in g])), len(g), tuple(g)) for g in groups]


# --------------------------------------------------------------------------
# distorted-operator reference and comparison
# --------------------------------------------------------------------------

def resonances_via_distortion(grid, V, theta, field, window, solver=SolverConfig()):
    """Eigenvalues of the distorted operator inside ``window``.

    Requires ``Im theta < 0`` and ``window.im_min > -|Im theta|``.
    """
    theta = complex(theta)
    if not theta.imag < 0:
        raise ValueError(f"need Im theta < 0, got {theta}")
    if not window.im_min >= -abs(theta.imag):
        raise ValueError(f"window reaches Im z = {window.im_min} below -|Im theta| = {-abs(theta.imag)}")
    A = assemble_distorted_hamiltonian(grid, V, theta, field)
    return windowed_spectrum(A, window, solver)


@dataclass(frozen=True)
class ComparisonReport:
    pairs: tuple  # ((estimate_z, reference_z, distance), ...)
    unmatched_estimates: tuple
    unmatched_references: tuple
    match_tol: float

    @property
    def passed(self):
        """Every reference eigenvalue has an estimate within ``match_tol``."""
        return not self.unmatched_references

    @property
    def bijective(self):
        return not self.unmatched_references and not self.unmatched_estimates

    @property
    def max_distance(self):
        return max((p[2] for p in self.pairs), default=0.0)


def compare_with_distortion(estimates, reference, match_tol):
    """Greedy nearest-pair matching of CAP estimates against reference eigenvalues."""
    est = [complex(e.z) if isinstance(e, ResonanceEstimate) else complex(e) for e in estimates]
    ref = [complex(z) for z in (reference.eigenvalues if hasattr(reference, "eigenvalues") else reference)]
    cand = sorted(
        (abs(a - b), i, j) for i, a in enumerate(est) for j, b in enumerate(ref) if abs(a - b) <= match_tol
    )
    ui, uj, pairs = set(), set(), []
    for d, i, j in cand:
        if i in ui or j in uj:
            continue
        ui.add(i)
        uj.add(j)
        pairs.append((est[i], ref[j], float(d)))
    return ComparisonReport(
        pairs=tuple(pairs),
        unmatched_estimates=tuple(z for i, z in enumerate(est) if i not in ui),
        unmatched_references=tuple(z for j, z in enumerate(ref) if j not in uj),
        match_tol=float(match_tol),
    )


# --------------------------------------------------------------------------
# resolvent probe
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeTable:
    eps: tuple
    z: tuple
    sigma_min: np.ndarray = field(compare=False)  # shape (len(eps), len(z))
    singular: np.ndarray = field(compare=False)

    @property
    def minimum(self):
        return float(self.sigma_min.min())

    def row_minimum(self, i):
        return float(self.sigma_min[i].min())


def resolvent_probe(theta, field, eps_list, z_grid, grid):
    """``sigma_min(Q - z)`` for the free distorted CAP operator ``Q`` on a table."""
    eps_list = [float(e) for e in eps_list]
    z_grid = [complex(z) for z in z_grid]
    table = np.zeros((len(eps_list), len(z_grid)))
    singular = np.zeros_like(table, dtype=bool)
    for i, e in enumerate(eps_list):
        Q = assemble_cap_distorted(grid, Zero(), theta, field, e)
        for j, z in enumerate(z_grid):
            s = eig.smallest_singular_value(Q, z)
            table[i, j] = s.value
            singular[i, j] = s.singular
    return ProbeTable(tuple(eps_list), tuple(z_grid), table, singular)
