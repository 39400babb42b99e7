"""Measurement plans for an observable.

Two strategies are supported:

* :func:`plan_povm` -- LCD settings for each eigenvector, with the detector
  parked at ``(0, z)``;
* :func:`plan_spatial` -- one detection plane ``z`` and a transverse
  position per eigenvector for a moving point detector (double slit only),
  plus the envelope compensation the asymmetric positions need.

The spatial search works in the reduced coordinates ``u = kappa x`` and
``s = kappa d eta / 2``. There the postselected qubit is proportional to
``(sinc(u - s), exp(i p u) sinc(u + s))`` with ``p = d/a``; the geometry only
enters through ``p`` and the largest admissible ``s`` (the plane closest to
the image plane we allow). The search runs in three steps:

1. a cached atlas of Bloch vectors on a grid of rows in ``s`` gives, per
   row, the best match to the first eigenvector and to its antipode;
2. the best rows seed a batched Levenberg-Marquardt fit of ``(u1, u2, s)``
   to both eigenvectors, with a penalty that keeps the pair orthogonal;
3. the winner is made exactly orthogonal (Newton on the complex overlap)
   and a golden-section search in ``s`` along the orthogonal curve
   maximizes the fidelity.

Slit-state, equal-modulus and y-z circle eigenbases have closed-form (or
one-dimensional) solutions and skip the search.
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import optics, povm, qstate
from .errors import DarkPoint, DimensionMismatch, SearchFailed, ValidationError, WrongDimension
from .optics import OpticalGeometry, PostselectedState
from .qstate import DensityMatrix, Observable

FIDELITY_THRESHOLD = 1 - 1e-6
SLIT_STATE_TOL = 1e-12
CIRCLE_TOL = 1e-12
# closest approach to the image plane, as a fraction of f
IMAGE_PLANE_GAP = 1e-4

# atlas: rows uniform in s, u sampled every ATLAS_STEP over
# [-(s + ATLAS_MARGIN), s + ATLAS_MARGIN]
ATLAS_ROWS = 512
ATLAS_STEP = 0.05
ATLAS_MARGIN = 20.0
LM_CANDIDATES = 96
LM_ITERATIONS = 30
# stop early once one start is essentially exact (infidelity ~1e-13)
LM_DONE = 4e-13
LM_ORTHOGONALITY_WEIGHT = 3.0
POLISH_ITERATIONS = 200
POLISH_TOL = 1e-12
POLISH_STARTS = 4
POLISH_WIDTH = 1e-3
ORTHOGONAL_RESIDUAL = 1e-14
MAX_NEWTON_STEP = 0.05
POLISH_GOOD_ENOUGH = 1e-7


@dataclass(frozen=True, eq=False)
class PovmPlan:
    observable: Observable
    eigenvalues: np.ndarray
    settings: tuple
    detection_point: tuple
    degenerate: bool = False

    strategy = "povm"

    @property
    def dim(self) -> int:
        return len(self.settings)

    def __eq__(self, other):
        if not isinstance(other, PovmPlan):
            return NotImplemented
        return (
            self.observable == other.observable
            and np.array_equal(self.eigenvalues, other.eigenvalues)
            and tuple(self.settings) == tuple(other.settings)
            and tuple(self.detection_point) == tuple(other.detection_point)
        )


@dataclass(frozen=True, eq=False)
class SpatialPlan:
    """Moving-detector plan; ``z is None`` marks the image-plane limit."""

    observable: Observable
    eigenvalues: np.ndarray
    z: float | None
    positions: np.ndarray
    compensation: np.ndarray
    fidelities: np.ndarray
    degenerate: bool = False

    strategy = "spatial"

    @property
    def image_plane(self) -> bool:
        return self.z is None

    @property
    def dim(self) -> int:
        return len(self.positions)

    def states(self, geom: OpticalGeometry) -> list[PostselectedState]:
        if self.image_plane:
            # positions are slit images; recover which slit each one shows
            out = []
            for x in self.positions:
                ell = int(round(x / geom.d + geom.delta))
                out.append(optics.image_plane_projector(geom, ell))
            return out
        return [optics.postselected_state(geom, x, self.z) for x in self.positions]

    def __eq__(self, other):
        if not isinstance(other, SpatialPlan):
            return NotImplemented
        return (
            self.observable == other.observable
            and np.array_equal(self.eigenvalues, other.eigenvalues)
            and self.z == other.z
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.compensation, other.compensation)
            and np.array_equal(self.fidelities, other.fidelities)
        )


def _as_observable(obs) -> Observable:
    return obs if isinstance(obs, Observable) else Observable(obs)


def plan_povm(obs, geom: OpticalGeometry | None = None, rescale: bool = False, z: float | None = None) -> PovmPlan:
    obs = _as_observable(obs)
    geom = geom or OpticalGeometry(D=obs.dim)
    if geom.D != obs.dim:
        raise DimensionMismatch(f"observable dimension {obs.dim} != slit count {geom.D}")
    z = geom.f if z is None else float(z)
    optics.plane_params(geom, z)
    eb = qstate.eigenbasis(obs)
    settings = tuple(povm.synthesize_settings(v, rescale=rescale) for v in eb.vectors)
    return PovmPlan(obs, eb.values.copy(), settings, (0.0, z), eb.degenerate)


def povm_plan_from_spatial(plan: SpatialPlan, geom: OpticalGeometry, rescale: bool = False) -> PovmPlan:
    """LCD settings reproducing a spatial plan's postselected states one for one."""
    states = plan.states(geom)
    settings = tuple(povm.synthesize_settings(s.normalized, rescale=rescale) for s in states)
    return PovmPlan(plan.observable, plan.eigenvalues.copy(), settings, (0.0, geom.f), plan.degenerate)


# ---------------------------------------------------------------------------
# reduced-coordinate helpers


def _s_of_z(geom: OpticalGeometry, z: float) -> float:
    pp = optics.plane_params(geom, z)
    return pp.kappa * geom.d * pp.eta / 2


def _z_of_s(geom: OpticalGeometry, s: float) -> float:
    c = math.pi * geom.a * geom.d / (geom.wavelength * geom.f)
    return geom.f * (2 * s + c) / (s + c)


def _s_max(geom: OpticalGeometry) -> float:
    return _s_of_z(geom, geom.f * (2 - IMAGE_PLANE_GAP))


def _bloch_reduced(u, s, p):
    c1 = np.sinc((u - s) / np.pi)
    c2 = np.sinc((u + s) / np.pi)
    n2 = c1 * c1 + c2 * c2
    cc = 2 * c1 * c2 / n2
    return np.stack([cc * np.cos(p * u), cc * np.sin(p * u), (c1 * c1 - c2 * c2) / n2], axis=-1)


def _bloch_of(v) -> np.ndarray:
    c = np.conj(v[0]) * v[1]
    return np.array([2 * c.real, 2 * c.imag, abs(v[0]) ** 2 - abs(v[1]) ** 2])


def _sinc(e: float) -> float:
    return 1.0 - e * e / 6.0 if abs(e) < 1e-4 else math.sin(e) / e


def _fidelity_reduced(v, u: float, s: float, p: float) -> float:
    c1, c2 = _sinc(u - s), _sinc(u + s)
    a2 = complex(math.cos(p * u), math.sin(p * u)) * c2
    ov = np.conj(v[0]) * c1 + np.conj(v[1]) * a2
    return float(abs(ov) ** 2 / (c1 * c1 + c2 * c2))


def _overlap_reduced(u1: float, u2: float, s: float, p: float) -> complex:
    """Normalized inner product of the reduced states at u1 and u2 (same s)."""
    a1, b1 = _sinc(u1 - s), _sinc(u1 + s)
    a2, b2 = _sinc(u2 - s), _sinc(u2 + s)
    ov = a1 * a2 + cmath.exp(1j * p * (u2 - u1)) * b1 * b2
    return ov / math.sqrt((a1 * a1 + b1 * b1) * (a2 * a2 + b2 * b2))


def _orthogonalize(u1: float, u2: float, s: float, p: float, iterations: int = 30):
    """Newton on Re/Im of the overlap in (u1, u2) at fixed s.

    Returns the corrected pair and the residual overlap modulus.
    """
    h = 1e-8
    f = _overlap_reduced(u1, u2, s, p)
    for _ in range(iterations):
        if abs(f) < ORTHOGONAL_RESIDUAL:
            break
        d1 = (_overlap_reduced(u1 + h, u2, s, p) - f) / h
        d2 = (_overlap_reduced(u1, u2 + h, s, p) - f) / h
        det = d1.real * d2.imag - d2.real * d1.imag
        if det == 0.0:
            break
        # Cramer's rule for the 2 x 2 real system J step = -f
        du1 = (-f.real * d2.imag + f.imag * d2.real) / det
        du2 = (-f.imag * d1.real + f.real * d1.imag) / det
        size = max(abs(du1), abs(du2))
        if size > MAX_NEWTON_STEP:
            du1, du2 = du1 * MAX_NEWTON_STEP / size, du2 * MAX_NEWTON_STEP / size
        f_new = _overlap_reduced(u1 + du1, u2 + du2, s, p)
        if abs(f_new) >= abs(f) and abs(f) < 1e3 * ORTHOGONAL_RESIDUAL:
            break  # at the round-off floor
        u1, u2, f = u1 + du1, u2 + du2, f_new
    return u1, u2, abs(f)


@dataclass(frozen=True, eq=False)
class _Atlas:
    s_rows: np.ndarray
    u: np.ndarray  # (rows, width); short rows repeat their last sample
    bloch: np.ndarray  # (3, rows, width)


@functools.lru_cache(maxsize=16)
def _atlas(p: float, s_max: float) -> _Atlas:
    s_rows = np.linspace(0.0, s_max, ATLAS_ROWS)
    width = int(math.ceil(2 * (s_max + ATLAS_MARGIN) / ATLAS_STEP)) + 1
    offs = np.arange(width) * ATLAS_STEP
    lo = -(s_rows + ATLAS_MARGIN)
    # edge padding keeps per-row extrema unchanged without masking
    u = np.minimum(lo[:, None] + offs[None, :], (s_rows + ATLAS_MARGIN)[:, None])
    bloch = np.ascontiguousarray(np.moveaxis(_bloch_reduced(u, s_rows[:, None], p), -1, 0), dtype=np.float32)
    return _Atlas(s_rows, u, bloch)


def _sinc_and_slope(e):
    small = np.abs(e) < 1e-4
    safe = np.where(small, 1.0, e)
    e2 = e * e
    val = np.where(small, 1.0 - e2 / 6.0, np.sin(safe) / safe)
    slope = np.where(small, -e / 3.0, (np.cos(safe) - val) / safe)
    return val, slope


def _bloch_with_grad(u, s, p):
    """Reduced Bloch vectors and their partial derivatives in u and s."""
    c1, d1 = _sinc_and_slope(u - s)
    c2, d2 = _sinc_and_slope(u + s)
    n2 = c1 * c1 + c2 * c2
    cc = 2 * c1 * c2 / n2
    zz = (c1 * c1 - c2 * c2) / n2
    cos, sin = np.cos(p * u), np.sin(p * u)

    def parts(dc1, dc2):
        dn = 2 * (c1 * dc1 + c2 * dc2) / n2
        dcc = 2 * (dc1 * c2 + c1 * dc2) / n2 - cc * dn
        dzz = 2 * (c1 * dc1 - c2 * dc2) / n2 - zz * dn
        return dcc, dzz

    dcc_u, dzz_u = parts(d1, d2)
    dcc_s, dzz_s = parts(-d1, d2)
    b = np.stack([cc * cos, cc * sin, zz], axis=-1)
    bu = np.stack([dcc_u * cos - p * cc * sin, dcc_u * sin + p * cc * cos, dzz_u], axis=-1)
    bs = np.stack([dcc_s * cos, dcc_s * sin, dzz_s], axis=-1)
    return b, bu, bs


def _lm_batch(q: np.ndarray, target: np.ndarray, p: float, s_max: float, iterations: int):
    """Levenberg-Marquardt on many (u1, u2, s) starts at once.

    Residuals are the Bloch-vector misfits of both states, so the squared
    norm of each half is 4 times that state's infidelity.
    """

    k = len(q)

    def evaluate(qq):
        # both states of every start in one vectorized call
        b, bu, bs = _bloch_with_grad(np.concatenate([qq[:, 0], qq[:, 1]]), np.concatenate([qq[:, 2], qq[:, 2]]), p)
        r = np.empty((k, 9))
        r[:, :3] = b[:k] - target
        r[:, 3:6] = b[k:] + target
        # orthogonal qubit states have antipodal Bloch vectors
        r[:, 6:] = LM_ORTHOGONALITY_WEIGHT * (b[:k] + b[k:])
        jac = np.zeros((k, 9, 3))
        jac[:, :3, 0] = bu[:k]
        jac[:, 3:6, 1] = bu[k:]
        jac[:, :3, 2] = bs[:k]
        jac[:, 3:6, 2] = bs[k:]
        jac[:, 6:, 0] = LM_ORTHOGONALITY_WEIGHT * bu[:k]
        jac[:, 6:, 1] = LM_ORTHOGONALITY_WEIGHT * bu[k:]
        jac[:, 6:, 2] = LM_ORTHOGONALITY_WEIGHT * (bs[:k] + bs[k:])
        return r, jac

    q = q.copy()
    r, jac = evaluate(q)
    cost = np.einsum("ij,ij->i", r, r)
    lam = np.full(len(q), 1e-3)
    eye = np.eye(3)
    for _ in range(iterations):
        jt = jac.transpose(0, 2, 1)
        m = jt @ jac
        g = np.einsum("nij,nj->ni", jt, r)
        diag = np.maximum(np.einsum("nii->ni", m), 1e-12)
        step = -np.linalg.solve(m + lam[:, None, None] * eye * diag[:, :, None], g[:, :, None])[:, :, 0]
        qn = q + step
        qn[:, 2] = np.clip(qn[:, 2], 0.0, s_max)
        rn, jn = evaluate(qn)
        cn = np.einsum("ij,ij->i", rn, rn)
        ok = cn < cost
        q[ok], r[ok], jac[ok], cost[ok] = qn[ok], rn[ok], jn[ok], cn[ok]
        lam = np.where(ok, lam * 0.3, lam * 10.0)
        if cost.min() < LM_DONE:
            break
    infid = np.maximum(np.sum(r[:, :3] ** 2, axis=1), np.sum(r[:, 3:6] ** 2, axis=1)) / 4
    return q, infid


def golden_section_max(fn: Callable[[float], float], lo: float, hi: float, tol: float = POLISH_TOL, max_iter: int = POLISH_ITERATIONS):
    """Maximize a unimodal ``fn`` on ``[lo, hi]``; returns ``(argmax, max)``.

    Stops when the bracket is narrower than ``tol`` (relative to its centre,
    floored at 1) or when successive best values change by less than ``tol``.
    """
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    best = max(fc, fd)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a + b) / 2):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
        new_best = max(fc, fd)
        if abs(new_best - best) < tol and abs(b - a) < 1e-6:
            best = new_best
            break
        best = new_best
    return (c, fc) if fc >= fd else (d, fd)


def _polish(v, u1: float, u2: float, s: float, p: float, s_max: float):
    """Make the pair exactly orthogonal, then maximize fidelity along that curve.

    Exactly orthogonal pairs form a curve parameterized by s; on it both
    fidelities coincide, so one golden-section search in s suffices.
    """
    track = {"u": (u1, u2)}

    def fid_at(s_):
        a, b, res = _orthogonalize(*track["u"], s_, p)
        if res > ORTHOGONAL_RESIDUAL * 100:
            return -1.0
        track["u"] = (a, b)
        return _fidelity_reduced(v, a, s_, p)

    start = fid_at(s)
    u_start = track["u"]
    if start < 0:
        return u1, u2, s, -1.0
    width = POLISH_WIDTH * max(1.0, s)
    s_best, f_best = golden_section_max(fid_at, max(0.0, s - width), min(s_max, s + width))
    if f_best <= start:
        return (*u_start, s, start)
    track["u"] = u_start
    fid_at(s_best)
    return (*track["u"], s_best, f_best)


def _physical_pair(geom: OpticalGeometry, u1: float, u2: float, s: float):
    """Convert a reduced solution to (z, x1, x2), re-orthogonalizing at the float z."""
    p = geom.d / geom.a
    z = min(max(_z_of_s(geom, s), geom.f), geom.f * (2 - IMAGE_PLANE_GAP))
    pp = optics.plane_params(geom, z)
    s_phys = pp.kappa * geom.d * pp.eta / 2
    a, b, res = _orthogonalize(u1, u2, s_phys, p)
    if res <= ORTHOGONAL_RESIDUAL * 100:
        u1, u2 = a, b
    return z, u1 / pp.kappa, u2 / pp.kappa


def _search_general(geom: OpticalGeometry, v1, v2):
    p = geom.d / geom.a
    s_max = _s_max(geom)
    atlas = _atlas(p, s_max)
    target = _bloch_of(v1)
    nrows, width = atlas.u.shape
    dots = (target.astype(np.float32) @ atlas.bloch.reshape(3, -1)).reshape(nrows, width)
    i1 = np.argmax(dots, axis=1)
    i2 = np.argmin(dots, axis=1)
    rows = np.arange(len(atlas.s_rows))
    score = np.minimum(dots[rows, i1], -dots[rows, i2])
    top = np.argsort(-score, kind="stable")[:LM_CANDIDATES]
    q0 = np.stack([atlas.u[top, i1[top]], atlas.u[top, i2[top]], atlas.s_rows[top]], axis=1).astype(float)
    q, infid = _lm_batch(q0, target, p, s_max, LM_ITERATIONS)

    # polish the best start; fall back to the runners-up only if it disappoints
    best = None
    for k in np.argsort(infid, kind="stable")[:POLISH_STARTS]:
        cand = _polish(v1, *q[k], p, s_max)
        if best is None or cand[3] > best[3]:
            best = cand
        if best[3] >= 1 - POLISH_GOOD_ENOUGH:
            break
    u1, u2, s, _ = best
    z, x1, x2 = _physical_pair(geom, u1, u2, s)
    return z, np.array([x1, x2])


def _search_circle(geom: OpticalGeometry, v1):
    """Exact symmetric solution for eigenvectors with relative phase +-pi/2."""
    p = geom.d / geom.a
    s_max = _s_max(geom)
    t = v1[1] / v1[0]
    tau = float(t.imag)
    u0 = math.pi / (2 * p)
    candidates = []
    # r(u0, s) = i g(u0, s); r(-u0, s) = -i / g(u0, s)
    for u, target in ((u0, tau), (-u0, -1.0 / tau)):
        fn = lambda s, T=target: _sinc(u0 + s) - T * _sinc(u0 - s)  # noqa: E731
        grid = np.linspace(0.0, min(s_max, 4 * math.pi), 2049)
        vals = np.array([fn(s) for s in grid])
        sign = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
        if len(sign):
            k = sign[0]
            s_root = grid[k] if vals[k] == 0 else brentq(fn, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            candidates.append((s_root, u))
    if not candidates:
        return None
    s_root, u = min(candidates)
    z = _z_of_s(geom, s_root)
    pp = optics.plane_params(geom, z)
    # keep the inter-slit phase of point 1 exactly at +-pi/2
    x1 = u / pp.kappa
    return z, np.array([x1, -x1])


def _is_slit_state(v) -> int | None:
    mods = np.abs(v)
    k = int(np.argmax(mods))
    if np.all(np.delete(mods, k) <= SLIT_STATE_TOL):
        return k + 1
    return None


def plan_spatial(obs, geom: OpticalGeometry | None = None, threshold: float = FIDELITY_THRESHOLD) -> SpatialPlan:
    """Detection plane and positions realizing the observable's eigenbasis.

    Raises :class:`SearchFailed` (carrying the best pair found) when either
    fidelity stays below ``threshold``.
    """
    obs = _as_observable(obs)
    geom = geom or OpticalGeometry()
    if obs.dim != 2 or geom.D != 2:
        raise WrongDimension("spatial planning is implemented for double slits (D = 2) only")
    eb = qstate.eigenbasis(obs)
    v1, v2 = eb.vectors

    slits = [_is_slit_state(v) for v in (v1, v2)]
    if all(k is not None for k in slits):
        positions = np.array([optics.image_plane_position(geom, k) for k in slits])
        return SpatialPlan(obs, eb.values.copy(), None, positions, np.ones(2), np.ones(2), eb.degenerate)

    m1, m2 = abs(v1[0]), abs(v1[1])
    rel = np.angle(v1[1]) - np.angle(v1[0])
    if abs(m1 - m2) <= CIRCLE_TOL:
        z = geom.f
        positions = []
        for v in (v1, v2):
            ph = math.remainder(float(np.angle(v[1]) - np.angle(v[0])), 2 * math.pi)
            positions.append(geom.wavelength * geom.f * ph / (2 * math.pi * geom.d))
        found = (z, np.array(positions))
    elif abs(abs(math.remainder(float(rel), 2 * math.pi)) - math.pi / 2) <= CIRCLE_TOL:
        found = _search_circle(geom, v1)
        if found is None:
            found = _search_general(geom, v1, v2)
    else:
        found = _search_general(geom, v1, v2)

    z, positions = found
    states = [optics.postselected_state(geom, x, z) for x in positions]
    fids = np.array([abs(np.vdot(v, st.normalized)) ** 2 for v, st in zip((v1, v2), states)])
    fids = np.minimum(fids, 1.0)
    overlap, _ = optics.max_overlap(states)
    if fids.min() < threshold or overlap > optics.PLANNER_ORTHOGONALITY_TOL:
        raise SearchFailed(
            f"best shared-plane pair reaches fidelities {fids.tolist()} (overlap {overlap:.3e}) at z={z!r}",
            best_fidelities=fids,
            best_z=z,
            best_positions=positions,
        )
    partial = SpatialPlan(obs, eb.values.copy(), float(z), positions, np.ones(2), fids, eb.degenerate)
    comp = compensation_factors(geom, partial)
    return SpatialPlan(obs, eb.values.copy(), float(z), positions, comp, fids, eb.degenerate)


def compensation_factors(geom: OpticalGeometry, plan: SpatialPlan) -> np.ndarray:
    """Inverse envelope at each position, scaled so the smallest factor is 1."""
    if plan.image_plane:
        return np.ones(plan.dim)
    env = np.array([optics.envelope(geom, x, plan.z) for x in plan.positions])
    if np.any(env <= optics.DARK_THRESHOLD):
        raise DarkPoint(f"diffraction envelope vanishes at one of {plan.positions.tolist()}")
    inv = 1.0 / env
    return inv / inv.min()


def spatial_densities(rho: DensityMatrix, plan: SpatialPlan, geom: OpticalGeometry) -> np.ndarray:
    """Raw point-detector densities at the plan's positions (1/m)."""
    if plan.image_plane:
        raise ValidationError("raw densities are undefined in the image-plane limit")
    return np.array([optics.detection_density(rho, geom, x, plan.z) for x in plan.positions])


def predicted_statistics(rho: DensityMatrix, plan, geom: OpticalGeometry) -> tuple[np.ndarray, float]:
    """Outcome probabilities and expectation value an ideal run of ``plan`` yields."""
    dim = rho.dim if isinstance(rho, DensityMatrix) else np.asarray(rho).shape[0]
    if dim != plan.dim:
        raise DimensionMismatch(f"state dimension {dim} != plan dimension {plan.dim}")
    if isinstance(plan, PovmPlan):
        probs = povm.fixed_point_probabilities(rho, plan.settings, geom, plan.detection_point[1])
    elif isinstance(plan, SpatialPlan):
        if plan.image_plane:
            probs = optics.outcome_probabilities(rho, geom, plan.states(geom))
        else:
            weighted = spatial_densities(rho, plan, geom) * plan.compensation
            total = weighted.sum()
            if not total > 0:
                raise DarkPoint("all spatial detection densities vanish")
            probs = weighted / total
    else:
        raise ValidationError(f"unknown plan type {type(plan).__name__}")
    expectation = float(np.dot(plan.eigenvalues, probs))
    lo, hi = float(plan.eigenvalues.min()), float(plan.eigenvalues.max())
    return probs, min(max(expectation, lo), hi)
