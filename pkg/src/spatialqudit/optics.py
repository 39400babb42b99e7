"""Diffraction model of a D-slit aperture imaged through a single lens.

The lens (focal length ``f``) sits ``2f`` behind the slits; a point detector
scans transversally (``x``) in a plane ``z`` between the focal plane
(``z = f``, far field) and the image plane (``z = 2f``, near field). Slit
``j`` contributes the amplitude

    sqrt(kappa/pi) * exp(i kappa x d (j-1) / a) * sinc(kappa [x + d (j - Delta) eta])

with ``Delta = (D+1)/2``, ``eta = (z-f)/f`` and ``kappa = 2 pi a / (lambda (2f - z))``.
All lengths are in meters.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qstate
from .errors import (
    DarkPoint,
    DimensionMismatch,
    GeometryError,
    ImagePlaneSingular,
    NegativeDensity,
    NotComplete,
    NotOrthogonal,
    OutOfRange,
    ValidationError,
    WrongDimension,
)
from .qstate import BlochVector, DensityMatrix

DARK_THRESHOLD = 1e-30
USER_ORTHOGONALITY_TOL = 1e-6
PLANNER_ORTHOGONALITY_TOL = 1e-10
UNIT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class OpticalGeometry:
    """Aperture and lens parameters; defaults are a well-conditioned lab setup."""

    D: int = 2
    a: float = 10e-6
    d: float = 80e-6
    wavelength: float = 800e-9
    f: float = 0.3

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 2:
            raise GeometryError(f"D: slit count must be an integer >= 2, got {self.D}")
        for name in ("a", "d", "wavelength", "f"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise GeometryError(f"{name}: must be a positive length, got {value!r}")
        if self.d <= 2 * self.a:
            raise GeometryError(f"d: slit overlap (d={self.d!r} <= 2a={2 * self.a!r})")
        if self.wavelength / self.f >= 1e-3:
            raise GeometryError(f"wavelength: paraxial regime needs lambda/f < 1e-3, got {self.wavelength / self.f:.3g}")

    @property
    def delta(self) -> float:
        return (self.D + 1) / 2

    @property
    def far_field_period(self) -> float:
        """Transverse shift at ``z = f`` that advances the inter-slit phase by 2 pi."""
        return self.wavelength * self.f / self.d


@dataclass(frozen=True)
class PlaneParams:
    z: float
    eta: float
    Z: float
    kappa: float
    delta: float


@dataclass(frozen=True, eq=False)
class PostselectedState:
    """Detector-selected slit state.

    ``amplitudes`` is the unnormalized vector (units m^-1/2) and ``norm2`` its
    squared norm; both are ``None`` for the image-plane limit, where only the
    normalized projector is finite.
    """

    geometry: OpticalGeometry
    x: float
    z: float
    amplitudes: np.ndarray | None
    norm2: float | None
    normalized: np.ndarray
    image_plane: bool = False

    @property
    def projector(self) -> np.ndarray:
        v = self.normalized
        return np.outer(v, v.conj())


def _check_plane(geom: OpticalGeometry, z: float):
    if z == 2 * geom.f:
        raise ImagePlaneSingular(f"z = 2f = {z!r} is the image plane; kappa diverges (use image_plane_projector)")
    if not (geom.f <= z < 2 * geom.f):
        raise OutOfRange(f"z={z!r} outside [f, 2f) = [{geom.f!r}, {2 * geom.f!r})")


def plane_params(geom: OpticalGeometry, z: float) -> PlaneParams:
    z = float(z)
    _check_plane(geom, z)
    eta = (z - geom.f) / geom.f
    Z = (2 * geom.f - z) / eta if eta != 0 else math.inf
    kappa = 2 * math.pi * geom.a / (geom.wavelength * (2 * geom.f - z))
    return PlaneParams(z=z, eta=eta, Z=Z, kappa=kappa, delta=geom.delta)


def sinc(arg):
    """sin(e)/e with a Taylor branch near the origin."""
    e = np.asarray(arg, dtype=float)
    small = np.abs(e) < 1e-4
    safe = np.where(small, 1.0, e)
    e2 = e * e
    out = np.where(small, 1.0 - e2 / 6.0 + e2 * e2 / 120.0, np.sin(safe) / safe)
    return out if out.ndim else float(out)


def slit_amplitude(geom: OpticalGeometry, j: int, x, z: float):
    """Amplitude of slit ``j`` (1-based) at transverse position(s) ``x``."""
    if not 1 <= j <= geom.D:
        raise ValidationError(f"slit index {j} outside 1..{geom.D}")
    pp = plane_params(geom, z)
    x = np.asarray(x, dtype=float)
    k = pp.kappa
    phase = np.exp(1j * k * x * geom.d * (j - 1) / geom.a)
    amp = math.sqrt(k / math.pi) * phase * sinc(k * (x + geom.d * (j - pp.delta) * pp.eta))
    return amp if amp.ndim else complex(amp)


def slit_amplitudes(geom: OpticalGeometry, x, z: float) -> np.ndarray:
    """All D amplitudes; shape ``(D,)`` for scalar ``x`` or ``(D, n)`` for arrays."""
    return np.array([slit_amplitude(geom, j, x, z) for j in range(1, geom.D + 1)])


def envelope(geom: OpticalGeometry, x, z: float):
    """Diffraction envelope sum_j |phi_j(x, z)|^2 in 1/m."""
    amps = slit_amplitudes(geom, x, z)
    e = np.sum(np.abs(amps) ** 2, axis=0)
    return e if np.ndim(e) else float(e)


def postselected_state(geom: OpticalGeometry, x: float, z: float) -> PostselectedState:
    amps = slit_amplitudes(geom, float(x), z)
    norm2 = float(np.sum(np.abs(amps) ** 2))
    if not norm2 > DARK_THRESHOLD:
        raise DarkPoint(f"all slit amplitudes vanish at x={x!r}, z={z!r} (norm2={norm2:.3e})")
    normalized = qstate.fix_gauge(amps / math.sqrt(norm2))
    return PostselectedState(geom, float(x), float(z), amps, norm2, normalized)


def image_plane_position(geom: OpticalGeometry, ell: int) -> float:
    """Detector position of slit image ``ell`` in the image plane.

    Follows the lab convention ``x_l = d (l - Delta)``, i.e. ``x_1 = -d/2`` and
    ``x_2 = +d/2`` for a double slit.
    """
    return geom.d * (ell - geom.delta)


def image_plane_projector(geom: OpticalGeometry, ell: int) -> PostselectedState:
    """Analytic z -> 2f limit: detecting on slit image ``ell`` selects ``|ell>``."""
    if not 1 <= ell <= geom.D:
        raise ValidationError(f"slit index {ell} outside 1..{geom.D}")
    v = np.zeros(geom.D, dtype=complex)
    v[ell - 1] = 1.0
    return PostselectedState(geom, image_plane_position(geom, ell), 2 * geom.f, None, None, v, image_plane=True)


def _rho(rho) -> np.ndarray:
    return np.asarray(rho.entries if isinstance(rho, DensityMatrix) else rho, dtype=complex)


def _density_row(r: np.ndarray, geom: OpticalGeometry, xs: np.ndarray, z: float) -> np.ndarray:
    amps = slit_amplitudes(geom, xs, z)  # (D, n)
    vals = np.einsum("in,ij,jn->n", amps.conj(), r, amps)
    scale = np.sum(np.abs(amps) ** 2, axis=0)
    resid = 1e-12 * scale + 1e-300
    if np.any(np.abs(vals.imag) > np.maximum(resid, 1e-12)):
        raise NegativeDensity("detection density has a non-negligible imaginary part")
    dens = vals.real
    if np.any(dens < -np.maximum(resid, 1e-12)):
        raise NegativeDensity(f"detection density {dens.min():.3e} < 0")
    return np.maximum(dens, 0.0)


def detection_density(rho: DensityMatrix, geom: OpticalGeometry, x: float, z: float) -> float:
    """Tr[rho S(x, z)] for a unit-efficiency point detector, in 1/m."""
    r = _rho(rho)
    if r.shape[0] != geom.D:
        raise DimensionMismatch(f"state dimension {r.shape[0]} != slit count {geom.D}")
    return float(_density_row(r, geom, np.array([float(x)]), float(z))[0])


def _as_state(geom: OpticalGeometry, point) -> PostselectedState:
    if isinstance(point, PostselectedState):
        return point
    x, z = point
    return postselected_state(geom, x, z)


def max_overlap(states: Sequence[PostselectedState]) -> tuple[float, tuple[int, int]]:
    worst, pair = 0.0, (0, 0)
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            ov = abs(np.vdot(states[i].normalized, states[j].normalized))
            if ov > worst:
                worst, pair = ov, (i + 1, j + 1)
    return worst, pair


def outcome_probabilities(
    rho: DensityMatrix,
    geom: OpticalGeometry,
    points: Sequence,
    orthogonality_tol: float = USER_ORTHOGONALITY_TOL,
) -> np.ndarray:
    """Normalized count-rate probabilities for D detector positions in one plane.

    ``points`` holds ``(x, z)`` pairs or :class:`PostselectedState` objects
    (the latter allows image-plane projectors).
    """
    r = _rho(rho)
    if r.shape[0] != geom.D:
        raise DimensionMismatch(f"state dimension {r.shape[0]} != slit count {geom.D}")
    states = [_as_state(geom, p) for p in points]
    if len(states) != geom.D:
        raise WrongDimension(f"need {geom.D} detection points, got {len(states)}")
    if len({s.z for s in states}) != 1:
        raise ValidationError("all detection points must share one plane z")
    worst, pair = max_overlap(states)
    if worst > orthogonality_tol:
        raise NotOrthogonal(f"postselected states {pair[0]} and {pair[1]} overlap with modulus {worst:.3e}")
    probs = np.array([float(np.real(np.conj(s.normalized) @ r @ s.normalized)) for s in states])
    total = probs.sum()
    if abs(total - 1) > UNIT_SUM_TOL:
        raise NotComplete(f"outcome probabilities sum to {total:.17g}")
    return probs / total


def position_to_bloch(geom: OpticalGeometry, x: float, z: float) -> BlochVector:
    if geom.D != 2:
        raise WrongDimension("Bloch angles are defined for D = 2 only")
    return qstate.bloch_from_pure(postselected_state(geom, x, z).normalized)


def scan_density(
    rho: DensityMatrix,
    geom: OpticalGeometry,
    x_grid: Sequence[float],
    z_grid: Sequence[float],
    workers: int = 1,
) -> np.ndarray:
    """Detection density on a grid as an ``(n_z * n_x, 3)`` array of (x, z, density).

    Rows are ordered z-major, x-minor. Each z-row is evaluated by the same
    vectorized kernel, so the table does not depend on ``workers``.
    """
    r = _rho(rho)
    if r.shape[0] != geom.D:
        raise DimensionMismatch(f"state dimension {r.shape[0]} != slit count {geom.D}")
    xs = np.asarray(x_grid, dtype=float)
    zs = [float(z) for z in z_grid]
    for z in zs:
        _check_plane(geom, z)

    def row(z):
        return _density_row(r, geom, xs, z)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, zs))
    else:
        rows = [row(z) for z in zs]
    out = np.empty((len(zs) * len(xs), 3))
    for k, (z, dens) in enumerate(zip(zs, rows)):
        sl = slice(k * len(xs), (k + 1) * len(xs))
        out[sl, 0] = xs
        out[sl, 1] = z
        out[sl, 2] = dens
    return out
