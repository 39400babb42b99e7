"""Polarization-ancilla POVM and fixed-point detection.

A half-wave plate at angle ``theta_j`` and a phase shifter ``phi_j`` behind
slit ``j`` couple the (H-prepared) polarization to the slit state::

    U = sum_j exp(i phi_j) |j><j| (x) R(theta_j),
    R(theta) = [[cos 2theta, -sin 2theta], [sin 2theta, cos 2theta]].

Reading the polarization in {H, V} leaves the slit qudit with the diagonal
Kraus operators ``A_H = diag(exp(i phi_j) cos 2theta_j)`` and
``A_V = diag(exp(i phi_j) sin 2theta_j)``. Detected behind an H polarizer at
the balanced point ``(0, z)``, the count rate reproduces the statistics of
the projector the settings were synthesized for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import optics, qstate
from .errors import (
    AllZero,
    DimensionMismatch,
    ImpossibleOutcome,
    NotNormalized,
    UnbalancedDetectionPoint,
    ValidationError,
)
from .optics import OpticalGeometry
from .qstate import DensityMatrix

OUTCOMES = ("H", "V")
IMPOSSIBLE_TOL = 1e-12
ZERO_AMPLITUDE = 1e-12
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class LcdSettings:
    """Per-slit wave-plate angles and phase shifts.

    ``rescale_weight`` is ``m = 1/c`` in (0, 1], where ``c >= 1`` is the gain
    applied to the synthesized Kraus operator; densities recorded with these
    settings are multiplied by ``m**2`` before normalization.
    """

    thetas: np.ndarray
    phis: np.ndarray
    rescale_weight: float = 1.0

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float).reshape(-1)
        ph = np.array(self.phis, dtype=float).reshape(-1)
        if th.shape != ph.shape or th.size < 2:
            raise ValidationError(f"thetas and phis must be equal-length with D >= 2, got {th.size} and {ph.size}")
        if np.any(np.abs(th) > math.pi / 4 + _ANGLE_SLACK):
            raise ValidationError(f"wave-plate angles must lie in [-pi/4, pi/4], got {th.tolist()}")
        if np.any(ph < 0) or np.any(ph >= 2 * math.pi):
            raise ValidationError(f"phase shifts must lie in [0, 2pi), got {ph.tolist()}")
        if ph[0] != 0.0:
            raise ValidationError(f"phase gauge requires phi_1 = 0, got {ph[0]!r}")
        if not (math.isfinite(self.rescale_weight) and 0.0 < self.rescale_weight <= 1.0):
            raise ValidationError(f"rescale_weight must lie in (0, 1], got {self.rescale_weight!r}")
        th.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "phis", ph)
        object.__setattr__(self, "rescale_weight", float(self.rescale_weight))

    @property
    def dim(self) -> int:
        return self.thetas.size

    def __eq__(self, other):
        if not isinstance(other, LcdSettings):
            return NotImplemented
        return (
            np.array_equal(self.thetas, other.thetas)
            and np.array_equal(self.phis, other.phis)
            and self.rescale_weight == other.rescale_weight
        )

    def transmission(self) -> np.ndarray:
        """Diagonal of A_H: ``exp(i phi_j) cos(2 theta_j)``."""
        return np.exp(1j * self.phis) * np.cos(2 * self.thetas)


@dataclass(frozen=True, eq=False)
class PovmPair:
    a_h: np.ndarray
    a_v: np.ndarray
    pi_h: np.ndarray
    pi_v: np.ndarray

    def kraus(self, outcome: str) -> np.ndarray:
        return {"H": self.a_h, "V": self.a_v}[_outcome(outcome)]

    def element(self, outcome: str) -> np.ndarray:
        return {"H": self.pi_h, "V": self.pi_v}[_outcome(outcome)]


@dataclass(frozen=True)
class OutcomeResult:
    """Post-measurement state (``None`` when the outcome is impossible) and its probability."""

    state: DensityMatrix | None
    probability: float
    outcome: str = field(default="H")


def _outcome(p: str) -> str:
    if p not in OUTCOMES:
        raise ValidationError(f"outcome must be 'H' or 'V', got {p!r}")
    return p


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, -s], [s, c]])


def build_unitary(settings: LcdSettings) -> np.ndarray:
    """The 2D x 2D slit (x) polarization unitary; index ``2*(j-1) + {0: H, 1: V}``."""
    D = settings.dim
    u = np.zeros((2 * D, 2 * D), dtype=complex)
    for j in range(D):
        u[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = np.exp(1j * settings.phis[j]) * rotation(settings.thetas[j])
    return u


def kraus_from_unitary(u: np.ndarray, outcome: str) -> np.ndarray:
    """<p|U|H> contracted over the polarization, as a D x D slit operator."""
    p = OUTCOMES.index(_outcome(outcome))
    D = u.shape[0] // 2
    return u.reshape(D, 2, D, 2)[:, p, :, 0]


def povm_elements(settings: LcdSettings) -> PovmPair:
    ph = np.exp(1j * settings.phis)
    a_h = np.diag(ph * np.cos(2 * settings.thetas))
    a_v = np.diag(ph * np.sin(2 * settings.thetas))
    return PovmPair(a_h=a_h, a_v=a_v, pi_h=a_h.conj().T @ a_h, pi_v=a_v.conj().T @ a_v)


def _entries(rho) -> np.ndarray:
    return np.asarray(rho.entries if isinstance(rho, DensityMatrix) else rho, dtype=complex)


def outcome_probability(rho: DensityMatrix, settings: LcdSettings, outcome: str = "H") -> float:
    r = _entries(rho)
    if r.shape[0] != settings.dim:
        raise DimensionMismatch(f"state dimension {r.shape[0]} != settings dimension {settings.dim}")
    pi = povm_elements(settings).element(outcome)
    return float(np.clip(np.real(np.trace(pi @ r)), 0.0, 1.0))


def apply_outcome(rho: DensityMatrix, settings: LcdSettings, outcome: str = "H", require_state: bool = True) -> OutcomeResult:
    """Post-measurement state ``A_p rho A_p^dagger / P_p`` and probability ``P_p``.

    Raises :class:`ImpossibleOutcome` if ``P_p <= 1e-12`` and ``require_state``.
    """
    r = _entries(rho)
    if r.shape[0] != settings.dim:
        raise DimensionMismatch(f"state dimension {r.shape[0]} != settings dimension {settings.dim}")
    a = povm_elements(settings).kraus(outcome)
    unnorm = a @ r @ a.conj().T
    prob = float(np.real(np.trace(unnorm)))
    if prob <= IMPOSSIBLE_TOL:
        if require_state:
            raise ImpossibleOutcome(f"outcome {outcome} has probability {prob:.3e}")
        return OutcomeResult(None, max(prob, 0.0), outcome)
    post = unnorm / prob
    post = 0.5 * (post + post.conj().T)
    return OutcomeResult(qstate.validate_density(post), min(prob, 1.0), outcome)


def total_density(rho: DensityMatrix, settings: LcdSettings, geom: OpticalGeometry, z: float) -> float:
    """Detection density at ``(0, z)`` behind the H polarizer, in 1/m.

    This is ``P_H * Tr[rho_H S(0, z)]``, computed without forming ``rho_H``:
    ``sum_ij conj(phi_i) t_i rho_ij conj(t_j) phi_j`` with ``t = diag(A_H)``
    and ``phi_j = phi_j(0, z)``. For a double slit every ``phi_j(0, z)`` is the
    same number, which reduces it to ``|phi_1(0, z)|^2 sum_ij rho_ij t_i conj(t_j)``.
    """
    r = _entries(rho)
    if r.shape[0] != settings.dim or settings.dim != geom.D:
        raise DimensionMismatch(f"dimensions disagree: state {r.shape[0]}, settings {settings.dim}, slits {geom.D}")
    amps = optics.slit_amplitudes(geom, 0.0, z)
    w = settings.transmission().conj() * amps
    val = float(np.real(np.conj(w) @ r @ w))
    # values at the round-off floor of the sum are exact zeros (dark outcomes)
    floor = 1e-14 * float(np.sum(np.abs(w)) ** 2) * float(np.max(np.abs(r)))
    return val if val > floor else 0.0


def detection_point_is_balanced(geom: OpticalGeometry, z: float, tol: float = 1e-12) -> bool:
    """True when every slit reaches (0, z) with the same amplitude."""
    amps = optics.slit_amplitudes(geom, 0.0, z)
    return bool(np.max(np.abs(amps - amps[0])) <= tol * abs(amps[0]))


def synthesize_settings(target, rescale: bool = False) -> LcdSettings:
    """LCD settings whose H-outcome Kraus operator is ``c * diag(conj(target))``.

    ``c = 1`` reproduces the plain wave-plate solution
    ``theta_j = arccos(|v_j|)/2``, ``phi_j = -arg v_j``. With ``rescale`` the
    largest component is given full transmission (``c = 1/max|v_j|``), which
    raises the success probability by ``1/max|v_j|**2``; the returned
    ``rescale_weight`` undoes that gain in software.
    """
    v = np.asarray(target, dtype=complex).reshape(-1)
    n = float(np.linalg.norm(v))
    if abs(n - 1) > qstate.STRUCTURAL_TOL:
        raise NotNormalized(f"target norm is {n:.17g}, expected 1")
    mods = np.abs(v)
    c = 1.0 / float(mods.max()) if rescale else 1.0
    thetas = 0.5 * np.arccos(np.clip(c * mods, 0.0, 1.0))
    present = mods > ZERO_AMPLITUDE
    phis = np.where(present, -np.angle(v), 0.0)
    ref = phis[np.flatnonzero(present)[0]]
    phis = np.where(present, phis - ref, 0.0)
    phis = np.array([qstate.wrap_phase(p) for p in phis])
    return LcdSettings(thetas, phis, rescale_weight=1.0 / c)


def qubit_conditions(target) -> tuple[float, float, float]:
    """Double-slit wave-plate solution written the textbook way.

    Returns ``(theta_1, theta_2, phi_2 - phi_1)`` with
    ``theta_1 = arccos(|v_1|)/2``, ``theta_2 = theta_1 - pi/4`` and
    ``phi_2 - phi_1 = arg(v_1 / v_2)``. The relative phase is 0 when
    either component vanishes.
    """
    v = np.asarray(target, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise ValidationError("qubit_conditions needs a 2-component target")
    n = float(np.linalg.norm(v))
    if abs(n - 1) > qstate.STRUCTURAL_TOL:
        raise NotNormalized(f"target norm is {n:.17g}, expected 1")
    theta1 = 0.5 * math.acos(min(1.0, abs(v[0])))
    if abs(v[0]) > ZERO_AMPLITUDE and abs(v[1]) > ZERO_AMPLITUDE:
        dphi = qstate.wrap_phase(np.angle(v[0] / v[1]))
    else:
        dphi = 0.0
    return theta1, theta1 - math.pi / 4, dphi


def fixed_point_probabilities(
    rho: DensityMatrix,
    plans: Sequence[LcdSettings],
    geom: OpticalGeometry,
    z: float | None = None,
) -> np.ndarray:
    """Normalized fixed-detector statistics for one LCD configuration per outcome.

    Each configuration's density at ``(0, z)`` is weighted by its
    ``rescale_weight**2`` before normalizing across outcomes.
    """
    z = geom.f if z is None else float(z)
    if not detection_point_is_balanced(geom, z):
        raise UnbalancedDetectionPoint(
            f"slit amplitudes at (0, {z!r}) are unequal for D={geom.D}; use the focal plane z = f"
        )
    dens = np.array([total_density(rho, s, geom, z) * s.rescale_weight**2 for s in plans])
    total = float(dens.sum())
    if not total > 0.0 or not math.isfinite(total):
        raise AllZero("every fixed-point detection density vanished")
    return dens / total
