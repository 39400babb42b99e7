"""Photon-counting simulation, estimation and single-qubit tomography.

A point detector is modelled as a pinhole of half-width ``w``: a photon sent
through one setting clicks with probability ``efficiency * density * 2w``,
and each setting of a plan receives the same number of photons. Every
setting ``l`` draws from its own PCG64 stream seeded by
``SeedSequence([seed, *stream, l])``, so results do not depend on the order
or the thread in which settings are sampled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import optics, povm, qstate
from .errors import ClickProbabilityOverflow, NoCounts, PlanMismatch, UnbalancedDetectionPoint, ValidationError
from .optics import OpticalGeometry
from .planner import PovmPlan, SpatialPlan, plan_povm
from .qstate import DensityMatrix, Observable

PAULI_ORDER = ("sigma_x", "sigma_y", "sigma_z")


@dataclass(frozen=True)
class DetectorModel:
    pinhole_halfwidth: float = 1e-6
    efficiency: float = 1.0
    shots: int = 1_000_000

    def __post_init__(self):
        w = self.pinhole_halfwidth
        if not (isinstance(w, (int, float)) and math.isfinite(w) and w > 0):
            raise ValidationError(f"w_m: pinhole half-width must be positive, got {w!r}")
        e = self.efficiency
        if not (isinstance(e, (int, float)) and 0 < e <= 1):
            raise ValidationError(f"efficiency: must lie in (0, 1], got {e!r}")
        n = self.shots
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n <= 0:
            raise ValidationError(f"shots: must be a positive integer, got {n!r}")

    def click_probabilities(self, densities) -> np.ndarray:
        q = self.efficiency * np.asarray(densities, dtype=float) * 2 * self.pinhole_halfwidth
        if np.any(q > 1):
            raise ClickProbabilityOverflow(
                f"click probability {float(q.max()):.6g} > 1; reduce w_m (currently {self.pinhole_halfwidth!r})"
            )
        return q


@dataclass(frozen=True, eq=False)
class CountRecord:
    plan: PovmPlan | SpatialPlan
    counts: tuple
    shots: int
    seed: int

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 or c > self.shots for c in counts):
            raise ValidationError(f"counts {counts} must lie in [0, shots={self.shots}]")
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other):
        if not isinstance(other, CountRecord):
            return NotImplemented
        return (self.plan, self.counts, self.shots, self.seed) == (other.plan, other.counts, other.shots, other.seed)


def setting_densities(rho: DensityMatrix, plan, geom: OpticalGeometry) -> np.ndarray:
    """Per-setting detection densities (1/m) with software weights applied.

    POVM plans use the fixed-point density times ``rescale_weight**2``;
    spatial plans use the raw density times the compensation factor.
    """
    if isinstance(plan, PovmPlan):
        z = plan.detection_point[1]
        if not povm.detection_point_is_balanced(geom, z):
            raise UnbalancedDetectionPoint(f"slit amplitudes at (0, {z!r}) are unequal")
        return np.array([povm.total_density(rho, s, geom, z) * s.rescale_weight**2 for s in plan.settings])
    if isinstance(plan, SpatialPlan):
        if plan.image_plane:
            raise ValidationError("image-plane plans have no finite point density; cannot simulate counts")
        dens = np.array([optics.detection_density(rho, geom, x, plan.z) for x in plan.positions])
        return dens * plan.compensation
    raise ValidationError(f"unknown plan type {type(plan).__name__}")


def substream(seed: int, stream: Sequence[int], ell: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream), int(ell)])))


def simulate_counts(
    rho: DensityMatrix,
    plan,
    geom: OpticalGeometry,
    model: DetectorModel,
    seed: int,
    stream: Sequence[int] = (),
    workers: int = 1,
) -> CountRecord:
    if seed < 0:
        raise ValidationError(f"seed must be non-negative, got {seed}")
    q = model.click_probabilities(setting_densities(rho, plan, geom))

    def draw(ell):
        return int(substream(seed, stream, ell).binomial(model.shots, q[ell]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(draw, range(len(q))))
    else:
        counts = [draw(ell) for ell in range(len(q))]
    return CountRecord(plan, tuple(counts), model.shots, int(seed))


def estimate_probabilities(record: CountRecord) -> list[tuple[float, float]]:
    counts = np.asarray(record.counts, dtype=float)
    n = counts.sum()
    if n <= 0:
        raise NoCounts("no detector clicks recorded")
    p = counts / n
    return [(float(pk), math.sqrt(max(pk * (1 - pk), 0.0) / n)) for pk in p]


def estimate_expectation(obs, record: CountRecord) -> tuple[float, float]:
    """``sum_l lambda_l p_l`` and its multinomial standard error."""
    obs = obs if isinstance(obs, Observable) else Observable(obs)
    if obs != record.plan.observable:
        raise PlanMismatch("count record was not produced from a plan for this observable")
    lam = np.asarray(record.plan.eigenvalues, dtype=float)
    est = estimate_probabilities(record)
    p = np.array([e[0] for e in est])
    n = float(sum(record.counts))
    mean = float(lam @ p)
    var = max(float((lam**2) @ p) - mean**2, 0.0) / n
    mean = min(max(mean, float(lam.min())), float(lam.max()))
    return mean, math.sqrt(var)


def reconstruct_qubit(pauli_estimates) -> DensityMatrix:
    """Linear inversion from (value, error) estimates of sigma_x, sigma_y, sigma_z.

    A Bloch vector longer than 1 is scaled back onto the sphere.
    """
    est = list(pauli_estimates)
    if len(est) != 3:
        raise ValidationError(f"need three Pauli estimates, got {len(est)}")
    r = np.array([float(e[0]) if isinstance(e, (tuple, list)) else float(e) for e in est])
    norm = float(np.linalg.norm(r))
    if norm > 1:
        r = r / norm
    rho = 0.5 * (np.eye(2) + r[0] * qstate.SIGMA_X + r[1] * qstate.SIGMA_Y + r[2] * qstate.SIGMA_Z)
    # the radial rescale can leave a -1e-17 eigenvalue; validation tolerates it
    return qstate.validate_density(rho)


@dataclass(frozen=True, eq=False)
class TomographyReport:
    estimates: tuple  # ((value, error),) * 3 in sigma_x, sigma_y, sigma_z order
    records: tuple
    reconstruction: DensityMatrix
    trace_distance: float | None


def run_tomography(
    rho: DensityMatrix,
    geom: OpticalGeometry,
    model: DetectorModel,
    seed: int,
    rescale: bool = False,
    truth: DensityMatrix | None = None,
    workers: int = 1,
) -> TomographyReport:
    """Simulate all three Pauli POVM plans on ``rho`` and reconstruct it.

    Pauli ``k`` (0, 1, 2 for x, y, z) samples from streams ``(seed, k, l)``.
    """
    if geom.D != 2:
        raise ValidationError("tomography is implemented for qubits only")
    estimates, records = [], []
    for k, name in enumerate(PAULI_ORDER):
        obs = Observable.pauli(name)
        plan = plan_povm(obs, geom, rescale=rescale)
        rec = simulate_counts(rho, plan, geom, model, seed, stream=(k,), workers=workers)
        records.append(rec)
        estimates.append(estimate_expectation(obs, rec))
    recon = reconstruct_qubit(estimates)
    td = None if truth is None else qstate.trace_distance(recon, truth)
    return TomographyReport(tuple(estimates), tuple(records), recon, td)
