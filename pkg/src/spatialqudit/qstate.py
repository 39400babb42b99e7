"""Small-dimension linear algebra for slit states and observables.

States live in the which-slit basis ``{|1>, ..., |D>}``. Every vector the
module hands back is gauge-fixed: its first nonzero component is made real
and non-negative, so equal states compare equal component by component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NotHermitian,
    NotNormalized,
    NotPositive,
    TraceNotOne,
    ValidationError,
    WrongDimension,
)

STRUCTURAL_TOL = 1e-12
SPECTRAL_TOL = 1e-10
PSD_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated D x D density matrix. Build it with :func:`validate_density`."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(self.entries))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def expectation(self, operator) -> complex:
        return complex(np.trace(self.entries @ np.asarray(operator)))


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator on the slit space."""

    entries: np.ndarray

    def __post_init__(self):
        h = _readonly(self.entries)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise WrongDimension(f"observable must be square, got shape {h.shape}")
        if h.shape[0] < 2:
            raise WrongDimension("observable dimension must be >= 2")
        worst = float(np.max(np.abs(h - h.conj().T)))
        if worst > STRUCTURAL_TOL * max(1.0, float(np.max(np.abs(h)))):
            raise NotHermitian(f"observable is not Hermitian: max |H_ij - H_ji*| = {worst:.3e}")
        object.__setattr__(self, "entries", h)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Observable):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    @classmethod
    def pauli(cls, name: str) -> "Observable":
        try:
            return cls(PAULIS[name])
        except KeyError:
            raise ValidationError(f"unknown Pauli observable {name!r}; expected one of {sorted(PAULIS)}") from None


@dataclass(frozen=True)
class BlochVector:
    """Polar angle ``theta`` in [0, pi] and azimuth ``phi`` in [0, 2 pi).

    ``|1>`` sits at theta = 0 and ``|2>`` at theta = pi; the state is
    ``cos(theta/2)|1> + exp(i phi) sin(theta/2)|2>``.
    """

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValidationError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise ValidationError(f"phi={self.phi} outside [0, 2pi)")

    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


@dataclass(frozen=True, eq=False)
class Eigenbasis:
    """Eigenvalues in descending order with matching orthonormal eigenvectors."""

    values: np.ndarray
    vectors: tuple
    degenerate: bool = False

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return iter(zip(self.values.tolist(), self.vectors))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return float(self.values[i]), self.vectors[i]


def wrap_phase(angle) -> float:
    """Map an angle onto [0, 2 pi)."""
    w = float(np.mod(angle, 2 * np.pi))
    return 0.0 if w >= 2 * np.pi else w


def fix_gauge(vector, tol: float = STRUCTURAL_TOL) -> np.ndarray:
    """Remove the global phase so the first nonzero component is real and >= 0."""
    v = np.array(vector, dtype=complex)
    for c in v:
        if abs(c) > tol:
            v = v * (np.conj(c) / abs(c))
            lead = np.flatnonzero(np.abs(v) > tol)[0]
            v[lead] = abs(v[lead])
            break
    return v


def validate_density(entries) -> DensityMatrix:
    """Check a candidate density matrix and wrap it; never repairs the input.

    Raises
    ------
    NotHermitian, TraceNotOne, NotPositive
        With the worst offending magnitude in the message.
    """
    rho = np.array(entries, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise WrongDimension(f"density matrix must be square, got shape {rho.shape}")
    if rho.shape[0] < 2:
        raise WrongDimension("density matrix dimension must be >= 2")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > STRUCTURAL_TOL:
        raise NotHermitian(f"density matrix is not Hermitian: max |rho_ij - rho_ji*| = {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1) > STRUCTURAL_TOL:
        raise TraceNotOne(f"trace is {tr.real:.17g}{tr.imag:+.3g}j, |Tr - 1| = {abs(tr - 1):.3e}")
    lam_min = float(np.linalg.eigvalsh(rho).min())
    if lam_min < -PSD_TOL:
        raise NotPositive(f"density matrix has negative eigenvalue {lam_min:.6g}")
    return DensityMatrix(rho)


def pure_density(vector) -> DensityMatrix:
    v = np.asarray(vector, dtype=complex)
    _check_normalized(v)
    return validate_density(np.outer(v, v.conj()))


def _check_normalized(v: np.ndarray, tol: float = STRUCTURAL_TOL):
    n = float(np.linalg.norm(v))
    if abs(n - 1) > tol:
        raise NotNormalized(f"vector norm is {n:.17g}, expected 1")


def bloch_from_pure(state) -> BlochVector:
    v = np.asarray(state, dtype=complex)
    if v.shape != (2,):
        raise WrongDimension(f"Bloch angles need a 2-component state, got shape {v.shape}")
    _check_normalized(v)
    m1, m2 = abs(v[0]), abs(v[1])
    theta = float(2 * np.arctan2(m2, m1))
    if m1 <= STRUCTURAL_TOL or m2 <= STRUCTURAL_TOL:
        phi = 0.0
    else:
        phi = wrap_phase(np.angle(v[1]) - np.angle(v[0]))
    return BlochVector(min(theta, np.pi), phi)


def pure_from_bloch(b: BlochVector) -> np.ndarray:
    c, s = np.cos(b.theta / 2), np.sin(b.theta / 2)
    # snap the round-off at the poles so |2> comes out as exactly (0, 1)
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    return fix_gauge(np.array([c, np.exp(1j * b.phi) * s]))


def eigenbasis(obs: Observable | np.ndarray) -> Eigenbasis:
    """Eigen-decompose a Hermitian observable.

    Eigenvalues come out in descending order. Inside a degenerate eigenspace
    the vectors are ordered by their component moduli, biggest first slit
    first; ``degenerate`` is set but the basis is still usable.
    """
    if not isinstance(obs, Observable):
        obs = Observable(obs)
    h = np.array(obs.entries)
    values, vecs = np.linalg.eigh(h)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = [fix_gauge(vecs[:, k]) for k in order]

    scale = max(1.0, float(np.max(np.abs(values))))
    gap_tol = SPECTRAL_TOL * scale
    degenerate = bool(np.any(np.abs(np.diff(values)) <= gap_tol))
    if degenerate:
        # regroup clusters of equal eigenvalues and apply the tie-break
        start = 0
        for k in range(1, len(values) + 1):
            if k == len(values) or abs(values[k] - values[k - 1]) > gap_tol:
                block = vectors[start:k]
                block.sort(key=lambda v: tuple(-np.round(np.abs(v), 12)))
                vectors[start:k] = block
                start = k
    return Eigenbasis(values=np.asarray(values, dtype=float), vectors=tuple(vectors), degenerate=degenerate)


def born_probabilities(rho: DensityMatrix, vectors: Sequence) -> np.ndarray:
    """<e|rho|e> for each vector."""
    r = np.asarray(rho.entries if isinstance(rho, DensityMatrix) else rho)
    return np.array([float(np.real(np.conj(v) @ r @ v)) for v in vectors])


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dim != sigma.dim:
        raise DimensionMismatch(f"cannot compare dimensions {rho.dim} and {sigma.dim}")
    ev = np.linalg.eigvalsh(np.asarray(rho.entries) - np.asarray(sigma.entries))
    return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(ev)))))


def random_density(seed: int, dim: int, kind: str = "mixed") -> DensityMatrix:
    """Reproducible random state.

    ``pure`` draws a Haar-random ket; ``mixed`` normalizes G G^dagger for a
    square complex Gaussian G, which is full rank with probability one.
    """
    if dim < 2:
        raise WrongDimension("dimension must be >= 2")
    rng = np.random.default_rng(seed)
    if kind == "pure":
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v = fix_gauge(v / np.linalg.norm(v))
        rho = np.outer(v, v.conj())
    elif kind == "mixed":
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = g @ g.conj().T
        rho = rho / np.trace(rho).real
    else:
        raise ValidationError(f"kind must be 'pure' or 'mixed', got {kind!r}")
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)


def random_observable(seed: int, dim: int) -> Observable:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return Observable(0.5 * (g + g.conj().T))
