"""Finite-dimensional states, Hermitian observables and weak values.

Everything is dense complex linear algebra on small systems (d <= 16 or so).
All public types are immutable after construction and all operations are pure
functions, so concurrent read access is safe. The lazily computed eigensystem
of an :class:`Observable` is cached with compute-equal semantics: racing
threads recompute the same deterministic decomposition.

Conventions:

* states are unit column vectors of ``complex128``;
* the weak value of ``A`` between preselection ``psi`` and postselection
  ``phi`` is ``<phi|A|psi> / <phi|psi>``;
* eigenvalues closer than ``1e-10 * (spectral_radius + 1)`` are merged into a
  single projector, so degenerate spectra contribute one displacement each.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DimensionMismatch,
    NotHermitian,
    OrthogonalPostselection,
    ProportionalToIdentity,
)

HERMITICITY_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-10
STATE_NORM_TOL = 1e-12
PROJECTOR_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
DENSITY_EIGENVALUE_FLOOR = -1e-10


def _finite_complex_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError(f"{name} contains NaN or Inf entries")
    arr.setflags(write=False)
    return arr


def eigenvalue_merge_tolerance(spectral_radius: float) -> float:
    """Absolute gap below which two eigenvalues count as degenerate."""
    return 1e-10 * (spectral_radius + 1.0)


@dataclass(frozen=True)
class PureState:
    """Normalized pure state of a d-dimensional system, d >= 2."""

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = _finite_complex_array(self.amplitudes, "amplitudes")
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise ValueError("state must be a vector of dimension >= 2")
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > STATE_NORM_TOL:
            raise ValueError(f"state norm {norm!r} differs from 1 beyond {STATE_NORM_TOL}")
        object.__setattr__(self, "amplitudes", arr)

    @classmethod
    def normalized(cls, values) -> "PureState":
        """Build a state from an unnormalized amplitude vector."""
        arr = np.asarray(values, dtype=np.complex128)
        norm = np.linalg.norm(arr)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(arr / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def overlap(self, other: "PureState") -> complex:
        """Inner product <self|other>."""
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimensions {self.dim} and {other.dim} differ")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, np.conj(self.amplitudes))

    def to_json(self) -> list:
        return [[float(a.real), float(a.imag)] for a in self.amplitudes]

    @classmethod
    def from_json(cls, data) -> "PureState":
        return cls(np.array([complex(re, im) for re, im in data]))


@dataclass(frozen=True)
class EigenSystem:
    """Distinct eigenvalues (ascending) with their orthogonal projectors."""

    eigenvalues: np.ndarray  # (k,) real
    projectors: np.ndarray  # (k, d, d) complex

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        projs = _finite_complex_array(self.projectors, "projectors")
        if vals.ndim != 1 or projs.ndim != 3 or projs.shape[0] != vals.shape[0]:
            raise ValueError("eigenvalues and projectors have inconsistent shapes")
        d = projs.shape[1]
        ident = np.eye(d)
        if np.max(np.abs(projs.sum(axis=0) - ident)) > PROJECTOR_TOL:
            raise ValueError("projectors do not sum to the identity")
        merge_tol = eigenvalue_merge_tolerance(float(np.max(np.abs(vals))) if vals.size else 0.0)
        if vals.size > 1 and np.min(np.diff(vals)) <= merge_tol:
            raise ValueError("eigenvalues not distinct after merging")
        for i in range(vals.shape[0]):
            for j in range(i, vals.shape[0]):
                prod = projs[i] @ projs[j]
                target = projs[i] if i == j else 0.0
                if np.max(np.abs(prod - target)) > PROJECTOR_TOL:
                    raise ValueError("projectors are not orthogonal idempotents")
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "projectors", projs)

    @property
    def dim(self) -> int:
        return self.projectors.shape[1]

    def reconstruct(self) -> np.ndarray:
        """Spectral sum ``sum_i a_i P_i``."""
        return np.einsum("i,ijk->jk", self.eigenvalues, self.projectors)


@dataclass(frozen=True)
class Observable:
    """Hermitian matrix with a cached eigendecomposition."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _finite_complex_array(self.matrix, "matrix")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
            raise ValueError("observable must be a square matrix of dimension >= 2")
        dev = np.max(np.abs(arr - arr.conj().T))
        if dev > HERMITICITY_TOL:
            raise NotHermitian(f"max |M - M^dag| = {dev:.3e} exceeds {HERMITICITY_TOL}")
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigensystem(self) -> EigenSystem:
        return eigendecompose(self)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigensystem.eigenvalues)))

    def to_json(self) -> list:
        return [[float(v.real), float(v.imag)] for v in self.matrix.ravel()]

    @classmethod
    def from_json(cls, data, dim: int | None = None) -> "Observable":
        flat = np.array([complex(re, im) for re, im in data])
        if dim is None:
            dim = round(len(flat) ** 0.5)
        if dim * dim != len(flat):
            raise ValueError("row-major matrix data has non-square length")
        return cls(flat.reshape(dim, dim))


def eigendecompose(observable: Observable | np.ndarray) -> EigenSystem:
    """Spectral decomposition with degenerate eigenvalues merged.

    Eigenvalues within ``1e-10 * (spectral_radius + 1)`` of each other share a
    single projector, so branch bookkeeping downstream never splits a
    displacement center across numerically equal eigenvalues.
    """
    if not isinstance(observable, Observable):
        observable = Observable(observable)
    vals, vecs = np.linalg.eigh(observable.matrix)
    merge_tol = eigenvalue_merge_tolerance(float(np.max(np.abs(vals))))
    groups: list[list[int]] = [[0]]
    for idx in range(1, len(vals)):
        if vals[idx] - vals[groups[-1][0]] <= merge_tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    eigenvalues = np.array([float(np.mean(vals[g])) for g in groups])
    projectors = np.stack(
        [vecs[:, g] @ vecs[:, g].conj().T for g in groups]
    ).astype(np.complex128)
    system = EigenSystem(eigenvalues, projectors)
    recon_err = np.max(np.abs(system.reconstruct() - observable.matrix))
    if recon_err > 1e-10:
        raise ValueError(f"eigendecomposition reconstruction error {recon_err:.3e}")
    return system


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _finite_complex_array(self.matrix, "matrix")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(arr - arr.conj().T)) > 1e-10:
            raise NotHermitian("density matrix is not Hermitian")
        tr = complex(np.trace(arr))
        if abs(tr - 1.0) > DENSITY_TRACE_TOL:
            raise ValueError(f"trace {tr!r} differs from 1")
        eigs = np.linalg.eigvalsh(arr)
        if np.min(eigs) < DENSITY_EIGENVALUE_FLOOR:
            raise ValueError(f"negative eigenvalue {np.min(eigs):.3e}")
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expectation_in(self, state: PureState) -> float:
        """<state| rho |state> (real by Hermiticity)."""
        v = state.amplitudes
        return float(np.real(np.vdot(v, self.matrix @ v)))

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        return cls(state.projector())


@dataclass(frozen=True)
class WeakValueResult:
    """Weak value together with the preselection overlap it divides by."""

    value: complex
    preselect_overlap: complex


def _postselection_overlap(psi: PureState, phi: PureState) -> complex:
    ov = phi.overlap(psi)
    if abs(ov) <= ORTHOGONALITY_TOL:
        raise OrthogonalPostselection(
            f"|<phi|psi>| = {abs(ov):.3e} <= {ORTHOGONALITY_TOL}; weak value undefined"
        )
    return ov


def matrix_weak_value(matrix: np.ndarray, psi: PureState, phi: PureState) -> complex:
    """Generalized weak value <phi|M|psi> / <phi|psi> for any square M."""
    m = np.asarray(matrix, dtype=np.complex128)
    if m.shape != (psi.dim, psi.dim):
        raise DimensionMismatch(f"matrix shape {m.shape} does not match dimension {psi.dim}")
    ov = _postselection_overlap(psi, phi)
    return complex(np.vdot(phi.amplitudes, m @ psi.amplitudes) / ov)


def weak_value(observable: Observable, psi: PureState, phi: PureState) -> WeakValueResult:
    """Weak value of a Hermitian observable between psi and phi."""
    ov = _postselection_overlap(psi, phi)
    val = complex(np.vdot(phi.amplitudes, observable.matrix @ psi.amplitudes) / ov)
    return WeakValueResult(value=val, preselect_overlap=ov)


def expectation(observable: Observable, psi: PureState) -> float:
    """Ordinary expectation value <psi|A|psi>, returned as a real number."""
    if observable.dim != psi.dim:
        raise DimensionMismatch("observable and state dimensions differ")
    val = complex(np.vdot(psi.amplitudes, observable.matrix @ psi.amplitudes))
    return float(val.real)


@dataclass(frozen=True)
class AnomalousPair:
    """Pre/post-selection pair engineered for an anomalous weak value.

    ``postselect_prob`` is the unperturbed success probability |<phi|psi>|^2
    (= epsilon^2); it shrinks quadratically as the anomaly grows, and the
    trade-off is reported rather than policed.
    """

    psi: PureState
    phi: PureState
    perp: PureState
    weak_value: complex
    postselect_prob: float


def _candidate_states(dim: int):
    for j in range(dim):
        vec = np.zeros(dim, dtype=np.complex128)
        vec[j] = 1.0
        yield PureState(vec)
    yield PureState.normalized(np.ones(dim, dtype=np.complex128))


def anomalous_pair(
    observable: Observable, epsilon: float, target: str = "re"
) -> AnomalousPair:
    """Construct (psi, phi) whose weak value has an anomalous Re or Im part.

    Takes psi from a fixed candidate list (computational basis states, then
    the uniform superposition), picks the component of ``A psi`` orthogonal to
    psi as ``perp`` (phase-rotated so ``<perp|A|psi> > 0``) and sets::

        phi = sqrt(1 - eps^2) * perp + eps * psi          (target 're')
        phi = -1j * sqrt(1 - eps^2) * perp + eps * psi    (target 'im')

    so that the targeted part of the weak value equals
    ``sqrt(1-eps^2)/eps * <perp|A|psi>``, positive and of order 1/eps.
    """
    if target not in ("re", "im"):
        raise ValueError("target must be 're' or 'im'")
    if not (0.0 < abs(epsilon) <= 1.0):
        raise ValueError("epsilon must satisfy 0 < |epsilon| <= 1")
    system = observable.eigensystem
    spread = float(system.eigenvalues[-1] - system.eigenvalues[0])
    if spread <= eigenvalue_merge_tolerance(observable.spectral_radius):
        raise ProportionalToIdentity("observable is proportional to the identity")

    psi = perp = None
    for candidate in _candidate_states(observable.dim):
        image = observable.matrix @ candidate.amplitudes
        residual = image - np.vdot(candidate.amplitudes, image) * candidate.amplitudes
        res_norm = np.linalg.norm(residual)
        if res_norm > 1e-8 * (observable.spectral_radius + 1.0):
            psi = candidate
            perp_vec = residual / res_norm
            coupling = complex(np.vdot(perp_vec, image))
            # rotate perp so <perp|A|psi> is real positive
            perp = PureState(perp_vec * np.exp(1j * np.angle(coupling)))
            break
    if psi is None:  # unreachable for non-scalar Hermitian A, kept as a guard
        raise ProportionalToIdentity("no non-eigenstate candidate found")

    s = np.sqrt(1.0 - epsilon * epsilon)
    perp_coeff = s if target == "re" else -1j * s
    phi = PureState.normalized(perp_coeff * perp.amplitudes + epsilon * psi.amplitudes)
    wv = weak_value(observable, psi, phi)
    return AnomalousPair(
        psi=psi,
        phi=phi,
        perp=perp,
        weak_value=wv.value,
        postselect_prob=float(abs(wv.preselect_overlap) ** 2),
    )
