"""Shared helpers: Pauli matrices and seeded random setups.

Random observables are normalized to unit spectral radius and random
pre/post-selection pairs are resampled until |<phi|psi>| >= 0.25, keeping
weak values O(1) and post-selection well conditioned.
"""

import numpy as np
import pytest

from weakmeas.core import Observable, PureState

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_state(rng: np.random.Generator, dim: int) -> PureState:
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.normalized(vec)


def random_observable(rng: np.random.Generator, dim: int) -> Observable:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (m + m.conj().T) / 2.0
    radius = float(np.max(np.abs(np.linalg.eigvalsh(h))))
    return Observable(h / radius)


def random_selection_pair(
    rng: np.random.Generator, dim: int, min_overlap: float = 0.25
) -> tuple[PureState, PureState]:
    while True:
        psi, phi = random_state(rng, dim), random_state(rng, dim)
        if abs(phi.overlap(psi)) >= min_overlap:
            return psi, phi


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
