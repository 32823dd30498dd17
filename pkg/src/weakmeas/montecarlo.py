"""Per-run stochastic simulation of the measurement protocols.

Every protocol is simulated run by run, in the physical order: draw the meter
outcome, collapse the system to the outcome-conditioned state, then decide
post-selection with a Bernoulli draw on that (possibly disturbed) state. This
mirrors how the disturbance enters a laboratory experiment; nothing is drawn
from the final conditional distribution directly.

Meter outcomes are mixtures of unit-variance Gaussians, so a draw is an
eigenbranch choice (categorical in the branch weights) plus a standard normal
(exact; no grid). The grid-based inverse-CDF sampler in
:mod:`weakmeas.pointer` remains the tool for sampling coherent interference
densities.

Reproducibility contract: trials are generated in fixed blocks of
``BLOCK_SIZE``; block b uses the generator ``stream_rng(seed, b)`` and a fixed
draw order. Results therefore depend only on (plan, seed) and are identical
for any thread count; threads only spread blocks over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Observable, PureState
from .errors import DimensionMismatch, NoPostselectedRuns, OrthogonalPostselection
from .pointer import gaussian_density, gaussian_upper_tail, stream_rng

BLOCK_SIZE = 65536

PROTOCOLS = ("single", "kick", "sequential", "threshold")


@dataclass(frozen=True)
class TrialPlan:
    """What to simulate, how often, and with which seed."""

    protocol: str
    observable: Observable
    coupling: float
    preselect: PureState
    postselect: PureState | None
    trials: int
    seed: int
    second_observable: Observable | None = None
    second_coupling: float = 0.0
    threshold_multiple: float = 100.0
    threads: int = 1

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.observable.dim != self.preselect.dim:
            raise DimensionMismatch("observable and preselect dimensions differ")
        if self.protocol == "threshold":
            if self.postselect is not None:
                raise ValueError("threshold protocol uses no system post-selection")
        else:
            if self.postselect is None:
                raise ValueError(f"{self.protocol} protocol requires a postselect state")
            ov = self.postselect.overlap(self.preselect)
            if abs(ov) <= 1e-10:
                raise OrthogonalPostselection("pre- and post-selected states are orthogonal")
        if self.protocol == "sequential" and self.second_observable is None:
            raise ValueError("sequential protocol requires a second observable")


@dataclass(frozen=True)
class ExperimentRecord:
    """One run: meter outcome(s) and whether post-selection succeeded."""

    x: float
    postselected: bool
    x2: float | None = None


@dataclass(frozen=True)
class TrialStatistics:
    """Aggregates over the post-selected runs of one plan."""

    n_total: int
    n_postselected: int
    postselection_rate: float
    conditional_means: tuple[float, ...]
    standard_errors: tuple[float, ...]
    cross_covariance: float | None = None
    cross_covariance_se: float | None = None

    def __post_init__(self):
        if self.n_postselected > self.n_total:
            raise ValueError("n_postselected exceeds n_total")


def iter_records(records: np.ndarray):
    """View a structured record array as ExperimentRecord objects."""
    two = "x2" in (records.dtype.names or ())
    for row in records:
        yield ExperimentRecord(
            x=float(row["x"]),
            postselected=bool(row["postselected"]),
            x2=float(row["x2"]) if two else None,
        )


def _eigen_arrays(observable: Observable, psi_vec: np.ndarray):
    system = observable.eigensystem
    comps = np.stack([p @ psi_vec for p in system.projectors])
    probs = np.array([float(np.vdot(c, c).real) for c in comps])
    return system.eigenvalues, comps, probs


def _categorical(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, u, side="right").clip(0, len(probs) - 1)


def _row_categorical(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Per-row categorical draw: probs has shape (n, k), u shape (n,)."""
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1][:, None]
    return (u[:, None] > cdf).sum(axis=1).clip(0, probs.shape[1] - 1)


def _run_blocks(plan: TrialPlan, block_fn):
    """Generate fixed-size blocks with per-block derived generators."""
    n_blocks = (plan.trials + BLOCK_SIZE - 1) // BLOCK_SIZE
    sizes = [
        BLOCK_SIZE if (b + 1) * BLOCK_SIZE <= plan.trials else plan.trials - b * BLOCK_SIZE
        for b in range(n_blocks)
    ]

    def one(b: int):
        return block_fn(stream_rng(plan.seed, b), sizes[b])

    if plan.threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            parts = list(pool.map(one, range(n_blocks)))
    else:
        parts = [one(b) for b in range(n_blocks)]
    return np.concatenate(parts)


_DTYPE_ONE = np.dtype([("x", "f8"), ("postselected", "?")])
_DTYPE_TWO = np.dtype([("x", "f8"), ("x2", "f8"), ("postselected", "?")])


def _mean_and_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, float("nan")
    return mean, float(values.std(ddof=1) / math.sqrt(n))


def _basic_stats(records: np.ndarray) -> TrialStatistics:
    kept = records[records["postselected"]]
    if kept.size == 0:
        raise NoPostselectedRuns("no post-selected runs; statistics undefined")
    mean, se = _mean_and_se(kept["x"])
    return TrialStatistics(
        n_total=int(records.size),
        n_postselected=int(kept.size),
        postselection_rate=float(kept.size / records.size),
        conditional_means=(mean,),
        standard_errors=(se,),
    )


def run_single(plan: TrialPlan):
    """Weak von Neumann measurement followed by projective post-selection.

    Per trial: draw x from the unconditional outcome mixture, form the
    conditional system state, and accept with |<phi|chi_x>|^2.
    """
    eigenvalues, comps, probs = _eigen_arrays(plan.observable, plan.preselect.amplitudes)
    w_phi = comps @ np.conj(plan.postselect.amplitudes)  # <phi|P_i|psi>
    lam = plan.coupling

    def block(rng: np.random.Generator, n: int) -> np.ndarray:
        u_branch = rng.random(n)
        z = rng.standard_normal(n)
        u_accept = rng.random(n)
        branch = _categorical(u_branch, probs)
        x = lam * eigenvalues[branch] + z
        g = gaussian_density(x[:, None] - lam * eigenvalues)
        amp = np.sqrt(g) @ w_phi
        p_x = g @ probs
        p_acc = (amp.real**2 + amp.imag**2) / p_x
        out = np.empty(n, dtype=_DTYPE_ONE)
        out["x"] = x
        out["postselected"] = u_accept < p_acc
        return out

    records = _run_blocks(plan, block)
    return records, _basic_stats(records)


def run_kick(plan: TrialPlan):
    """Random unitary kick exp(-i lam A x'/2) with x' drawn up front.

    The recorded outcome is the pre-drawn x'; it is never modified, only
    selected on, yet its conditional distribution shifts by lam * Im(A_w).
    """
    eigenvalues, comps, _ = _eigen_arrays(plan.observable, plan.preselect.amplitudes)
    w_phi = comps @ np.conj(plan.postselect.amplitudes)
    lam = plan.coupling

    def block(rng: np.random.Generator, n: int) -> np.ndarray:
        xp = rng.standard_normal(n)
        u_accept = rng.random(n)
        phases = np.exp(-0.5j * lam * np.outer(xp, eigenvalues))
        amp = phases @ w_phi
        p_acc = amp.real**2 + amp.imag**2
        out = np.empty(n, dtype=_DTYPE_ONE)
        out["x"] = xp
        out["postselected"] = u_accept < p_acc
        return out

    records = _run_blocks(plan, block)
    return records, _basic_stats(records)


def run_sequential(plan: TrialPlan):
    """Two weak measurements in sequence, then post-selection.

    x1 is drawn from the first outcome mixture, the system collapses, x2 is
    drawn from the second mixture of the collapsed state, the system
    collapses again, and post-selection is decided on the twice-disturbed
    state. Cross covariance comes with a delete-one jackknife error.
    """
    a_vals, comps_a, probs_a = _eigen_arrays(plan.observable, plan.preselect.amplitudes)
    second = plan.second_observable
    b_system = second.eigensystem
    b_vals = b_system.eigenvalues
    b_projs = b_system.projectors
    lam1, lam2 = plan.coupling, plan.second_coupling
    phi = np.conj(plan.postselect.amplitudes)

    def block(rng: np.random.Generator, n: int) -> np.ndarray:
        u1 = rng.random(n)
        z1 = rng.standard_normal(n)
        u2 = rng.random(n)
        z2 = rng.standard_normal(n)
        u3 = rng.random(n)

        branch1 = _categorical(u1, probs_a)
        x1 = lam1 * a_vals[branch1] + z1
        g1 = gaussian_density(x1[:, None] - lam1 * a_vals)
        chi1 = np.sqrt(g1) @ comps_a  # (n, d), unnormalized
        chi1 /= np.linalg.norm(chi1, axis=1)[:, None]

        proj_images = np.stack([chi1 @ p.T for p in b_projs])  # (k2, n, d)
        q = np.real(np.einsum("jnd,jnd->nj", np.conj(proj_images), proj_images))
        branch2 = _row_categorical(u2, q)
        x2 = lam2 * b_vals[branch2] + z2
        g2 = gaussian_density(x2[:, None] - lam2 * b_vals)
        chi2 = np.einsum("nj,jnd->nd", np.sqrt(g2), proj_images)
        p2 = np.einsum("nj,nj->n", g2, q)

        amp = chi2 @ phi
        p_acc = (amp.real**2 + amp.imag**2) / p2
        out = np.empty(n, dtype=_DTYPE_TWO)
        out["x"] = x1
        out["x2"] = x2
        out["postselected"] = u3 < p_acc
        return out

    records = _run_blocks(plan, block)
    kept = records[records["postselected"]]
    if kept.size == 0:
        raise NoPostselectedRuns("no post-selected runs; statistics undefined")
    mean1, se1 = _mean_and_se(kept["x"])
    mean2, se2 = _mean_and_se(kept["x2"])
    cov, cov_se = _covariance_with_jackknife(kept["x"], kept["x2"])
    stats = TrialStatistics(
        n_total=int(records.size),
        n_postselected=int(kept.size),
        postselection_rate=float(kept.size / records.size),
        conditional_means=(mean1, mean2),
        standard_errors=(se1, se2),
        cross_covariance=cov,
        cross_covariance_se=cov_se,
    )
    return records, stats


def _covariance_with_jackknife(x1: np.ndarray, x2: np.ndarray) -> tuple[float, float]:
    n = x1.size
    if n < 3:
        cov = float(np.cov(x1, x2, ddof=1)[0, 1]) if n == 2 else 0.0
        return cov, float("nan")
    s1, s2, s12 = x1.sum(), x2.sum(), (x1 * x2).sum()
    cov = float((s12 - s1 * s2 / n) / (n - 1))
    loo = (s12 - x1 * x2 - (s1 - x1) * (s2 - x2) / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return cov, float(se)


def run_threshold(plan: TrialPlan):
    """Cherry-picking experiment: keep runs with x >= threshold_multiple * lam.

    No system post-selection happens; the selection acts on the meter record
    alone, yet the kept-run mean exceeds the full-ensemble mean by order one.
    """
    eigenvalues, _, probs = _eigen_arrays(plan.observable, plan.preselect.amplitudes)
    lam = plan.coupling
    threshold = plan.threshold_multiple * lam

    def block(rng: np.random.Generator, n: int) -> np.ndarray:
        u_branch = rng.random(n)
        z = rng.standard_normal(n)
        branch = _categorical(u_branch, probs)
        x = lam * eigenvalues[branch] + z
        out = np.empty(n, dtype=_DTYPE_ONE)
        out["x"] = x
        out["postselected"] = x >= threshold
        return out

    records = _run_blocks(plan, block)
    return records, _basic_stats(records)


def truncated_mean_prediction(
    observable: Observable, coupling: float, psi: PureState, threshold: float
) -> float:
    """Exact E[x | x >= threshold] of the unconditional outcome mixture."""
    system = observable.eigensystem
    probs = np.array(
        [float(np.linalg.norm(p @ psi.amplitudes) ** 2) for p in system.projectors]
    )
    mus = coupling * system.eigenvalues
    tails = np.array([gaussian_upper_tail(threshold - mu) for mu in mus])
    numer = float((probs * (gaussian_density(threshold - mus) + mus * tails)).sum())
    denom = float((probs * tails).sum())
    if denom <= 0.0:
        raise NoPostselectedRuns("threshold leaves zero probability mass")
    return numer / denom


RUNNERS = {
    "single": run_single,
    "kick": run_kick,
    "sequential": run_sequential,
    "threshold": run_threshold,
}


def run_plan(plan: TrialPlan):
    """Dispatch to the protocol runner; returns (records, statistics)."""
    return RUNNERS[plan.protocol](plan)
