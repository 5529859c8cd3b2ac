"""Deterministic trajectory ensembles and density-matrix reconstruction.

Trajectory ``i`` of an ensemble uses the seed ``trajectory_seed(base_seed, i)``,
so it is the same trajectory ``run_trajectory`` would produce for that seed.
Trajectories are processed in fixed blocks of ``BLOCK`` consecutive indices.
Each block is reduced on its own and the block sums are added strictly in
block order, so the result is the same for any number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SimParams, master_equation_series, propagate_batch, uniform_times
from .errors import TimeNotSampled, TruncationError
from .hilbert import DensityMatrix
from .observables import atom_entropies, trace_distance

BLOCK = 64


def trajectory_seed(base_seed: int, index: int) -> int:
    """64-bit seed of trajectory ``index``: numpy SeedSequence(base_seed, spawn_key=(index,))."""
    seq = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass
class _Sums:
    """Raw moments over a set of trajectories, indexed by sample time."""

    count: int
    rho: np.ndarray  # sum psi psi^dag
    rho_sq: np.ndarray  # sum |psi_i|^2 |psi_j|^2
    entropy: np.ndarray
    entropy_sq: np.ndarray
    jumps: np.ndarray
    jumps_sq: np.ndarray

    def __add__(self, other: "_Sums") -> "_Sums":
        return _Sums(
            self.count + other.count,
            self.rho + other.rho,
            self.rho_sq + other.rho_sq,
            self.entropy + other.entropy,
            self.entropy_sq + other.entropy_sq,
            self.jumps + other.jumps,
            self.jumps_sq + other.jumps_sq,
        )


def reconstruct_density(states) -> DensityMatrix:
    """(1/T) sum |phi><phi| over normalized trajectory states at one time."""
    psi = np.array([getattr(s, "amplitudes", s) for s in states], dtype=complex)
    if psi.ndim != 2 or len(psi) == 0:
        raise ValueError("need at least one state vector")
    rho = np.einsum("bi,bj->ij", psi, psi.conj()) / len(psi)
    return DensityMatrix(0.5 * (rho + rho.conj().T), "joint")


def _block_sums(params: SimParams, base_seed: int, start: int, stop: int, steps: np.ndarray) -> _Sums:
    seeds = [trajectory_seed(base_seed, i) for i in range(start, stop)]
    try:
        batch = propagate_batch(params, seeds, steps)
    except TruncationError as exc:
        # no lane index means the shared initial state failed, so the first one
        exc.trajectory = start + (exc.trajectory or 0)
        exc.args = (f"{exc.args[0]} [trajectory {exc.trajectory}]",)
        raise
    psi = batch.snapshots  # (samples, lanes, dim)
    probs = psi.real**2 + psi.imag**2
    ent = atom_entropies(psi, params.fock_dim)
    jumps = batch.counts.astype(float)
    return _Sums(
        count=stop - start,
        rho=np.einsum("tbi,tbj->tij", psi, psi.conj()),
        rho_sq=np.einsum("tbi,tbj->tij", probs, probs),
        entropy=ent.sum(axis=1),
        entropy_sq=(ent**2).sum(axis=1),
        jumps=jumps.sum(axis=1),
        jumps_sq=(jumps**2).sum(axis=1),
    )


def _block_task(args):
    return _block_sums(*args)


def _blocks(size: int, block: int):
    return [(i, min(i + block, size)) for i in range(0, size, block)]


def _standard_error(total, total_sq, n):
    if n < 2:
        return np.full(np.shape(total), np.nan)
    mean = total / n
    var = np.maximum(total_sq / n - np.abs(mean) ** 2, 0.0) * n / (n - 1)
    return np.sqrt(var / n)


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble averages at each sample time.

    ``mean_density[i]`` is the reconstructed joint density matrix at
    ``sample_times[i]``.  ``density_se`` is the largest standard error over
    the matrix entries.
    """

    params: SimParams
    size: int
    base_seed: int
    sample_times: np.ndarray
    mean_density: tuple = field(repr=False)
    mean_entropy: np.ndarray = field(repr=False)
    entropy_se: np.ndarray = field(repr=False)
    mean_jump_count: np.ndarray = field(repr=False)
    jump_count_se: np.ndarray = field(repr=False)
    density_se: np.ndarray = field(repr=False)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.sample_times - t)))
        if abs(self.sample_times[i] - t) > 0.5 * self.params.dt * (1 + 1e-9):
            raise TimeNotSampled(f"t={t} is not one of the sampled times")
        return i

    def density_at(self, t: float) -> DensityMatrix:
        return self.mean_density[self.index_of(t)]


def run_ensemble(params: SimParams, T: int, base_seed: int, sample_times=None,
                 workers: int = 1, block: int = BLOCK, _sums: list | None = None) -> EnsembleResult:
    """Run ``T`` trajectories and average them at ``sample_times``.

    Args:
        params: simulation parameters.
        T: number of trajectories.
        base_seed: non-negative seed from which every trajectory seed is derived.
        sample_times: defaults to 200 uniform times over [0, t_final].
        workers: worker processes; 1 runs in the calling process.  The result
            does not depend on this value.
        block: trajectories per reduction block.  Changing it reorders the
            floating-point reduction.

    Raises:
        TruncationError: naming the first offending trajectory index.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if sample_times is None:
        sample_times = uniform_times(params)
    steps = params.sample_steps(sample_times)
    tasks = [(params, base_seed, start, stop, steps) for start, stop in _blocks(T, block)]

    if workers <= 1 or len(tasks) == 1:
        parts = map(_block_task, tasks)
        total = _fold(parts, _sums)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            total = _fold(pool.map(_block_task, tasks), _sums)

    rho = total.rho / T
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    density_se = _standard_error(total.rho, total.rho_sq, T)
    return EnsembleResult(
        params=params,
        size=T,
        base_seed=int(base_seed),
        sample_times=params.time(steps),
        mean_density=tuple(DensityMatrix(m, "joint") for m in rho),
        mean_entropy=total.entropy / T,
        entropy_se=_standard_error(total.entropy, total.entropy_sq, T),
        mean_jump_count=total.jumps / T,
        jump_count_se=_standard_error(total.jumps, total.jumps_sq, T),
        density_se=density_se.reshape(len(steps), -1).max(axis=1),
    )


def _fold(parts, keep):
    total = None
    for part in parts:
        if keep is not None:
            keep.append(part)
        total = part if total is None else total + part
    return total


def average_entropy(result: EnsembleResult, t: float) -> float:
    """Mean trajectory entanglement entropy (bits) at a sampled time."""
    return float(result.mean_entropy[result.index_of(t)])


@dataclass(frozen=True)
class ConvergenceReport:
    times: np.ndarray
    entropy_se: np.ndarray
    jump_count_se: np.ndarray
    density_se: np.ndarray
    trace_distance: np.ndarray

    @property
    def max_standard_error(self) -> float:
        return float(np.nanmax(self.density_se))

    @property
    def max_trace_distance(self) -> float:
        return float(np.max(self.trace_distance))


def convergence_report(result: EnsembleResult, oracle=None) -> ConvergenceReport:
    """Standard errors and trace distance to the master-equation solution per sample time.

    ``oracle`` may be a precomputed sequence of joint density matrices on the
    same grid; otherwise it is integrated here.
    """
    if oracle is None:
        _, oracle = master_equation_series(result.params, result.sample_times)
    dist = np.array([trace_distance(a, b) for a, b in zip(result.mean_density, oracle)])
    return ConvergenceReport(
        times=result.sample_times,
        entropy_se=result.entropy_se,
        jump_count_se=result.jump_count_se,
        density_se=result.density_se,
        trace_distance=dist,
    )


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
