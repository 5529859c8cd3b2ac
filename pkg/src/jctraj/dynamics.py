"""Photon-counting unraveling of the driven, damped Jaynes-Cummings model.

The system Hamiltonian is ``H = g (s- a^dag + s+ a) + F (a^dag + a)`` and the
cavity leaks photons at rate ``gamma``.  Over a step ``dt`` the two Kraus
operators are ``W0 = 1 - i H_eff dt`` (no photon detected) and
``W1 = sqrt(gamma dt) a`` (one photon detected), with the non-Hermitian
``H_eff = H - i (gamma / 2) a^dag a``.  Trajectories renormalize after every
step.  ``master_equation_series`` integrates the corresponding Lindblad
equation with RK4 and is the reference the trajectory ensemble is checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernel
from .errors import InvalidParams, TraceDrift, TruncationError, ZeroNormJump
from .hilbert import (
    DensityMatrix,
    JointState,
    SpaceDescriptor,
    build_operators,
    initial_alpha,
    initial_state,
)

# dt * max(g, F, gamma) above this makes the first-order Kraus step meaningless.
MAX_RATE_STEP = 0.05
# Population allowed in the top two Fock levels before a run is rejected.
LEAK_TOL = 1e-8
# Jumps are refused from states with fewer photons than this.
MIN_PHOTONS = 1e-14
TRACE_TOL = 1e-8
# Steps of uniforms drawn per trajectory at a time.
SPAN = 8192


def default_dt(g: float, F: float, gamma: float) -> float:
    """min(1e-3/g, 1e-2/gamma, 1e-2/F) over the nonzero rates."""
    candidates = [c / r for c, r in ((1e-3, g), (1e-2, gamma), (1e-2, F)) if r > 0]
    return min(candidates) if candidates else 1e-3


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical configuration, in units where g sets the scale.

    ``dt`` is the largest step the caller accepts (``None`` picks
    ``default_dt``).  After validation it is shrunk so that ``t_final`` is an
    exact whole number of steps; the stored value is the step actually used.
    """

    g: float = 1.0
    F: float = 0.0
    gamma: float = 0.0
    fock_dim: int = 16
    dt: float | None = None
    t_final: float = math.pi
    alpha_override: complex | None = None

    def __post_init__(self):
        for name in ("g", "F", "gamma", "t_final"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParams(f"{name} must be finite and >= 0, got {value!r}")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise InvalidParams(f"fock_dim must be an integer >= 2, got {self.fock_dim!r}")
        object.__setattr__(self, "fock_dim", int(self.fock_dim))
        if self.alpha_override is not None:
            object.__setattr__(self, "alpha_override", complex(self.alpha_override))

        requested = default_dt(self.g, self.F, self.gamma) if self.dt is None else self.dt
        if not math.isfinite(requested) or requested <= 0:
            raise InvalidParams(f"dt must be > 0, got {requested!r}")
        rate = max(self.g, self.F, self.gamma)
        if requested * rate > MAX_RATE_STEP * (1 + 1e-12):
            raise InvalidParams(
                f"dt={requested:g} with max rate {rate:g} gives dt*rate="
                f"{requested * rate:g} > {MAX_RATE_STEP}"
            )
        if self.t_final > 0:
            n = math.ceil(self.t_final / requested - 1e-9)
            requested = self.t_final / n
        object.__setattr__(self, "dt", float(requested))

    @classmethod
    def driven(cls, gamma: float, **kwargs) -> "SimParams":
        """Parameters on the balanced line F = gamma / 2."""
        return cls(gamma=gamma, F=gamma / 2, **kwargs)

    @property
    def space(self) -> SpaceDescriptor:
        return SpaceDescriptor(self.fock_dim)

    @property
    def alpha(self) -> complex:
        return initial_alpha(self)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def time(self, step) -> np.ndarray | float:
        return np.asarray(step) * self.dt

    def step_index(self, t: float) -> int:
        """Nearest step on the grid k * dt; t must lie inside [0, t_final]."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(t - k * self.dt) > 0.5 * self.dt * (1 + 1e-9):
            raise ValueError(f"time {t} lies outside [0, {self.t_final}]")
        return k

    def sample_steps(self, sample_times) -> np.ndarray:
        """Sorted, de-duplicated grid steps for a collection of times."""
        return np.unique(np.array([self.step_index(t) for t in np.atleast_1d(sample_times)], dtype=np.int64))


def uniform_times(params: SimParams, count: int = 200) -> np.ndarray:
    """``count`` evenly spaced times covering [0, t_final]."""
    return np.linspace(0.0, params.t_final, count)


@dataclass(frozen=True)
class StepOutcome:
    state: JointState
    jumped: bool
    jump_probability: float


@dataclass(frozen=True)
class TrajectoryRecord:
    """One unraveled trajectory.

    ``times`` are the grid times of the stored snapshots; a jump at time t means
    the snapshot at t is already the post-jump state.  ``counts`` holds the
    cumulative photon count at each snapshot.
    """

    params: SimParams
    seed: int
    times: np.ndarray
    states: tuple
    counts: np.ndarray
    jump_times: np.ndarray = field(repr=False)

    @property
    def jump_count(self) -> int:
        return int(len(self.jump_times))


def build_hamiltonian(params: SimParams) -> np.ndarray:
    """g (s- a^dag + s+ a) + F (a^dag + a) on the joint space."""
    ops = build_operators(params.space)
    jc = ops.sigma_minus @ ops.adag + ops.sigma_plus @ ops.a
    return params.g * jc + params.F * (ops.adag + ops.a)


def build_effective_hamiltonian(params: SimParams) -> np.ndarray:
    """H - i (gamma/2) a^dag a."""
    ops = build_operators(params.space)
    return build_hamiltonian(params) - 0.5j * params.gamma * ops.number


@lru_cache(maxsize=64)
def _no_jump_operator(params: SimParams) -> np.ndarray:
    w0 = np.eye(2 * params.fock_dim, dtype=complex) - 1j * params.dt * build_effective_hamiltonian(params)
    w0.setflags(write=False)
    return w0


def _photon_number(amplitudes: np.ndarray, fock_dim: int) -> float:
    probs = np.abs(amplitudes.reshape(2, fock_dim)) ** 2
    return float(probs.sum(axis=0) @ np.arange(fock_dim))


def no_jump_step(state: JointState, params: SimParams) -> tuple[JointState, float]:
    """Apply W0 and return the unnormalized state together with dp0 = <W0^dag W0>."""
    phi = _no_jump_operator(params) @ state.amplitudes
    return JointState(phi, state.space), float(np.vdot(phi, phi).real)


def jump_step(state: JointState, params: SimParams) -> tuple[JointState, float]:
    """Apply W1 = sqrt(gamma dt) a; return the unnormalized state and dp1.

    Raises:
        ZeroNormJump: if the state holds (almost) no photons or gamma is zero.
    """
    nbar = _photon_number(state.amplitudes, state.space.fock_dim)
    if nbar < MIN_PHOTONS or params.gamma == 0:
        raise ZeroNormJump(f"cannot emit a photon from a state with <n> = {nbar:.3g} at gamma = {params.gamma}")
    ops = build_operators(state.space)
    phi = math.sqrt(params.gamma * params.dt) * (ops.a @ state.amplitudes)
    return JointState(phi, state.space), params.gamma * params.dt * nbar


def sample_step(state: JointState, params: SimParams, rng: np.random.Generator) -> StepOutcome:
    """One stochastic step: jump if a uniform draw falls below dp1."""
    u = rng.random()
    dp1 = params.gamma * params.dt * _photon_number(state.amplitudes, state.space.fock_dim)
    if u < dp1:
        phi, _ = jump_step(state, params)
        return StepOutcome(phi.normalized(), True, dp1)
    phi, _ = no_jump_step(state, params)
    return StepOutcome(phi.normalized(), False, dp1)


def _split(matrix: np.ndarray) -> tuple:
    parts = []
    for part in (matrix.real, matrix.imag):
        rows, cols = np.nonzero(part)
        parts += [rows.astype(np.int64), cols.astype(np.int64), np.ascontiguousarray(part[rows, cols])]
    return tuple(parts)


@lru_cache(maxsize=64)
def _kernel_operators(params: SimParams):
    space = params.space
    ops = build_operators(space)
    d = space.fock_dim
    top = np.array([n for s in (0, 1) for n in (s * d + d - 2, s * d + d - 1)], dtype=np.int64)
    # W1 enters only up to normalization, so the bare a is used.
    return (
        _split(_no_jump_operator(params)),
        _split(ops.a),
        np.ascontiguousarray(np.diag(ops.number).real),
        top,
    )


@dataclass
class _Batch:
    snapshots: np.ndarray  # (n_samples, lanes, joint_dim)
    counts: np.ndarray  # (n_samples, lanes)
    jump_steps: list  # per lane: grid step of the post-jump state


def propagate_batch(params: SimParams, seeds, sample_steps, until: int | None = None) -> _Batch:
    """Run one trajectory per seed and snapshot them at ``sample_steps``.

    Lane b draws its uniforms from ``numpy.random.default_rng(seeds[b])``, one
    per step in order, so its result does not depend on the other lanes.

    Raises:
        TruncationError: with ``trajectory`` set to the offending lane.
    """
    seeds = [int(s) for s in seeds]
    sample_steps = np.asarray(sample_steps, dtype=np.int64)
    lanes = len(seeds)
    until = int(sample_steps[-1]) if until is None else int(until)
    w0, w1, weights, top = _kernel_operators(params)
    psi0 = initial_state(params).amplitudes
    dim = psi0.shape[0]

    re = np.ascontiguousarray(np.repeat(psi0.real[:, None], lanes, axis=1))
    im = np.ascontiguousarray(np.repeat(psi0.imag[:, None], lanes, axis=1))
    nsamples = len(sample_steps)
    snap_re = np.zeros((nsamples, dim, lanes))
    snap_im = np.zeros((nsamples, dim, lanes))
    snap_counts = np.zeros((nsamples, lanes), dtype=np.int64)
    counts = np.zeros(lanes, dtype=np.int64)
    ptr = 0
    while ptr < nsamples and sample_steps[ptr] == 0:
        snap_re[ptr], snap_im[ptr] = re, im
        ptr += 1

    rngs = [np.random.default_rng(s) for s in seeds]
    jump_steps = [[] for _ in range(lanes)]
    jump_scale = params.gamma * params.dt
    for start in range(0, until, SPAN):
        length = min(SPAN, until - start)
        uniforms = np.empty((length, lanes))
        for b, rng in enumerate(rngs):
            uniforms[:, b] = rng.random(length)
        jumped = np.zeros((length, lanes), dtype=np.bool_)
        ptr, bad_lane, bad_step = _kernel.propagate(
            re, im, w0, w1, weights, top, LEAK_TOL, jump_scale, uniforms, start,
            sample_steps, ptr, counts, snap_re, snap_im, snap_counts, jumped,
        )
        if bad_lane != _kernel.OK:
            t = (bad_step + 1) * params.dt
            raise TruncationError(
                f"top Fock levels exceeded {LEAK_TOL:g} at t={t:.6g} (gamma={params.gamma:g}); "
                f"raise fock_dim",
                trajectory=bad_lane, time=t, gamma=params.gamma,
            )
        for k, b in zip(*np.nonzero(jumped)):
            jump_steps[b].append(start + k + 1)

    snapshots = np.transpose(snap_re + 1j * snap_im, (0, 2, 1))
    return _Batch(snapshots, snap_counts, [np.asarray(s, dtype=np.int64) for s in jump_steps])


def run_trajectory(params: SimParams, seed: int, sample_times=None) -> TrajectoryRecord:
    """Unravel a single trajectory from the initial state up to ``t_final``.

    Args:
        params: simulation parameters.
        seed: 64-bit seed of the trajectory's private generator.
        sample_times: times to snapshot (nearest grid step); defaults to every
            grid step.
    """
    if sample_times is None:
        steps = np.arange(params.n_steps + 1, dtype=np.int64)
    else:
        steps = params.sample_steps(sample_times)
    batch = propagate_batch(params, [seed], steps, until=params.n_steps)
    space = params.space
    states = tuple(JointState(v, space) for v in batch.snapshots[:, 0, :])
    return TrajectoryRecord(
        params=params,
        seed=int(seed),
        times=params.time(steps),
        states=states,
        counts=batch.counts[:, 0].copy(),
        jump_times=params.time(batch.jump_steps[0]),
    )


def no_jump_series(params: SimParams, sample_times) -> tuple[np.ndarray, tuple]:
    """Deterministic no-jump evolution sampled at ``sample_times``.

    Returns the grid times and the normalized states, obtained by applying W0
    and renormalizing at every step.
    """
    steps = params.sample_steps(sample_times)
    state = initial_state(params)
    top = _kernel_operators(params)[3]
    out = []
    k = 0
    for target in steps:
        while k < target:
            phi, dp0 = no_jump_step(state, params)
            state = JointState(phi.amplitudes / math.sqrt(dp0), state.space)
            k += 1
            if np.sum(np.abs(state.amplitudes[top]) ** 2) > LEAK_TOL:
                raise TruncationError(
                    f"top Fock levels exceeded {LEAK_TOL:g} at t={k * params.dt:.6g}",
                    time=k * params.dt, gamma=params.gamma,
                )
        out.append(state)
    return params.time(steps), tuple(out)


def no_jump_trajectory(params: SimParams, t: float) -> JointState:
    """Normalized state after (W0)^n from the initial state, n = t / dt."""
    return no_jump_series(params, [t])[1][0]


@lru_cache(maxsize=32)
def _rk4_series(params: SimParams, steps: tuple) -> tuple:
    ops = build_operators(params.space)
    k_op = -1j * build_effective_hamiltonian(params)
    k_dag = k_op.conj().T
    a, adag, gamma, dt = ops.a, ops.adag, params.gamma, params.dt
    d = params.fock_dim
    top = np.array([d - 2, d - 1, 2 * d - 2, 2 * d - 1])

    def rhs(rho):
        return k_op @ rho + rho @ k_dag + gamma * (a @ rho @ adag)

    psi = initial_state(params).amplitudes
    rho = np.outer(psi, psi.conj())
    out = []
    k = 0
    for target in steps:
        while k < target:
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * dt * k1)
            k3 = rhs(rho + 0.5 * dt * k2)
            k4 = rhs(rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            k += 1
            if rho[top, top].real.sum() > LEAK_TOL:
                raise TruncationError(
                    f"top Fock levels exceeded {LEAK_TOL:g} at t={k * dt:.6g}",
                    time=k * dt, gamma=gamma,
                )
        drift = abs(np.trace(rho) - 1.0)
        if drift > TRACE_TOL:
            raise TraceDrift(f"|tr rho - 1| = {drift:.3g} at t={k * dt:.6g}")
        out.append(DensityMatrix(rho, "joint"))
    return tuple(out)


def master_equation_series(params: SimParams, sample_times) -> tuple[np.ndarray, tuple]:
    """RK4 solution of the Lindblad equation at the grid steps nearest ``sample_times``.

    Uses the same step ``params.dt`` as the trajectories.  Results are cached
    per (params, grid).
    """
    steps = params.sample_steps(sample_times)
    return params.time(steps), _rk4_series(params, tuple(int(s) for s in steps))


def master_equation_evolve(params: SimParams, t: float) -> DensityMatrix:
    """Joint density matrix at time t from the RK4 reference integrator."""
    return master_equation_series(params, [t])[1][0]
