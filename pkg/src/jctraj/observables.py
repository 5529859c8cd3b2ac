"""Physical quantities extracted from states, density matrices and trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SimParams, jump_step, no_jump_trajectory, uniform_times
from .errors import DimensionMismatch
from .hilbert import DensityMatrix, JointState, SpaceDescriptor, coherent_state, partial_trace


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class LeapAnalysis:
    """Entropy leap of one detected photon and the leaked information E_L = O * dE."""

    gamma: float
    t_star: float
    entropy_before: float
    entropy_after: float
    delta_e: float
    mean_jump_count: float
    e_leak: float
    jump_count_se: float = float("nan")


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def purity(rho) -> float:
    """tr(rho^2)."""
    m = _matrix(rho)
    # tr(rho rho) = sum_ij rho_ij rho_ji = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(m) ** 2))


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of rho - sigma."""
    diff = _matrix(rho) - _matrix(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def coherent_fidelity(rho_f, alpha: complex) -> float:
    """<alpha| rho_f |alpha> with the truncated, renormalized coherent vector."""
    m = _matrix(rho_f)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise DimensionMismatch(f"field density matrix has shape {m.shape}")
    c = coherent_state(alpha, SpaceDescriptor(m.shape[0]))
    return float(np.vdot(c, m @ c).real)


def bloch_vector(rho_s) -> BlochVector:
    """(<sigma_x>, <sigma_y>, <sigma_z>) of a 2x2 atom density matrix in the (g, e) basis."""
    m = _matrix(rho_s)
    if m.shape != (2, 2):
        raise DimensionMismatch(f"atom density matrix must be 2x2, got {m.shape}")
    coherence = m[1, 0]  # <e|rho|g>
    return BlochVector(
        x=float(2.0 * coherence.real),
        y=float(2.0 * coherence.imag),
        z=float((m[1, 1] - m[0, 0]).real),
    )


def binary_entropy_bits(lam) -> np.ndarray:
    """-lam log2 lam - (1-lam) log2 (1-lam), with 0 log 0 = 0; lam is clamped to [0, 1]."""
    lam = np.clip(np.asarray(lam, dtype=float), 0.0, 1.0)
    out = np.zeros_like(lam)
    for p in (lam, 1.0 - lam):
        mask = p > 0
        out[mask] -= p[mask] * np.log2(p[mask])
    return out


def atom_entropies(amplitudes: np.ndarray, fock_dim: int) -> np.ndarray:
    """Entanglement entropies (bits) of a stack of normalized joint vectors.

    ``amplitudes`` has shape ``(..., 2 * fock_dim)``.  The atom reduced matrix
    of each vector is 2x2 with unit trace, so its eigenvalues follow from the
    population difference and the coherence in closed form.
    """
    amps = np.asarray(amplitudes).reshape(*np.shape(amplitudes)[:-1], 2, fock_dim)
    pg = np.sum(np.abs(amps[..., 0, :]) ** 2, axis=-1)
    pe = np.sum(np.abs(amps[..., 1, :]) ** 2, axis=-1)
    coh = np.sum(amps[..., 1, :] * amps[..., 0, :].conj(), axis=-1)
    total = pg + pe
    radius = np.sqrt((pe - pg) ** 2 + 4.0 * np.abs(coh) ** 2) / total
    return binary_entropy_bits(0.5 * (1.0 - radius))


def entanglement_entropy(state: JointState) -> float:
    """von Neumann entropy in bits of the atom reduced state of a pure joint state."""
    return float(atom_entropies(state.amplitudes, state.space.fock_dim))


def jump_count(record, t: float) -> int:
    """Photons detected along ``record`` up to and including time t."""
    return int(np.searchsorted(record.jump_times, t + 1e-12 * max(1.0, abs(t)), side="right"))


def average_jump_count(records, t: float) -> float:
    """Mean of ``jump_count`` over a collection of trajectory records."""
    records = list(records)
    return float(np.mean([jump_count(r, t) for r in records]))


def joint_summary(rho, alpha: complex) -> dict:
    """Global, atom and field purities, coherent fidelity and Bloch vector of a joint rho."""
    rho_s = partial_trace(rho, "atom")
    rho_f = partial_trace(rho, "field")
    b = bloch_vector(rho_s)
    return {
        "delta": purity(rho),
        "delta_s": purity(rho_s),
        "delta_f": purity(rho_f),
        "F_c": coherent_fidelity(rho_f, alpha),
        "x": b.x,
        "y": b.y,
        "z": b.z,
    }


def entanglement_leap(params: SimParams, t_star: float) -> tuple[float, float, float]:
    """Entropy just before and just after a single photon detected at ``t_star``.

    The pre-jump state is the no-jump evolution up to ``t_star``; the jump
    applies ``a`` and renormalizes.  The step grid is refined so that
    ``t_star`` falls exactly on it.

    Returns:
        ``(entropy_before, entropy_after, |after - before|)`` in bits.
    """
    if not 0 < t_star <= params.t_final * (1 + 1e-12):
        raise ValueError(f"t_star must lie in (0, {params.t_final}], got {t_star}")
    local = _retimed(params, t_star)
    before = no_jump_trajectory(local, t_star)
    after, _ = jump_step(before, local)
    e0 = entanglement_entropy(before)
    e1 = entanglement_entropy(after.normalized())
    return e0, e1, abs(e1 - e0)


def _retimed(params: SimParams, t_final: float) -> SimParams:
    from dataclasses import replace

    return replace(params, t_final=t_final)


def leaked_information(params: SimParams, t_star: float, ensemble_size: int, seed: int,
                       workers: int = 1) -> LeapAnalysis:
    """Combine the entropy leap at ``t_star`` with the mean photon count up to ``t_star``.

    The mean count comes from an ensemble of ``ensemble_size`` trajectories
    run to ``t_star``.
    """
    from .ensemble import run_ensemble

    if ensemble_size < 100:
        raise ValueError(f"ensemble_size must be >= 100, got {ensemble_size}")
    e0, e1, de = entanglement_leap(params, t_star)
    local = _retimed(params, t_star)
    result = run_ensemble(local, ensemble_size, seed, [0.0, t_star], workers=workers)
    mean_count = float(result.mean_jump_count[-1])
    return LeapAnalysis(
        gamma=params.gamma,
        t_star=t_star,
        entropy_before=e0,
        entropy_after=e1,
        delta_e=de,
        mean_jump_count=mean_count,
        e_leak=mean_count * de,
        jump_count_se=float(result.jump_count_se[-1]),
    )


__all__ = [
    "BlochVector",
    "LeapAnalysis",
    "atom_entropies",
    "average_jump_count",
    "binary_entropy_bits",
    "bloch_vector",
    "coherent_fidelity",
    "entanglement_entropy",
    "entanglement_leap",
    "joint_summary",
    "jump_count",
    "leaked_information",
    "purity",
    "trace_distance",
    "uniform_times",
]
