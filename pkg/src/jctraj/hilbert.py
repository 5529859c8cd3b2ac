"""Composite atom (x) cavity Hilbert space, canonical states and operators.

Joint basis vectors are |s, n> with the atom level ``s`` in {g, e} and the
photon number ``n`` in 0..fock_dim-1.  The joint index is atom-major:
``index = s * fock_dim + n`` with g -> 0 and e -> 1, so a joint vector reshaped
to ``(2, fock_dim)`` gives the ground and excited field branches as rows.

Units: hbar = 1, and rates are expressed in units of the coupling g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammainc

from .errors import DimensionMismatch, InvalidParams, TruncationError

GROUND = 0
EXCITED = 1

# Untruncated Poisson weight above the top retained level that we tolerate.
COHERENT_TAIL_TOL = 1e-8


def _frozen(array, dtype=complex):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SpaceDescriptor:
    """Truncated two-level-atom (x) single-mode space."""

    fock_dim: int = 16

    def __post_init__(self):
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise InvalidParams(f"fock_dim must be an integer >= 2, got {self.fock_dim!r}")
        object.__setattr__(self, "fock_dim", int(self.fock_dim))

    @property
    def joint_dim(self) -> int:
        return 2 * self.fock_dim

    def index(self, atom: int, n: int) -> int:
        """Joint index of |atom, n>."""
        if atom not in (GROUND, EXCITED) or not 0 <= n < self.fock_dim:
            raise IndexError(f"no basis state |{atom}, {n}> in fock_dim={self.fock_dim}")
        return atom * self.fock_dim + n

    def basis(self, atom: int, n: int) -> "JointState":
        amps = np.zeros(self.joint_dim, dtype=complex)
        amps[self.index(atom, n)] = 1.0
        return JointState(amps, self)


@dataclass(frozen=True)
class JointState:
    """Pure state of the atom-cavity system.

    The amplitude array is copied and made read-only on construction so a
    state can be shared freely between workers.
    """

    amplitudes: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.shape != (self.space.joint_dim,):
            raise DimensionMismatch(
                f"amplitudes have shape {amps.shape}, expected ({self.space.joint_dim},)"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, atom, field_amplitudes, space: SpaceDescriptor) -> "JointState":
        """|atom> (x) |field> from a length-2 atom vector and a field vector."""
        atom = np.asarray(atom, dtype=complex)
        field_amplitudes = np.asarray(field_amplitudes, dtype=complex)
        if atom.shape != (2,) or field_amplitudes.shape != (space.fock_dim,):
            raise DimensionMismatch("product state factors do not match the space")
        return cls(np.kron(atom, field_amplitudes), space)

    @property
    def branches(self) -> np.ndarray:
        """Amplitudes reshaped to ``(2, fock_dim)``: rows are the g and e branches."""
        return self.amplitudes.reshape(2, self.space.fock_dim)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "JointState":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return JointState(self.amplitudes / nrm, self.space)

    def expect(self, operator: np.ndarray) -> complex:
        return complex(np.vdot(self.amplitudes, operator @ self.amplitudes))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), "joint")

    def atom_density(self) -> "DensityMatrix":
        m = self.branches
        return DensityMatrix(m @ m.conj().T, "atom")

    def field_density(self) -> "DensityMatrix":
        m = self.branches
        return DensityMatrix(m.T @ m.conj(), "field")


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix of the joint system or of one subsystem.

    ``label`` is one of ``"joint"``, ``"atom"`` or ``"field"``.
    """

    matrix: np.ndarray
    label: str = "joint"

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got shape {mat.shape}")
        if self.label not in ("joint", "atom", "field"):
            raise ValueError(f"unknown density-matrix label {self.label!r}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def violations(self, tol: float = 1e-10) -> list[str]:
        """Human-readable list of broken density-matrix invariants (empty if valid)."""
        problems = []
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > tol:
            problems.append(f"not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > tol:
            problems.append(f"trace {tr:.12g} != 1")
        lowest = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0]
        if lowest < -tol:
            problems.append(f"negative eigenvalue {lowest:.3g}")
        return problems

    def is_valid(self, tol: float = 1e-10) -> bool:
        return not self.violations(tol)


@dataclass(frozen=True)
class Operators:
    """Ladder and Pauli operators embedded in the joint space."""

    space: SpaceDescriptor
    a: np.ndarray = field(repr=False)
    adag: np.ndarray = field(repr=False)
    sigma_plus: np.ndarray = field(repr=False)
    sigma_minus: np.ndarray = field(repr=False)
    sigma_x: np.ndarray = field(repr=False)
    sigma_y: np.ndarray = field(repr=False)
    sigma_z: np.ndarray = field(repr=False)
    number: np.ndarray = field(repr=False)


def field_annihilation(fock_dim: int) -> np.ndarray:
    """Truncated annihilation operator on the field factor alone."""
    return np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), k=1).astype(complex)


@lru_cache(maxsize=32)
def build_operators(space: SpaceDescriptor) -> Operators:
    """Build a, a^dagger, sigma_+/-, the Paulis and a^dagger a on the joint space.

    Field operators act as identity on the atom and vice versa.  The result is
    cached per space; every array is read-only.
    """
    d = space.fock_dim
    a_f = field_annihilation(d)
    id_f = np.eye(d, dtype=complex)
    id_a = np.eye(2, dtype=complex)
    # sigma_+ = |e><g| with g -> 0, e -> 1
    sp_a = np.zeros((2, 2), dtype=complex)
    sp_a[EXCITED, GROUND] = 1.0
    sm_a = sp_a.T.copy()
    sz_a = np.diag([-1.0, 1.0]).astype(complex)

    a = np.kron(id_a, a_f)
    sigma_plus = np.kron(sp_a, id_f)
    sigma_minus = np.kron(sm_a, id_f)
    return Operators(
        space=space,
        a=_frozen(a),
        adag=_frozen(a.conj().T),
        sigma_plus=_frozen(sigma_plus),
        sigma_minus=_frozen(sigma_minus),
        sigma_x=_frozen(sigma_plus + sigma_minus),
        sigma_y=_frozen(-1j * (sigma_plus - sigma_minus)),
        sigma_z=_frozen(np.kron(sz_a, id_f)),
        number=_frozen(a.conj().T @ a),
    )


def coherent_tail(alpha: complex, fock_dim: int) -> float:
    """Poisson weight of the untruncated coherent state above level fock_dim-1."""
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return 0.0
    return float(gammainc(fock_dim, mean))


def coherent_state(alpha: complex, space: SpaceDescriptor) -> np.ndarray:
    """Field coherent state |alpha> truncated to ``space.fock_dim`` levels.

    Amplitudes follow exp(-|alpha|^2/2) alpha^n / sqrt(n!) and are renormalized
    after truncation.

    Raises:
        TruncationError: if the discarded Poisson tail exceeds 1e-8.
    """
    alpha = complex(alpha)
    tail = coherent_tail(alpha, space.fock_dim)
    if tail > COHERENT_TAIL_TOL:
        raise TruncationError(
            f"coherent state alpha={alpha} loses weight {tail:.3g} beyond "
            f"fock_dim={space.fock_dim}; raise fock_dim"
        )
    amps = np.empty(space.fock_dim, dtype=complex)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, space.fock_dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps / np.linalg.norm(amps)


def initial_alpha(params) -> complex:
    """Coherent amplitude 2F/(i gamma) of the initial field, or the override."""
    override = getattr(params, "alpha_override", None)
    if override is not None:
        return complex(override)
    if params.gamma <= 0:
        raise InvalidParams("gamma = 0 leaves 2F/(i gamma) undefined; supply alpha_override")
    return 2.0 * params.F / (1j * params.gamma)


def initial_state(params) -> JointState:
    """|g> (x) |2F/(i gamma)>, the steady state of the drive-damping pair at g = 0."""
    space = SpaceDescriptor(params.fock_dim)
    atom = np.zeros(2, dtype=complex)
    atom[GROUND] = 1.0
    return JointState.product(atom, coherent_state(initial_alpha(params), space), space)


def partial_trace(rho, keep: str) -> DensityMatrix:
    """Reduce a joint density matrix to the atom or the field.

    Args:
        rho: joint ``DensityMatrix`` (or a square array of even size).
        keep: ``"atom"`` or ``"field"``.
    """
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
        raise DimensionMismatch(f"cannot split a {mat.shape} matrix into atom (x) field")
    d = mat.shape[0] // 2
    blocks = mat.reshape(2, d, 2, d)
    if keep == "atom":
        return DensityMatrix(np.einsum("anbn->ab", blocks), "atom")
    if keep == "field":
        return DensityMatrix(np.einsum("anam->nm", blocks), "field")
    raise ValueError(f"keep must be 'atom' or 'field', got {keep!r}")
