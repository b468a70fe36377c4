"""Dense complex linear algebra and quantum state construction.

Operators are plain square complex ``numpy`` arrays. States are wrapped in
:class:`DensityMatrix`, which validates once at construction and is read-only
afterwards.
"""

from __future__ import annotations

import hashlib
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ValidationError

MAX_DIM = 4096
HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
PSD_TOL = 1e-9  # scaled by dim


def check_capacity(dim: int, max_dim: int | None = None) -> None:
    cap = MAX_DIM if max_dim is None else max_dim
    if dim > cap:
        raise CapacityError(f"dimension {dim} exceeds cap {cap}")


def as_operator(a, hermitian: bool = False) -> np.ndarray:
    """Coerce ``a`` to a square, finite, read-only complex matrix.

    With ``hermitian=True`` a deviation of at most ``HERMITIAN_TOL`` from
    ``a.conj().T`` is absorbed by symmetrizing; anything larger is rejected.
    """
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"operator must be a nonempty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("operator has non-finite entries")
    if hermitian:
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise ValidationError(f"operator is not Hermitian (max deviation {dev:.3g})")
        m = (m + m.conj().T) / 2
    m.setflags(write=False)
    return m


def tensor(*ops: np.ndarray, max_dim: int | None = None) -> np.ndarray:
    """Kronecker product of one or more operators (or vectors)."""
    if not ops:
        raise ValidationError("tensor needs at least one operand")
    dim = int(np.prod([np.shape(o)[0] for o in ops]))
    check_capacity(dim, max_dim)
    return reduce(np.kron, ops)


def walsh_hadamard(num_qubits: int, max_dim: int | None = None) -> np.ndarray:
    """The ``num_qubits``-fold tensor power of the Hadamard gate."""
    if num_qubits < 1:
        raise ValidationError("num_qubits must be positive")
    check_capacity(2**num_qubits, max_dim)
    # Sylvester construction: entry (i, j) is (-1)^{popcount(i & j)} / sqrt(2^n).
    n = 2**num_qubits
    idx = np.arange(n)
    parity = np.zeros((n, n), dtype=np.int64)
    anded = idx[:, None] & idx[None, :]
    for b in range(num_qubits):
        parity ^= (anded >> b) & 1
    return (1.0 - 2.0 * parity).astype(complex) / np.sqrt(n)


class DensityMatrix:
    """A validated, immutable mixed state.

    Parameters
    ----------
    matrix : array_like
        Square complex matrix. Must be Hermitian (up to round-off), have unit
        trace within ``1e-9`` and no eigenvalue below ``-1e-9 * dim``.
    registers : sequence of int, optional
        Per-register qubit counts, informational only.
    """

    def __init__(self, matrix, registers: Sequence[int] | None = None):
        m = as_operator(matrix, hermitian=True)
        dim = m.shape[0]
        check_capacity(dim)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"trace is {tr!r}, expected 1")
        lam_min = np.linalg.eigvalsh(m)[0]
        if lam_min < -PSD_TOL * dim:
            raise ValidationError(f"state is not positive semidefinite (min eigenvalue {lam_min:.3g})")
        if registers is not None:
            registers = tuple(int(r) for r in registers)
            if 2 ** sum(registers) != dim:
                raise ValidationError(f"register qubit counts {registers} do not match dim {dim}")
        self.matrix = m
        self.registers = registers

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.matrix.tobytes()).hexdigest()

    def max_distance(self, other: DensityMatrix) -> float:
        if other.dim != self.dim:
            raise ValidationError("dimension mismatch")
        return float(np.max(np.abs(self.matrix - other.matrix)))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def pure_state_density(amplitudes) -> DensityMatrix:
    psi = np.asarray(amplitudes, dtype=complex).ravel()
    if psi.size == 0 or not np.all(np.isfinite(psi)):
        raise ValidationError("amplitudes must be a nonempty finite vector")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(f"amplitude vector has norm {norm!r}, expected 1")
    check_capacity(psi.size)
    return DensityMatrix(np.outer(psi, psi.conj()))


def computational_basis_density(num_qubits: int, bits: str) -> DensityMatrix:
    if num_qubits < 1 or len(bits) != num_qubits or set(bits) - {"0", "1"}:
        raise ValidationError(f"bits {bits!r} is not a bitstring of length {num_qubits}")
    dim = 2**num_qubits
    check_capacity(dim)
    m = np.zeros((dim, dim), dtype=complex)
    i = int(bits, 2)
    m[i, i] = 1.0
    return DensityMatrix(m, registers=[num_qubits])


def maximally_mixed(dim: int) -> DensityMatrix:
    check_capacity(dim)
    return DensityMatrix(np.eye(dim) / dim)


def ginibre(dim: int, rng: np.random.Generator, cols: int | None = None) -> np.ndarray:
    """Matrix with i.i.d. standard complex Gaussian entries."""
    cols = dim if cols is None else cols
    return (rng.standard_normal((dim, cols)) + 1j * rng.standard_normal((dim, cols))) / np.sqrt(2)


def random_density_matrix(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Hilbert-Schmidt random state ``G G^dagger / Tr(G G^dagger)``."""
    if dim < 1:
        raise ValidationError("dim must be positive")
    check_capacity(dim)
    g = ginibre(dim, rng)
    w = g @ g.conj().T
    return DensityMatrix(w / np.trace(w).real)


class ProductState:
    """Ordered tuple of per-register density matrices.

    The joint state is only built on request, via :meth:`joint`.
    """

    __slots__ = ("registers",)

    def __init__(self, registers: Iterable[DensityMatrix]):
        regs = tuple(registers)
        if not regs:
            raise ValidationError("a product state needs at least one register")
        for r in regs:
            if not isinstance(r, DensityMatrix):
                raise ValidationError(f"register is not a DensityMatrix: {type(r).__name__}")
        self.registers = regs

    def __len__(self):
        return len(self.registers)

    def __getitem__(self, j):
        return self.registers[j]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    def joint(self, max_dim: int | None = None) -> DensityMatrix:
        check_capacity(self.total_dim, max_dim)
        return DensityMatrix(tensor(*(r.matrix for r in self.registers), max_dim=max_dim))

    def __repr__(self):
        return f"ProductState(dims={self.dims})"
