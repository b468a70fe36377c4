"""Parity learning from quantum examples, with statistical or private access.

Bitstrings are indexed left to right: ``s[0]`` is the most significant bit of
the integer encoding. The example state lives on ``d + 1`` qubits with the
label qubit last, so ``|x, b>`` has index ``2 x + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .core import DensityMatrix, ProductState, check_capacity, pure_state_density, walsh_hadamard
from .errors import InsufficientCopies, ValidationError
from .measurement import Povm
from .oracles import QldpOracle, QsqOracle
from .protocols import (
    QsqQuery,
    QsqQueryPlan,
    alpha_for_budget,
    answer_plan,
    plan_copies,
    triviality_bound,
)

DECODE_THRESHOLD = 0.25


def _bits(x: np.ndarray | int, d: int) -> np.ndarray:
    """Bit matrix of shape (..., d), most significant bit first."""
    return (np.asarray(x)[..., None] >> np.arange(d - 1, -1, -1)) & 1


@dataclass(frozen=True)
class ParityConcept:
    """The concept ``c(x) = s . x mod 2``."""

    d: int
    s: str

    def __post_init__(self):
        if self.d < 1 or len(self.s) != self.d or set(self.s) - {"0", "1"}:
            raise ValidationError(f"{self.s!r} is not a bitstring of length {self.d}")

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> ParityConcept:
        return cls(d, "".join(str(b) for b in rng.integers(0, 2, size=d)))

    @property
    def vector(self) -> np.ndarray:
        return np.array([int(c) for c in self.s], dtype=np.int64)

    def __call__(self, x):
        """Evaluate on integer-encoded inputs (scalar or array)."""
        return (_bits(x, self.d) @ self.vector) % 2


@dataclass(frozen=True)
class ExampleDistribution:
    d: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.d < 1 or w.shape != (2**self.d,):
            raise ValidationError(f"need {2 ** self.d} weights for d={self.d}")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or abs(w.sum() - 1) > 1e-9:
            raise ValidationError("weights must be a probability vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, d: int) -> ExampleDistribution:
        return cls(d, np.full(2**d, 2.0**-d))

    @classmethod
    def point_mass(cls, d: int, x0: int) -> ExampleDistribution:
        w = np.zeros(2**d)
        w[x0] = 1.0
        return cls(d, w)


def quantum_example_state(c: ParityConcept, x: ExampleDistribution) -> DensityMatrix:
    """Pure state of ``sum_x sqrt(X(x)) |x, c(x)>``."""
    if c.d != x.d:
        raise ValidationError(f"concept has d={c.d}, distribution has d={x.d}")
    check_capacity(2 ** (c.d + 1))
    xs = np.arange(2**c.d)
    psi = np.zeros(2 ** (c.d + 1), dtype=complex)
    psi[2 * xs + c(xs)] = np.sqrt(x.weights)
    return DensityMatrix(pure_state_density(psi).matrix, registers=[c.d + 1])


@lru_cache(maxsize=256)
def parity_bit_povm(d: int, i: int) -> Povm:
    """Binary measurement whose expectation on the uniform parity example is ``s_i / 2``.

    After the Hadamard transform the example becomes ``(|0..0, 0> + |s, 1>) /
    sqrt(2)``; the effect projects onto "label qubit 1 and bit ``i`` set" in
    that basis. Labels are ``(0, 1)``.
    """
    if d < 1:
        raise ValidationError("d must be positive")
    if not 0 <= i < d:
        raise ValidationError(f"bit index {i} out of range for d={d}")
    h = walsh_hadamard(d + 1)
    xs = np.arange(2**d)
    diag = np.zeros(2 ** (d + 1))
    diag[2 * xs + 1] = _bits(xs, d)[:, i]
    m = (h * diag) @ h
    m = (m + m.conj().T) / 2
    return Povm([np.eye(2 ** (d + 1)) - m, m], labels=(0.0, 1.0))


def _check_tau(tau: float) -> None:
    if not 0 < tau < DECODE_THRESHOLD:
        raise ValidationError(f"tau must lie in (0, 1/4), got {tau!r}")


def parity_plan(d: int, tau: float) -> QsqQueryPlan:
    return QsqQueryPlan(tuple(QsqQuery(parity_bit_povm(d, i), tau) for i in range(d)))


def decode_bits(d: int, answers) -> ParityConcept:
    return ParityConcept(d, "".join("1" if a > DECODE_THRESHOLD else "0" for a in answers))


def learn_parity_qsq(oracle: QsqOracle, d: int, tau: float) -> ParityConcept:
    """Recover ``s`` with ``d`` nonadaptive queries of tolerance ``tau < 1/4``.

    Each answer is within ``tau`` of ``s_i / 2``, which is 0 or 1/2, so
    thresholding at 1/4 decodes every bit correctly under any noise.
    """
    _check_tau(tau)
    plan = parity_plan(d, tau)
    return decode_bits(d, [oracle.query(q.povm, q.tau) for q in plan.queries])


@dataclass(frozen=True)
class ParityQldpResult:
    concept: ParityConcept
    alpha: float
    copies_per_bit: list[int]
    estimates: list[float]
    oracle: QldpOracle

    @property
    def copies_consumed(self) -> int:
        return sum(self.copies_per_bit)

    def to_dict(self) -> dict:
        return {
            "s": self.concept.s,
            "alpha": self.alpha,
            "copies_per_bit": self.copies_per_bit,
            "copies_consumed": self.copies_consumed,
            "estimates": self.estimates,
            "qldp_queries": int(self.oracle.charges.sum()),
            "ledger": self.oracle.ledger_snapshot(),
        }


def parity_copies_needed(d: int, epsilon: float, beta: float, tau: float) -> int:
    _check_tau(tau)
    return sum(plan_copies(parity_plan(d, tau), alpha_for_budget(epsilon, 2), beta))


def learn_parity_qldp(
    copies: ProductState | Iterable[DensityMatrix],
    d: int,
    epsilon: float,
    beta: float,
    tau: float,
    rng: np.random.Generator,
) -> ParityQldpResult:
    """Learn a parity from single-copy measurements that are each ``epsilon``-trivial.

    The ``d`` bit queries of :func:`learn_parity_qsq` are answered with
    privatized measurements on disjoint copies, ``alpha`` chosen so that the
    privatized binary measurements are exactly ``epsilon``-trivial at worst.
    Every copy is measured at most once.
    """
    _check_tau(tau)
    alpha = alpha_for_budget(epsilon, 2)
    plan = parity_plan(d, tau)
    per_bit = plan_copies(plan, alpha, beta)
    oracle = QldpOracle(copies, epsilon, rng)
    if len(oracle) < sum(per_bit):
        raise InsufficientCopies(f"have {len(oracle)} copies, need {sum(per_bit)}")
    assert math.isclose(triviality_bound(alpha, 2), epsilon, rel_tol=1e-12)
    estimates, _ = answer_plan(plan, oracle, alpha, beta)
    return ParityQldpResult(decode_bits(d, estimates), alpha, per_bit, estimates, oracle)


def generalization_error(h: ParityConcept, c: ParityConcept, x: ExampleDistribution) -> float:
    """``Pr_{x ~ X}[h(x) != c(x)]``, computed exactly."""
    if not h.d == c.d == x.d:
        raise ValidationError("dimension mismatch between hypothesis, concept and distribution")
    xs = np.arange(2**h.d)
    return float(x.weights[h(xs) != c(xs)].sum())
