"""Simulations between statistical-query and local-privacy access.

Two directions are provided:

* answering nonadaptive statistical queries using only nearly trivial
  single-copy measurements (privatize, measure, debias, average), and
* reproducing the outcome of a trivial measurement using only statistical
  queries (rejection sampling against a fixed proposal state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import DensityMatrix, ProductState
from .errors import MaxIterationsExceeded, NotTrivialEnough, ValidationError
from .measurement import Povm, outcome_probabilities
from .oracles import TRIVIALITY_SLACK, QldpOracle, QsqOracle
from .rng import draw_index


def _check_open_unit(name: str, x: float) -> None:
    if not 0 < x < 1:
        raise ValidationError(f"{name} must lie in (0, 1), got {x!r}")


@lru_cache(maxsize=256)
def privatize_povm(m: Povm, alpha: float) -> Povm:
    """Mix ``m`` with the uniform-outcome measurement.

    ``E_i' = alpha * E_i + (1 - alpha) / k * I``: run ``m`` with probability
    ``alpha``, otherwise report a uniformly random outcome. Labels are kept.
    """
    _check_open_unit("alpha", alpha)
    eye = np.eye(m.dim)
    return Povm([alpha * e + (1 - alpha) / m.k * eye for e in m.effects], m.labels)


def triviality_bound(alpha: float, k: int) -> float:
    """Upper bound ``ln((1 + alpha k) / (1 - alpha))`` on the triviality of a privatized k-outcome POVM."""
    _check_open_unit("alpha", alpha)
    if k < 1:
        raise ValidationError("k must be positive")
    return math.log1p(alpha * k) - math.log1p(-alpha)


def alpha_for_budget(epsilon: float, k: int) -> float:
    """Invert :func:`triviality_bound` in ``alpha`` for fixed ``k``."""
    if not epsilon > 0 or math.isinf(epsilon):
        raise ValidationError(f"epsilon must be positive and finite, got {epsilon!r}")
    g = math.expm1(epsilon)
    return g / (k + 1 + g)


def debias(x, alpha: float, center: float = 1.0):
    """Map a privatized outcome to an unbiased estimate of the original one.

    The privatized outcome has mean ``alpha * E[M] + (1 - alpha) * center``
    where ``center`` is the average label of the measurement, so
    ``(x - (1 - alpha) * center) / alpha`` is unbiased. With the default
    ``center=1`` this is ``x / alpha + (alpha - 1) / alpha``.
    """
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha!r}")
    return (x - (1 - alpha) * center) / alpha


def required_samples(k: int, tau: float, alpha: float, delta: float) -> int:
    """Copies needed for a Hoeffding estimate within ``tau`` with failure prob. ``delta``.

    ``ceil(k^2 ln(2/delta) / (2 tau^2 alpha^2))``.
    """
    if k < 1:
        raise ValidationError("k must be positive")
    if not tau > 0 or math.isinf(tau):
        raise ValidationError(f"tau must be positive, got {tau!r}")
    _check_open_unit("alpha", alpha)
    _check_open_unit("delta", delta)
    return math.ceil(k * k * math.log(2 / delta) / (2 * tau * tau * alpha * alpha))


def estimate_expectation_via_qldp(
    oracle: QldpOracle,
    registers: Sequence[int],
    m: Povm,
    alpha: float,
) -> float:
    """Estimate ``E[m(rho)]`` by measuring each listed register once with the privatized ``m``."""
    registers = list(registers)
    if not registers:
        raise ValidationError("need at least one register")
    if len(set(int(j) for j in registers)) != len(registers):
        raise ValidationError("registers must be distinct")
    private = privatize_povm(m, alpha)
    labels = oracle.query_many(registers, private, triviality_bound(alpha, m.k))
    return float(np.mean(debias(labels, alpha, center=float(np.mean(m.labels)))))


@dataclass(frozen=True)
class QsqQuery:
    povm: Povm
    tau: float

    def __post_init__(self):
        if not self.tau > 0 or math.isinf(self.tau):
            raise ValidationError(f"query tolerance must be positive, got {self.tau!r}")


@dataclass(frozen=True)
class QsqQueryPlan:
    queries: tuple[QsqQuery, ...]
    nonadaptive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValidationError("a query plan needs at least one query")
        if not self.nonadaptive:
            raise ValidationError("only nonadaptive plans are supported")


@dataclass(frozen=True)
class QsqSimulationResult:
    estimates: list[float]
    blocks: list[tuple[int, int]]  # [start, stop) register range per query
    budget: float
    oracle: QldpOracle

    def to_dict(self) -> dict:
        return {
            "estimates": self.estimates,
            "register_blocks": [list(b) for b in self.blocks],
            "qldp_queries": int(self.oracle.charges.sum()),
            "budget": self.budget,
            "ledger": self.oracle.ledger_snapshot(),
        }


def plan_copies(plan: QsqQueryPlan, alpha: float, beta: float) -> list[int]:
    """Per-query copy counts, with the failure budget ``beta`` split evenly."""
    _check_open_unit("beta", beta)
    delta = beta / len(plan.queries)
    return [required_samples(q.povm.k, q.tau, alpha, delta) for q in plan.queries]


def answer_plan(
    plan: QsqQueryPlan,
    oracle: QldpOracle,
    alpha: float,
    beta: float,
    start: int = 0,
) -> tuple[list[float], list[tuple[int, int]]]:
    """Answer every query of ``plan`` on disjoint fresh registers of ``oracle``.

    Registers are consumed consecutively from ``start``.
    """
    estimates, blocks = [], []
    pos = start
    for q, n in zip(plan.queries, plan_copies(plan, alpha, beta)):
        if pos + n > len(oracle):
            raise ValidationError(f"oracle has {len(oracle)} registers, plan needs at least {pos + n}")
        estimates.append(estimate_expectation_via_qldp(oracle, range(pos, pos + n), q.povm, alpha))
        blocks.append((pos, pos + n))
        pos += n
    return estimates, blocks


def simulate_nonadaptive_qsq(
    plan: QsqQueryPlan,
    state: DensityMatrix,
    alpha: float,
    beta: float,
    rng: np.random.Generator,
) -> QsqSimulationResult:
    """Run a nonadaptive statistical-query plan through a local-privacy oracle.

    Each query gets ``required_samples(k, tau, alpha, beta / t)`` fresh copies
    of ``state``; by a union bound all answers are within tolerance with
    probability at least ``1 - beta``. The oracle budget is the triviality
    bound for the largest outcome count in the plan.
    """
    _check_open_unit("alpha", alpha)
    n = sum(plan_copies(plan, alpha, beta))
    budget = triviality_bound(alpha, max(q.povm.k for q in plan.queries))
    oracle = QldpOracle(ProductState([state] * n), budget, rng)
    estimates, blocks = answer_plan(plan, oracle, alpha, beta)
    return QsqSimulationResult(estimates, blocks, budget, oracle)


def _basis_zero(dim: int) -> DensityMatrix:
    m = np.zeros((dim, dim), dtype=complex)
    m[0, 0] = 1.0
    return DensityMatrix(m)


def default_max_iterations(epsilon: float) -> int:
    return math.ceil(50 * math.exp(epsilon))


def acceptance_ratio(p_tilde, q, epsilon: float, tau: float):
    """Unclamped acceptance ratio ``p~(w) / (e^eps (1 + tau) q(w))``."""
    return np.asarray(p_tilde) / (math.exp(epsilon) * (1 + tau) * np.asarray(q))


@dataclass(frozen=True)
class RejectionAnalysis:
    """Exact behaviour of one rejection-sampling iteration for fixed oracle answers."""

    output: np.ndarray  # conditional output distribution given termination
    p_terminate: float
    clamped: np.ndarray  # per-outcome flag: acceptance ratio left [0, 1]


def analyze_rejection(p_tilde, q, epsilon: float, tau: float) -> RejectionAnalysis:
    """Evaluate the sampler's loop analytically.

    ``p_tilde`` holds the oracle answer the loop would receive for each
    proposal ``w``; ``q`` is the proposal distribution. Outcomes with
    ``q(w) = 0`` are never proposed.
    """
    p_tilde = np.asarray(p_tilde, dtype=float)
    q = np.asarray(q, dtype=float)
    live = q > 0
    ratio = np.zeros_like(q)
    ratio[live] = acceptance_ratio(p_tilde[live], q[live], epsilon, tau)
    clamped = live & ((ratio > 1) | (ratio < 0))
    mass = q * np.clip(ratio, 0.0, 1.0)
    total = float(mass.sum())
    out = mass / total if total > 0 else np.full_like(q, np.nan)
    return RejectionAnalysis(out, total, clamped)


@dataclass(frozen=True)
class RejectionSample:
    index: int
    label: float
    iterations: int
    clamps: int


def rejection_sample_measurement(
    oracle: QsqOracle,
    m: Povm,
    epsilon: float,
    tau: float,
    rng: np.random.Generator,
    proposal: DensityMatrix | None = None,
    max_iterations: int | None = None,
) -> RejectionSample:
    """Sample an outcome of ``m`` on the oracle's hidden state using statistical queries only.

    Each iteration proposes ``w`` by measuring ``m`` on ``proposal`` (default
    ``|0><0|``), asks the oracle for ``Tr(E_w rho)`` through the binary
    measurement ``(I - E_w, E_w)`` with tolerance ``tau``, and accepts with
    probability ``p~(w) / (e^eps (1 + tau) q(w))`` clamped to [0, 1].

    ``rng`` drives proposals and acceptance coins; oracle noise uses the
    oracle's own stream.
    """
    if m.triviality.alpha_star > epsilon + TRIVIALITY_SLACK:
        raise NotTrivialEnough(f"measurement is {m.triviality.alpha_star:.6g}-trivial, epsilon is {epsilon:.6g}")
    if not 0 < tau <= 1 / 3:
        raise ValidationError(f"tau must lie in (0, 1/3], got {tau!r}")
    if proposal is None:
        proposal = _basis_zero(m.dim)
    if max_iterations is None:
        max_iterations = default_max_iterations(epsilon)
    q = outcome_probabilities(m, proposal)
    cdf = np.cumsum(q)
    scale = math.exp(epsilon) * (1 + tau)
    eye = np.eye(m.dim)
    binary: dict[int, Povm] = {}
    clamps = 0
    for it in range(1, max_iterations + 1):
        w = int(draw_index(cdf, rng.random()))
        if w not in binary:
            binary[w] = Povm([eye - m.effects[w], m.effects[w]], labels=(0.0, 1.0))
        p_tilde = oracle.query(binary[w], tau)
        ratio = p_tilde / (scale * q[w])
        if ratio > 1 or ratio < 0:
            clamps += 1
        if rng.random() < min(1.0, max(0.0, ratio)):
            return RejectionSample(w, m.labels[w], it, clamps)
    raise MaxIterationsExceeded(f"no outcome accepted within {max_iterations} iterations")


@dataclass(frozen=True)
class QldpQuery:
    register: int
    povm: Povm
    epsilon: float


@dataclass(frozen=True)
class QldpQueryPlan:
    """Noninteractive local-privacy queries with a per-register budget ``epsilon``."""

    queries: tuple[QldpQuery, ...]
    epsilon: float
    noninteractive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValidationError("a query plan needs at least one query")
        if not self.noninteractive:
            raise ValidationError("only noninteractive plans are supported")
        spent: dict[int, float] = {}
        for q in self.queries:
            if q.register < 0:
                raise ValidationError(f"invalid register index {q.register}")
            if not q.epsilon >= 0:
                raise ValidationError("declared epsilon must be nonnegative")
            spent[q.register] = spent.get(q.register, 0.0) + q.epsilon
        for j, s in spent.items():
            if s > self.epsilon + 1e-12:
                raise ValidationError(f"register {j} declares {s:.6g} total, budget is {self.epsilon:.6g}")


@dataclass
class QldpSimulationResult:
    labels: list[float]
    tau: float
    iterations: list[int] = field(default_factory=list)
    clamps: list[int] = field(default_factory=list)
    qsq_queries: int = 0

    def to_dict(self) -> dict:
        return {
            "outcomes": self.labels,
            "tau": self.tau,
            "iterations": self.iterations,
            "clamps": self.clamps,
            "qsq_queries": self.qsq_queries,
        }


def simulate_noninteractive_qldp(
    plan: QldpQueryPlan,
    oracle: QsqOracle,
    beta: float,
    rng: np.random.Generator,
) -> QldpSimulationResult:
    """Answer each local-privacy query by rejection sampling with ``tau = beta / (3t)``.

    Every register copy is measured once, so every query acts on the same
    hidden state ``rho`` held by ``oracle``.
    """
    _check_open_unit("beta", beta)
    tau = beta / (3 * len(plan.queries))
    result = QldpSimulationResult([], tau)
    before = oracle.query_count
    for q in plan.queries:
        s = rejection_sample_measurement(oracle, q.povm, q.epsilon, tau, rng)
        result.labels.append(s.label)
        result.iterations.append(s.iterations)
        result.clamps.append(s.clamps)
    result.qsq_queries = oracle.query_count - before
    return result
