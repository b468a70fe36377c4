"""Statistical-query and local-privacy oracles over fixed quantum states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DensityMatrix, ProductState
from .errors import BudgetExceeded, NotTrivialEnough, ValidationError
from .measurement import Povm, expectation, outcome_probabilities
from .rng import draw_index

NOISE_MODES = ("exact", "uniform", "adversarial_extreme")
TRIVIALITY_SLACK = 1e-9
BUDGET_SLACK = 1e-12


@dataclass(frozen=True)
class QsqLogEntry:
    povm_digest: str
    tau: float
    answer: float


class QsqOracle:
    """Answers expectation queries on ``state`` up to additive tolerance.

    ``noise`` selects how the error inside ``[-tau, tau]`` is chosen:
    ``exact`` adds none, ``uniform`` draws it uniformly, and
    ``adversarial_extreme`` picks ``+tau`` or ``-tau`` with a fair coin.
    """

    def __init__(self, state: DensityMatrix, rng: np.random.Generator, noise: str = "uniform"):
        if noise not in NOISE_MODES:
            raise ValidationError(f"unknown noise mode {noise!r}; expected one of {NOISE_MODES}")
        self.state = state
        self.noise = noise
        self.rng = rng
        self.log: list[QsqLogEntry] = []
        self._exact: dict[str, float] = {}

    def exact(self, m: Povm) -> float:
        if m.digest not in self._exact:
            self._exact[m.digest] = expectation(m, self.state)
        return self._exact[m.digest]

    def query(self, m: Povm, tau: float) -> float:
        if not tau >= 0 or math.isinf(tau):
            raise ValidationError(f"tolerance must be a finite nonnegative number, got {tau!r}")
        if m.dim != self.state.dim:
            raise ValidationError(f"POVM dim {m.dim} does not match state dim {self.state.dim}")
        e = self.exact(m)
        if self.noise == "exact" or tau == 0:
            noise = 0.0
        elif self.noise == "uniform":
            noise = self.rng.uniform(-tau, tau)
        else:
            noise = tau if self.rng.random() < 0.5 else -tau
        answer = e + noise
        # floating-point addition may land one ulp outside the band
        while abs(answer - e) > tau:
            answer = np.nextafter(answer, e)
        answer = float(answer)
        self.log.append(QsqLogEntry(m.digest, float(tau), answer))
        return answer

    @property
    def query_count(self) -> int:
        return len(self.log)


class QldpOracle:
    """Budget-enforcing local-privacy oracle over a product state.

    Every query names one register and a measurement with a declared
    triviality. The oracle recomputes the measurement's triviality over all
    states, refuses it if the declaration is too small, and charges the
    declared amount to that register. Registers are never disturbed: each
    query acts on a fresh copy of the register's state.

    Parameters
    ----------
    registers : ProductState or sequence of DensityMatrix
    budget : float
        Per-register privacy budget ``epsilon``.
    rng : numpy.random.Generator
        Stream used for outcome sampling only.
    """

    def __init__(self, registers: ProductState | Iterable[DensityMatrix], budget: float, rng: np.random.Generator):
        if not isinstance(registers, ProductState):
            registers = ProductState(registers)
        if not budget >= 0 or math.isinf(budget):
            raise ValidationError(f"budget must be a finite nonnegative number, got {budget!r}")
        self.registers = registers
        self.budget = float(budget)
        self.rng = rng
        n = len(registers)
        self.ledger = np.zeros(n)
        self.charges = np.zeros(n, dtype=np.int64)
        self._cdf: dict[tuple[str, str], np.ndarray] = {}

    def __len__(self):
        return len(self.registers)

    def _check_index(self, j) -> int:
        if isinstance(j, (bool, np.bool_)) or not isinstance(j, (int, np.integer)) or not 0 <= j < len(self.registers):
            raise ValidationError(f"invalid register index {j!r}")
        return int(j)

    def remaining_budget(self, j: int) -> float:
        j = self._check_index(j)
        return self.budget - float(self.ledger[j])

    def _verify(self, m: Povm, declared_alpha: float) -> None:
        if not declared_alpha >= 0 or math.isinf(declared_alpha):
            raise ValidationError(f"declared alpha must be a finite nonnegative number, got {declared_alpha!r}")
        needed = m.triviality.alpha_star
        if needed > declared_alpha + TRIVIALITY_SLACK:
            raise NotTrivialEnough(f"measurement is {needed:.6g}-trivial, declared {declared_alpha:.6g}")

    def _cdf_for(self, j: int, m: Povm) -> np.ndarray:
        state = self.registers[j]
        if m.dim != state.dim:
            raise ValidationError(f"POVM dim {m.dim} does not match register {j} dim {state.dim}")
        key = (m.digest, state.digest)
        if key not in self._cdf:
            self._cdf[key] = np.cumsum(outcome_probabilities(m, state))
        return self._cdf[key]

    def query(self, j: int, m: Povm, declared_alpha: float) -> float:
        """Measure a fresh copy of register ``j`` with ``m``; return the outcome label."""
        j = self._check_index(j)
        cdf = self._cdf_for(j, m)
        self._verify(m, declared_alpha)
        if self.ledger[j] + declared_alpha > self.budget + BUDGET_SLACK:
            raise BudgetExceeded(
                f"register {j}: spent {self.ledger[j]:.6g} + {declared_alpha:.6g} exceeds budget {self.budget:.6g}"
            )
        i = int(draw_index(cdf, self.rng.random()))
        self.ledger[j] += declared_alpha
        self.charges[j] += 1
        return m.labels[i]

    def query_many(self, registers: Sequence[int], m: Povm, declared_alpha: float) -> np.ndarray:
        """Same as calling :meth:`query` once per register, in order, but vectorized.

        All checks run before anything is charged or sampled, so a rejected
        batch leaves the oracle untouched. Draws consume the stream exactly as
        the sequential calls would.
        """
        idx = np.array([self._check_index(j) for j in registers], dtype=np.int64)
        if idx.size == 0:
            return np.empty(0)
        groups: dict[str, list[int]] = {}
        cdfs: dict[str, np.ndarray] = {}
        for pos, j in enumerate(idx):
            d = self.registers[j].digest
            if d not in cdfs:
                cdfs[d] = self._cdf_for(j, m)
            groups.setdefault(d, []).append(pos)
        self._verify(m, declared_alpha)
        spent = self.ledger.copy()
        np.add.at(spent, idx, declared_alpha)
        over = np.nonzero(spent > self.budget + BUDGET_SLACK)[0]
        if over.size:
            j = int(over[0])
            raise BudgetExceeded(f"register {j}: batch would spend {spent[j]:.6g} of budget {self.budget:.6g}")
        u = self.rng.random(idx.size)
        out = np.empty(idx.size, dtype=np.int64)
        for d, positions in groups.items():
            out[positions] = draw_index(cdfs[d], u[positions])
        self.ledger = spent
        np.add.at(self.charges, idx, 1)
        return np.asarray(m.labels)[out]

    def ledger_snapshot(self) -> dict:
        used = np.nonzero(self.charges)[0]
        return {
            "budget": self.budget,
            "registers": len(self.registers),
            "registers_used": int(used.size),
            "max_spent": float(self.ledger.max()),
            "max_charges_per_register": int(self.charges.max()),
        }
