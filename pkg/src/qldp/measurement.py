"""POVMs, the Born rule, and triviality / differential-privacy certification."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import permutations
from typing import Sequence

import numpy as np

from .core import (
    PSD_TOL,
    DensityMatrix,
    ProductState,
    as_operator,
    check_capacity,
    ginibre,
    pure_state_density,
)
from .errors import ValidationError
from .rng import draw_index

ZERO_PROB = 1e-12
COMPLETENESS_TOL = 1e-9
RATIO_TOL = 1e-9


class Povm:
    """A finite-outcome measurement ``E_1..E_k`` with real outcome labels.

    Effects must be PSD (eigenvalues ``>= -1e-9 * dim``) and sum to the
    identity within ``1e-9`` in max-norm. Labels default to ``1..k``.
    """

    def __init__(self, effects: Sequence, labels: Sequence[float] | None = None):
        effects = tuple(as_operator(e, hermitian=True) for e in effects)
        if not effects:
            raise ValidationError("a POVM needs at least one effect")
        dim = effects[0].shape[0]
        if any(e.shape != (dim, dim) for e in effects):
            raise ValidationError("all effects must share one dimension")
        check_capacity(dim)
        if labels is None:
            labels = range(1, len(effects) + 1)
        labels = tuple(float(x) for x in labels)
        if len(labels) != len(effects):
            raise ValidationError(f"{len(labels)} labels for {len(effects)} effects")
        if not all(math.isfinite(x) for x in labels):
            raise ValidationError("labels must be finite")
        eig = tuple(np.linalg.eigh(e) for e in effects)
        for i, (lam, _) in enumerate(eig):
            if lam[0] < -PSD_TOL * dim:
                raise ValidationError(f"effect {i} is not PSD (min eigenvalue {lam[0]:.3g})")
        dev = np.max(np.abs(sum(effects) - np.eye(dim)))
        if dev > COMPLETENESS_TOL:
            raise ValidationError(f"effects do not sum to identity (max deviation {dev:.3g})")
        self.effects = effects
        self.labels = labels
        self._eig = eig

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def k(self) -> int:
        return len(self.effects)

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.labels).tobytes())
        for e in self.effects:
            h.update(e.tobytes())
        return h.hexdigest()

    @cached_property
    def triviality(self) -> TrivialityCertificate:
        return minimal_triviality(self)

    def __repr__(self):
        return f"Povm(dim={self.dim}, k={self.k})"


def projective_povm(dim: int, labels: Sequence[float] | None = None) -> Povm:
    """Computational-basis measurement ``(|0><0|, ..., |d-1><d-1|)``."""
    effects = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        effects.append(e)
    return Povm(effects, labels)


def _check_dims(m: Povm, rho: DensityMatrix) -> None:
    if m.dim != rho.dim:
        raise ValidationError(f"POVM dim {m.dim} does not match state dim {rho.dim}")


def outcome_probabilities(m: Povm, rho: DensityMatrix) -> np.ndarray:
    """Born-rule probabilities ``Tr(E_i rho)``, clamped to [0, 1]."""
    _check_dims(m, rho)
    # Tr(E rho) = sum_ij E_ij rho_ji
    p = np.array([np.einsum("ij,ji->", e, rho.matrix).real for e in m.effects])
    p = np.clip(p, 0.0, 1.0)
    total = p.sum()
    if total > 0 and abs(total - 1.0) <= COMPLETENESS_TOL:
        p = p / total
    return p


def sample_outcome(m: Povm, rho: DensityMatrix, rng: np.random.Generator) -> tuple[int, float]:
    """Draw one outcome; returns ``(index, label)``."""
    p = outcome_probabilities(m, rho)
    i = int(draw_index(np.cumsum(p), rng.random()))
    return i, m.labels[i]


def expectation(m: Povm, rho: DensityMatrix) -> float:
    return float(np.dot(m.labels, outcome_probabilities(m, rho)))


@dataclass(frozen=True)
class TrivialityCertificate:
    """Smallest ``alpha`` for which a measurement is ``alpha``-trivial.

    ``outcome`` maximizes the log probability ratio. The witness states are
    given either directly (``rho``, ``sigma``) or as indices into the tested
    state list (``rho_index``, ``sigma_index``); ``Pr[outcome | rho] /
    Pr[outcome | sigma]`` realizes ``exp(alpha_star)``.
    """

    alpha_star: float
    outcome: int
    rho: DensityMatrix | None = None
    sigma: DensityMatrix | None = None
    rho_index: int | None = None
    sigma_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "outcome": self.outcome,
            "rho_index": self.rho_index,
            "sigma_index": self.sigma_index,
        }


def _log_ratio(num: float, den: float) -> float:
    """``ln(num/den)`` with 0/0 -> 0 and x/0 -> +inf."""
    if num <= ZERO_PROB:
        return 0.0 if den <= ZERO_PROB else -math.inf
    if den <= ZERO_PROB:
        return math.inf
    return math.log(num / den)


def minimal_triviality(m: Povm) -> TrivialityCertificate:
    """Triviality over all density matrices.

    For each effect, ``Tr(E rho)`` ranges exactly over ``[lambda_min(E),
    lambda_max(E)]`` and the endpoints are attained by eigenvectors, so the
    worst ratio is ``lambda_max / lambda_min`` of some effect.
    """
    best, best_i = 0.0, 0
    for i, (lam, _) in enumerate(m._eig):
        r = _log_ratio(lam[-1], lam[0])
        if r > best:
            best, best_i = r, i
    vecs = m._eig[best_i][1]
    rho = pure_state_density(vecs[:, -1])
    sigma = pure_state_density(vecs[:, 0])
    return TrivialityCertificate(best, best_i, rho=rho, sigma=sigma)


def minimal_triviality_on_set(m: Povm, states: Sequence[DensityMatrix]) -> TrivialityCertificate:
    """Triviality restricted to a finite set of states.

    The maximum of ``ln(p_i(rho) / p_i(sigma))`` over ordered pairs is attained
    at the largest and smallest ``p_i`` across the set, per outcome.
    """
    if not states:
        raise ValidationError("need at least one state")
    probs = np.array([outcome_probabilities(m, s) for s in states])
    best, best_i, hi_idx, lo_idx = 0.0, 0, 0, 0
    for i in range(m.k):
        col = probs[:, i]
        hi, lo = int(np.argmax(col)), int(np.argmin(col))
        r = _log_ratio(col[hi], col[lo])
        if r > best:
            best, best_i, hi_idx, lo_idx = r, i, hi, lo
    return TrivialityCertificate(best, best_i, rho_index=hi_idx, sigma_index=lo_idx)


@dataclass(frozen=True)
class DpViolation:
    pair: tuple[int, int]
    outcome: int
    log_ratio: float


@dataclass(frozen=True)
class DpCheckResult:
    passed: bool
    alpha: float
    max_log_ratio: float  # smallest alpha that would pass
    witness: DpViolation | None  # worst violation, None on pass
    neighbor_pairs: int

    def to_dict(self) -> dict:
        w = self.witness
        return {
            "passed": self.passed,
            "alpha": self.alpha,
            "max_log_ratio": self.max_log_ratio,
            "neighbor_pairs": self.neighbor_pairs,
            "witness": None if w is None else {"pair": list(w.pair), "outcome": w.outcome, "log_ratio": w.log_ratio},
        }


def are_neighbors(a: ProductState, b: ProductState, tol: float = 1e-9) -> bool:
    """True iff ``a`` and ``b`` differ (beyond ``tol`` in max-norm) in exactly one register."""
    if a.dims != b.dims:
        raise ValidationError(f"register mismatch: {a.dims} vs {b.dims}")
    diff = sum(1 for x, y in zip(a.registers, b.registers) if x.max_distance(y) > tol)
    return diff == 1


def check_dp(
    m: Povm,
    states: Sequence[ProductState],
    alpha: float,
    max_dim: int | None = None,
) -> DpCheckResult:
    """Check ``alpha``-differential privacy of ``m`` on a finite set of product states.

    Every ordered pair of neighbors and every outcome is enumerated. The
    joint states are materialized, so the total dimension must fit the cap.
    """
    if alpha < 0 or math.isnan(alpha):
        raise ValidationError("alpha must be nonnegative")
    states = list(states)
    if not states:
        raise ValidationError("need at least one product state")
    dims = states[0].dims
    for s in states:
        if s.dims != dims:
            raise ValidationError(f"register mismatch: {s.dims} vs {dims}")
    check_capacity(states[0].total_dim, max_dim)
    probs = [outcome_probabilities(m, s.joint(max_dim)) for s in states]

    worst: DpViolation | None = None
    max_ratio, pairs = 0.0, 0
    for a, b in permutations(range(len(states)), 2):
        if not are_neighbors(states[a], states[b]):
            continue
        pairs += 1
        for y in range(m.k):
            r = _log_ratio(probs[a][y], probs[b][y])
            if r > max_ratio:
                max_ratio = r
            if r > alpha + RATIO_TOL and (worst is None or r > worst.log_ratio):
                worst = DpViolation((a, b), y, r)
    return DpCheckResult(worst is None, float(alpha), max_ratio, worst, pairs)


def random_povm(dim: int, k: int, rng: np.random.Generator, max_condition: float = 1e12) -> Povm:
    """Random POVM from normalized Ginibre positives.

    Draws ``A_i = G_i G_i^dagger``, sets ``S = sum A_i`` and returns
    ``E_i = S^{-1/2} A_i S^{-1/2}``; redraws while ``S`` is ill-conditioned.
    """
    if dim < 1 or k < 1:
        raise ValidationError("dim and k must be positive")
    check_capacity(dim)
    while True:
        parts = [g @ g.conj().T for g in (ginibre(dim, rng) for _ in range(k))]
        lam, vecs = np.linalg.eigh(sum(parts))
        if lam[0] <= 0 or lam[-1] / lam[0] > max_condition:
            continue
        inv_sqrt = (vecs / np.sqrt(lam)) @ vecs.conj().T
        effects = [inv_sqrt @ a @ inv_sqrt for a in parts]
        effects = [(e + e.conj().T) / 2 for e in effects]
        # push the residual round-off into the last effect
        effects[-1] = effects[-1] + (np.eye(dim) - sum(effects))
        if k == 1:
            effects = [np.eye(dim, dtype=complex)]
        return Povm(effects)

