"""Seeded experiment runner with JSON reports and CSV export.

Each experiment kind defines a one-off setup, a per-trial function and an
aggregation step that decides pass/fail. Trial ``i`` always gets the stream
``make_rng(master_seed, i)``, so per-trial records do not depend on the degree
of parallelism.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .core import DensityMatrix, ProductState, maximally_mixed, random_density_matrix
from .errors import QldpError, ValidationError
from .learning import (
    ExampleDistribution,
    ParityConcept,
    generalization_error,
    learn_parity_qldp,
    learn_parity_qsq,
    parity_copies_needed,
    quantum_example_state,
)
from .measurement import (
    check_dp,
    expectation,
    minimal_triviality_on_set,
    outcome_probabilities,
    projective_povm,
    random_povm,
)
from .oracles import QldpOracle, QsqOracle
from .protocols import (
    alpha_for_budget,
    analyze_rejection,
    estimate_expectation_via_qldp,
    privatize_povm,
    rejection_sample_measurement,
    required_samples,
    triviality_bound,
)
from .rng import make_rng

# Setup streams live under a path no trial index can reach.
SETUP_STREAM = 2**63


@dataclass(frozen=True)
class Kind:
    defaults: dict[str, Any]
    columns: tuple[str, ...]
    trial: Callable[[dict, Any, np.random.Generator], dict]
    aggregate: Callable[[dict, list[dict]], tuple[dict, bool]]
    setup: Callable[[dict, np.random.Generator], Any] = lambda params, rng: None


# -- triviality-bound ---------------------------------------------------------


def _triviality_trial(p, _, rng):
    dim = int(rng.integers(1, p["max_dim"] + 1))
    k = int(rng.integers(1, p["max_k"] + 1))
    m = random_povm(dim, k, rng)
    excess, worst = -math.inf, None
    for a in p["alphas"]:
        e = privatize_povm(m, a).triviality.alpha_star - triviality_bound(a, k)
        if e > excess:
            excess, worst = e, a
    return {"dim": dim, "k": k, "max_excess": excess, "worst_alpha": worst}


def _triviality_aggregate(p, recs):
    worst = max(r["max_excess"] for r in recs)
    violations = sum(r["max_excess"] > p["tolerance"] for r in recs)
    return {"max_excess": worst, "violations": violations}, violations == 0


# -- estimator-concentration --------------------------------------------------


def _concentration_trial(p, _, rng):
    k, dim = p["k"], p["dim"]
    if p["povm"] == "projective":
        if k != dim:
            raise ValidationError("projective POVM needs k == dim")
        m = projective_povm(dim)
    else:
        m = random_povm(dim, k, rng)
    rho = maximally_mixed(dim) if p["state"] == "maximally_mixed" else random_density_matrix(dim, rng)
    n = required_samples(k, p["tau"], p["alpha"], p["delta"])
    oracle = QldpOracle([rho] * n, triviality_bound(p["alpha"], k), rng)
    est = estimate_expectation_via_qldp(oracle, range(n), m, p["alpha"])
    exact = expectation(m, rho)
    return {"n": n, "exact": exact, "estimate": est, "signed_error": est - exact, "failed": abs(est - exact) > p["tau"]}


def _concentration_aggregate(p, recs):
    frac = sum(r["failed"] for r in recs) / len(recs)
    return {"failure_fraction": frac, "mean_abs_error": float(np.mean([abs(r["signed_error"]) for r in recs]))}, (
        frac <= p["max_failure_fraction"]
    )


# -- rejection-distortion -----------------------------------------------------


def _basis_zero(dim):
    m = np.zeros((dim, dim))
    m[0, 0] = 1
    return DensityMatrix(m)


def _distortion_trial(p, _, rng):
    dim = int(rng.integers(2, p["max_dim"] + 1))
    k = int(rng.integers(2, p["max_k"] + 1))
    a = float(rng.uniform(0.05, 1.0)) * alpha_for_budget(p["max_epsilon"], k)
    m = privatize_povm(random_povm(dim, k, rng), a)
    eps = triviality_bound(a, k) if p["epsilon_mode"] == "bound" else m.triviality.alpha_star
    rho = random_density_matrix(dim, rng)
    tau = p["tau"]
    q = outcome_probabilities(m, _basis_zero(dim))
    pr = outcome_probabilities(m, rho)
    tau_ok = tau <= math.exp(-eps) * q.min() / 2

    clamped = mult_viol = add_viol = 0
    max_rel = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=k):
        res = analyze_rejection(pr + tau * np.array(signs), q, eps, tau)
        if res.clamped.any():
            clamped += 1
            continue
        rel = np.abs(res.output / pr - 1)
        max_rel = max(max_rel, float(rel.max()))
        mult_viol += bool(np.any(rel > 3 * tau + 1e-12))
        add_bound = tau * (1 + k * pr) / (1 - k * tau)
        add_viol += bool(np.any(np.abs(res.output - pr) > add_bound + 1e-12))
    return {
        "dim": dim,
        "k": k,
        "epsilon": eps,
        "min_p": float(pr.min()),
        "min_q": float(q.min()),
        "tau_condition": bool(tau_ok),
        "clamped_vectors": clamped,
        "max_rel_deviation": max_rel,
        "multiplicative_violations": mult_viol,
        "additive_violations": add_viol,
    }


def _distortion_aggregate(p, recs):
    mult = sum(r["multiplicative_violations"] for r in recs)
    clamp_under = sum(r["clamped_vectors"] > 0 and r["tau_condition"] for r in recs)
    agg = {
        "instances_with_multiplicative_violation": sum(r["multiplicative_violations"] > 0 for r in recs),
        "multiplicative_violations": mult,
        "max_rel_deviation": max(r["max_rel_deviation"] for r in recs),
        "clamps_under_tau_condition": clamp_under,
        "instances_with_clamps": sum(r["clamped_vectors"] > 0 for r in recs),
        "additive_violations": sum(r["additive_violations"] for r in recs),
    }
    return agg, mult == 0 and clamp_under == 0


# -- termination-rate ---------------------------------------------------------


def _termination_setup(p, rng):
    k, dim, eps = p["k"], p["dim"], p["epsilon"]
    m = privatize_povm(random_povm(dim, k, rng), alpha_for_budget(eps, k))
    return m, random_density_matrix(dim, rng)


def _termination_trial(p, inst, rng):
    m, rho = inst
    oracle = QsqOracle(rho, rng, noise="exact")
    s = rejection_sample_measurement(oracle, m, p["epsilon"], p["tau"], rng)
    return {"outcome": s.index, "iterations": s.iterations, "clamps": s.clamps}


def _termination_aggregate(p, recs):
    it = np.array([r["iterations"] for r in recs], dtype=float)
    mean = float(it.mean())
    se = float(it.std(ddof=1) / math.sqrt(len(it))) if len(it) > 1 else 0.0
    bound = math.exp(p["epsilon"]) * (1 + p["tau"]) / (1 - p["tau"])
    return {"mean_iterations": mean, "standard_error": se, "bound": bound}, mean <= bound + 3 * se


# -- parity-e2e ---------------------------------------------------------------


def _parity_trial(p, _, rng):
    d = p["d"]
    c = ParityConcept.random(d, rng)
    x = ExampleDistribution.uniform(d)
    state = quantum_example_state(c, x)
    rec = {"s": c.s}
    if p["mode"] == "qsq":
        h = learn_parity_qsq(QsqOracle(state, rng, noise=p["noise"]), d, p["tau"])
        rec.update(copies=0, max_spent=0.0, ledger_exact=True)
    else:
        n = parity_copies_needed(d, p["epsilon"], p["beta"], p["tau"])
        res = learn_parity_qldp([state] * n, d, p["epsilon"], p["beta"], p["tau"], rng)
        h = res.concept
        used = res.oracle.charges > 0
        exact = bool(
            np.all(res.oracle.charges[used] == 1)
            and np.allclose(res.oracle.ledger[used], p["epsilon"], rtol=0, atol=1e-12)
        )
        rec.update(copies=res.copies_consumed, max_spent=float(res.oracle.ledger.max()), ledger_exact=exact)
    rec.update(recovered=h.s, success=h == c, generalization_error=generalization_error(h, c, x))
    return rec


def _parity_aggregate(p, recs):
    n = len(recs)
    rate = sum(r["success"] for r in recs) / n
    ledger_ok = all(r["ledger_exact"] and r["max_spent"] <= p["epsilon"] + 1e-12 for r in recs)
    if p["mode"] == "qsq":
        threshold = 1.0
    else:
        target = 1 - p["beta"]
        threshold = target - 3 * math.sqrt(target * (1 - target) / n)
    return {"success_rate": rate, "threshold": threshold, "ledger_ok": ledger_ok}, rate >= threshold and ledger_ok


# -- dp-check-suite -----------------------------------------------------------


def _dp_trial(p, _, rng):
    dim = int(rng.integers(2, p["max_dim"] + 1))
    k = int(rng.integers(2, p["max_k"] + 1))
    m = privatize_povm(random_povm(dim, k, rng), float(rng.uniform(0.1, 0.9)))
    states = [random_density_matrix(dim, rng) for _ in range(int(rng.integers(2, p["max_states"] + 1)))]
    set_triv = minimal_triviality_on_set(m, states).alpha_star
    products = [ProductState([s]) for s in states]
    at = check_dp(m, products, set_triv)
    below = check_dp(m, products, max(0.0, set_triv - p["margin"]))
    agree = at.passed and (set_triv <= p["margin"] or not below.passed)
    agree = agree and abs(at.max_log_ratio - set_triv) <= 1e-9
    return {
        "dim": dim,
        "k": k,
        "states": len(states),
        "set_triviality": set_triv,
        "dp_threshold": at.max_log_ratio,
        "agree": bool(agree),
    }


def _dp_aggregate(p, recs):
    bad = sum(not r["agree"] for r in recs)
    gap = max(abs(r["set_triviality"] - r["dp_threshold"]) for r in recs)
    return {"disagreements": bad, "max_threshold_gap": gap}, bad == 0


KINDS: dict[str, Kind] = {
    "triviality-bound": Kind(
        {"max_dim": 8, "max_k": 5, "alphas": [0.1, 0.3, 0.5, 0.7, 0.9], "tolerance": 1e-9},
        ("dim", "k", "max_excess", "worst_alpha"),
        _triviality_trial,
        _triviality_aggregate,
    ),
    "estimator-concentration": Kind(
        {
            "k": 2,
            "dim": 2,
            "tau": 0.1,
            "alpha": 0.5,
            "delta": 0.05,
            "povm": "projective",
            "state": "random",
            "max_failure_fraction": 0.10,
        },
        ("n", "exact", "estimate", "signed_error", "failed"),
        _concentration_trial,
        _concentration_aggregate,
    ),
    "rejection-distortion": Kind(
        {"max_dim": 4, "max_k": 4, "max_epsilon": 1.5, "tau": 0.05, "epsilon_mode": "bound"},
        (
            "dim",
            "k",
            "epsilon",
            "min_p",
            "min_q",
            "tau_condition",
            "clamped_vectors",
            "max_rel_deviation",
            "multiplicative_violations",
            "additive_violations",
        ),
        _distortion_trial,
        _distortion_aggregate,
    ),
    "termination-rate": Kind(
        {"epsilon": 1.0, "tau": 0.05, "dim": 2, "k": 2},
        ("outcome", "iterations", "clamps"),
        _termination_trial,
        _termination_aggregate,
        _termination_setup,
    ),
    "parity-e2e": Kind(
        {"d": 8, "mode": "qldp", "epsilon": 1.0, "beta": 0.1, "tau": 0.2, "noise": "adversarial_extreme"},
        ("s", "recovered", "success", "generalization_error", "copies", "max_spent", "ledger_exact"),
        _parity_trial,
        _parity_aggregate,
    ),
    "dp-check-suite": Kind(
        {"max_dim": 4, "max_k": 4, "max_states": 5, "margin": 1e-6},
        ("dim", "k", "states", "set_triviality", "dp_threshold", "agree"),
        _dp_trial,
        _dp_aggregate,
    ),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    parameters: dict = field(default_factory=dict)
    master_seed: int = 0
    trials: int = 1
    parallelism: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; expected one of {sorted(KINDS)}")
        defaults = KINDS[self.kind].defaults
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ValidationError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        for name in ("trials", "parallelism"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ValidationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed!r}")

    @property
    def resolved(self) -> dict:
        return {**KINDS[self.kind].defaults, **self.parameters}

    @classmethod
    def from_mapping(cls, doc: dict) -> ExperimentConfig:
        allowed = {"kind", "parameters", "master_seed", "trials", "parallelism"}
        if not isinstance(doc, dict) or "kind" not in doc:
            raise ValidationError('config must be a mapping with a "kind" key')
        if set(doc) - allowed:
            raise ValidationError(f"unknown config keys: {sorted(set(doc) - allowed)}")
        return cls(**{**doc, "parameters": dict(doc.get("parameters") or {})})

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_mapping(read_config(path))


def read_config(path: str | Path) -> dict:
    """Read a YAML experiment config into a plain mapping."""
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ValidationError(f"{path}: invalid config ({e})") from e
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    return doc


@dataclass
class Report:
    config: dict
    records: list[dict]
    aggregates: dict
    passed: bool
    wall_clock_seconds: float
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


def _run_trial(kind: str, params: dict, instance: Any, master_seed: int, index: int) -> dict:
    rec: dict[str, Any] = {"trial": index, "error": None}
    try:
        rec.update(KINDS[kind].trial(params, instance, make_rng(master_seed, index)))
    except (QldpError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        rec["error"] = f"{type(e).__name__}: {e}"
    return rec


def run_experiment(config: ExperimentConfig) -> Report:
    """Execute all trials of ``config`` and evaluate its pass criterion."""
    kind = KINDS[config.kind]
    params = config.resolved
    start = time.perf_counter()
    instance = kind.setup(params, make_rng(config.master_seed, SETUP_STREAM))
    args = (config.kind, params, instance, config.master_seed)
    if config.parallelism == 1:
        records = [_run_trial(*args, i) for i in range(config.trials)]
    else:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [pool.submit(_run_trial, *args, i) for i in range(config.trials)]
            records = [f.result() for f in futures]
    records.sort(key=lambda r: r["trial"])
    ok = [r for r in records if r["error"] is None]
    errors = len(records) - len(ok)
    if ok:
        aggregates, passed = kind.aggregate(params, ok)
    else:
        aggregates, passed = {}, False
    aggregates = {"trials": len(records), "errors": errors, **aggregates}
    echo = {**asdict(config), "parameters": params}
    return Report(echo, records, aggregates, bool(passed and errors == 0), time.perf_counter() - start)


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(report: Report, path: str | Path) -> None:
    """One row per trial; the header line lists the columns in their fixed order."""
    columns = ("trial", "error") + KINDS[report.config["kind"]].columns
    path = Path(path)
    try:
        with path.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(columns)
            for r in report.records:
                w.writerow([_fmt(r.get(c)) for c in columns])
    except OSError as e:
        raise OSError(f"cannot write CSV to {path}: {e.strerror}") from e
