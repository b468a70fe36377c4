"""Command-line entry point: ``qldp <subcommand> ...``.

Exit codes: 0 pass, 1 internal error, 2 validation, 3 budget,
4 DP/triviality violation, 5 acceptance-threshold failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .core import ProductState
from .errors import QldpError, ValidationError
from .harness import ExperimentConfig, emit_csv, read_config, run_experiment
from .io import (
    jsonable,
    load_povm,
    load_product_state,
    load_qldp_plan,
    load_qsq_plan,
    load_state,
    matrix_to_json,
    write_json,
)
from .learning import (
    ExampleDistribution,
    ParityConcept,
    generalization_error,
    learn_parity_qldp,
    learn_parity_qsq,
    parity_copies_needed,
    quantum_example_state,
)
from .measurement import check_dp, minimal_triviality, minimal_triviality_on_set
from .oracles import NOISE_MODES, QsqOracle
from .protocols import simulate_noninteractive_qldp, simulate_nonadaptive_qsq
from .rng import make_rng

log = logging.getLogger("qldp")

SEED_ENV = "QLDP_SEED"
EXIT_VIOLATION = 4
EXIT_THRESHOLD = 5


def _default_seed() -> int | None:
    v = os.environ.get(SEED_ENV)
    if v is None:
        return None
    try:
        return int(v)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {v!r}") from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = _default_seed()
    return 0 if env is None else env


def _emit(doc: dict, path: str | None) -> None:
    if path:
        write_json(path, doc)
    else:
        json.dump(doc, sys.stdout, indent=2, default=jsonable)
        sys.stdout.write("\n")


def cmd_check_trivial(args) -> int:
    m = load_povm(args.povm)
    if args.states:
        cert = minimal_triviality_on_set(m, [load_state(p) for p in args.states])
        doc = cert.to_dict()
        doc["states"] = args.states
    else:
        cert = minimal_triviality(m)
        doc = cert.to_dict()
        doc["rho"] = matrix_to_json(cert.rho.matrix)
        doc["sigma"] = matrix_to_json(cert.sigma.matrix)
    _emit(doc, None)
    return 0


def cmd_check_dp(args) -> int:
    m = load_povm(args.povm)
    states: list[ProductState] = [load_product_state(p) for p in args.states]
    for p, s in zip(args.states, states):
        if len(s) != args.registers:
            raise ValidationError(f"{p}: expected {args.registers} registers, found {len(s)}")
    res = check_dp(m, states, args.alpha)
    _emit(res.to_dict(), None)
    return 0 if res.passed else EXIT_VIOLATION


def cmd_simulate_qsq(args) -> int:
    seed = _seed(args)
    plan = load_qsq_plan(args.queries)
    state = load_state(args.state)
    res = simulate_nonadaptive_qsq(plan, state, args.alpha, args.beta, make_rng(seed))
    doc = {"protocol": "qsq-via-qldp", "seed": seed, "alpha": args.alpha, "beta": args.beta, **res.to_dict()}
    _emit(doc, args.report)
    return 0


def cmd_simulate_qldp(args) -> int:
    seed = _seed(args)
    plan = load_qldp_plan(args.queries, args.epsilon)
    oracle = QsqOracle(load_state(args.state), make_rng(seed, 0), noise=args.noise)
    res = simulate_noninteractive_qldp(plan, oracle, args.beta, make_rng(seed, 1))
    doc = {
        "protocol": "qldp-via-qsq",
        "seed": seed,
        "epsilon": args.epsilon,
        "beta": args.beta,
        "noise": args.noise,
        **res.to_dict(),
        "total_clamps": sum(res.clamps),
    }
    _emit(doc, args.report)
    return 0


def cmd_learn_parity(args) -> int:
    seed = _seed(args)
    if args.random:
        c = ParityConcept.random(args.d, make_rng(seed, 0))
    else:
        c = ParityConcept(args.d, args.s)
    x = ExampleDistribution.uniform(args.d)
    state = quantum_example_state(c, x)
    doc = {"d": args.d, "mode": args.mode, "seed": seed, "tau": args.tau}
    if args.mode == "qsq":
        oracle = QsqOracle(state, make_rng(seed, 1), noise=args.noise)
        h = learn_parity_qsq(oracle, args.d, args.tau)
        doc.update(noise=args.noise, qsq_queries=oracle.query_count, copies_consumed=0)
    else:
        n = parity_copies_needed(args.d, args.epsilon, args.beta, args.tau)
        res = learn_parity_qldp([state] * n, args.d, args.epsilon, args.beta, args.tau, make_rng(seed, 1))
        h = res.concept
        doc.update(epsilon=args.epsilon, beta=args.beta, **res.to_dict())
    doc.update(
        target=c.s,
        recovered=h.s,
        correct=h == c,
        generalization_error=generalization_error(h, c, x),
    )
    _emit(doc, args.report)
    return 0


def cmd_experiment(args) -> int:
    doc = read_config(args.config)
    env = _default_seed()
    if env is not None:
        doc.setdefault("master_seed", env)
    for key, value in (("trials", args.trials), ("parallelism", args.parallelism), ("master_seed", args.seed)):
        if value is not None:
            doc[key] = value
    cfg = ExperimentConfig.from_mapping(doc)
    report = run_experiment(cfg)
    if args.out:
        write_json(args.out, report.to_dict())
    if args.csv:
        emit_csv(report, args.csv)
    status = "PASS" if report.passed else "FAIL"
    print(f"{cfg.kind}: {status} {json.dumps(report.aggregates, default=jsonable)}")
    return 0 if report.passed else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qldp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-trivial", help="minimal triviality of a POVM")
    s.add_argument("--povm", required=True)
    s.add_argument("--states", nargs="+", help="restrict to these states (default: all states)")
    s.set_defaults(func=cmd_check_trivial)

    s = sub.add_parser("check-dp", help="differential privacy of a POVM on a set of product states")
    s.add_argument("--povm", required=True)
    s.add_argument("--states", nargs="+", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--registers", type=int, required=True)
    s.set_defaults(func=cmd_check_dp)

    sim = sub.add_parser("simulate", help="run an oracle simulation protocol").add_subparsers(
        dest="protocol", required=True
    )
    s = sim.add_parser("qsq-via-qldp")
    s.add_argument("--state", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--report")
    s.set_defaults(func=cmd_simulate_qsq)

    s = sim.add_parser("qldp-via-qsq")
    s.add_argument("--state", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--noise", choices=NOISE_MODES, default="uniform")
    s.add_argument("--seed", type=int)
    s.add_argument("--report")
    s.set_defaults(func=cmd_simulate_qldp)

    learn = sub.add_parser("learn", help="learning demos").add_subparsers(dest="target", required=True)
    s = learn.add_parser("parity")
    s.add_argument("--d", type=int, required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--s")
    g.add_argument("--random", action="store_true")
    s.add_argument("--mode", choices=("qsq", "qldp"), default="qldp")
    s.add_argument("--epsilon", type=float, default=1.0)
    s.add_argument("--beta", type=float, default=0.1)
    s.add_argument("--tau", type=float, default=0.2)
    s.add_argument("--noise", choices=NOISE_MODES, default="uniform")
    s.add_argument("--seed", type=int)
    s.add_argument("--report")
    s.set_defaults(func=cmd_learn_parity)

    s = sub.add_parser("experiment", help="run a configured experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--csv")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--parallelism", type=int)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except QldpError as e:
        log.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except OSError as e:
        log.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
