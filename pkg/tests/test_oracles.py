import math

import numpy as np
import pytest
from conftest import KET0, KET1, MIXED, coin_povm, tilted_pair

from qldp.core import ProductState, random_density_matrix
from qldp.errors import BudgetExceeded, NotTrivialEnough, ValidationError
from qldp.measurement import expectation, outcome_probabilities, random_povm
from qldp.oracles import QldpOracle, QsqOracle
from qldp.protocols import privatize_povm, triviality_bound
from qldp.rng import make_rng


def test_qsq_exact_mode(projective_pair):
    o = QsqOracle(MIXED, make_rng(0), noise="exact")
    assert o.query(projective_pair, 0.1) == 1.5
    assert o.query_count == 1
    assert o.log[0].tau == 0.1 and o.log[0].answer == 1.5


def test_qsq_zero_tolerance_is_exact(projective_pair):
    for noise in ("uniform", "adversarial_extreme"):
        o = QsqOracle(MIXED, make_rng(0), noise=noise)
        assert o.query(projective_pair, 0.0) == pytest.approx(1.5, abs=1e-15)


def test_qsq_adversarial_answers(projective_pair):
    o = QsqOracle(MIXED, make_rng(3), noise="adversarial_extreme")
    answers = np.array([o.query(projective_pair, 0.1) for _ in range(200)])
    low = np.isclose(answers, 1.4, rtol=0, atol=1e-12)
    high = np.isclose(answers, 1.6, rtol=0, atol=1e-12)
    assert np.all(low | high)
    assert low.any() and high.any()


@pytest.mark.parametrize("noise", ["exact", "uniform", "adversarial_extreme"])
def test_qsq_answers_stay_in_band(noise):
    rng = make_rng(11)
    for _ in range(50):
        m = random_povm(3, 4, rng)
        rho = random_density_matrix(3, rng)
        o = QsqOracle(rho, rng, noise=noise)
        tau = float(rng.uniform(0, 0.5))
        a = o.query(m, tau)
        assert abs(a - expectation(m, rho)) <= tau  # exact, no slack


def test_qsq_uniform_noise_spreads(projective_pair):
    o = QsqOracle(MIXED, make_rng(4), noise="uniform")
    a = np.array([o.query(projective_pair, 0.2) for _ in range(5000)])
    assert abs(a.mean() - 1.5) < 0.01
    assert a.min() < 1.32 and a.max() > 1.68


def test_qsq_validation(projective_pair):
    with pytest.raises(ValidationError):
        QsqOracle(MIXED, make_rng(0), noise="loud")
    o = QsqOracle(MIXED, make_rng(0))
    for tau in (-0.1, math.nan, math.inf):
        with pytest.raises(ValidationError):
            o.query(projective_pair, tau)
    with pytest.raises(ValidationError):
        o.query(random_povm(3, 2, make_rng(0)), 0.1)
    assert o.query_count == 0


def test_qldp_budget_examples():
    o = QldpOracle([MIXED, MIXED], 1.0, make_rng(0))
    o.query(0, coin_povm(), 0.6)
    with pytest.raises(BudgetExceeded):
        o.query(0, coin_povm(), 0.6)
    assert o.remaining_budget(0) == pytest.approx(0.4)
    o.query(1, coin_povm(), 0.3)
    assert o.remaining_budget(1) == pytest.approx(0.7)
    assert list(o.charges) == [1, 1]


def test_qldp_exact_budget_is_allowed():
    o = QldpOracle([MIXED], 1.0, make_rng(0))
    for _ in range(10):
        o.query(0, coin_povm(), 0.1)
    assert o.remaining_budget(0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(BudgetExceeded):
        o.query(0, coin_povm(), 1e-9)


def test_qldp_refuses_underdeclared_triviality():
    o = QldpOracle([KET0], 5.0, make_rng(0))
    with pytest.raises(NotTrivialEnough):
        o.query(0, tilted_pair(), 1.0)
    assert o.query(0, tilted_pair(), math.log(3)) in (1.0, 2.0)


def test_qldp_refuses_projective(projective_pair):
    o = QldpOracle([KET0], 1e6, make_rng(0))
    with pytest.raises(NotTrivialEnough):
        o.query(0, projective_pair, 1e5)


def _rng_state(rng):
    st = rng.bit_generator.state
    return {k: (_flat(v) if isinstance(v, dict) else np.array(v).tolist()) for k, v in st.items()}


def _flat(d):
    return {k: np.array(v).tolist() for k, v in d.items()}


def _state(o):
    return (_rng_state(o.rng), o.ledger.copy(), o.charges.copy())


def _same(a, b):
    return a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])


@pytest.mark.parametrize(
    "call, exc",
    [
        (lambda o: o.query(0, tilted_pair(), 1.0), NotTrivialEnough),
        (lambda o: o.query(0, coin_povm(), 0.9), BudgetExceeded),
        (lambda o: o.query(2, coin_povm(), 0.1), ValidationError),
        (lambda o: o.query(True, coin_povm(), 0.1), ValidationError),
        (lambda o: o.query(0, coin_povm(3), 0.1), ValidationError),
        (lambda o: o.query(0, coin_povm(), -0.1), ValidationError),
        (lambda o: o.query_many([1, 0, 0], coin_povm(), 0.4), BudgetExceeded),
        (lambda o: o.query_many([1, 5], coin_povm(), 0.1), ValidationError),
    ],
)
def test_rejected_query_has_no_side_effects(call, exc):
    o = QldpOracle([KET0, KET1], 1.0, make_rng(2))
    o.query(0, coin_povm(), 0.3)
    before = _state(o)
    with pytest.raises(exc):
        call(o)
    assert _same(before, _state(o))
    assert o.remaining_budget(0) == pytest.approx(0.7)


def test_query_many_matches_sequential():
    rng = make_rng(8)
    states = [random_density_matrix(2, rng) for _ in range(3)]
    regs = [states[i % 3] for i in range(300)]
    m = privatize_povm(random_povm(2, 3, rng), 0.5)
    a = triviality_bound(0.5, 3)
    seq = QldpOracle(regs, a, make_rng(9))
    bat = QldpOracle(regs, a, make_rng(9))
    order = list(range(299, -1, -1))
    s = np.array([seq.query(j, m, a) for j in order])
    b = bat.query_many(order, m, a)
    assert np.array_equal(s, b)
    assert np.array_equal(seq.ledger, bat.ledger)
    assert np.array_equal(seq.charges, bat.charges)
    assert _rng_state(seq.rng) == _rng_state(bat.rng)


def test_query_many_empty():
    o = QldpOracle([MIXED], 1.0, make_rng(0))
    assert o.query_many([], coin_povm(), 0.1).size == 0
    assert o.charges.sum() == 0


def test_qldp_outcome_frequencies():
    rng = make_rng(21)
    m = privatize_povm(random_povm(3, 4, rng), 0.7)
    rho = random_density_matrix(3, rng)
    a = triviality_bound(0.7, 4)
    n = 100_000
    o = QldpOracle(ProductState([rho] * n), a, make_rng(22))
    labels = o.query_many(range(n), m, a)
    freq = np.bincount(labels.astype(int) - 1, minlength=4) / n
    assert 0.5 * np.abs(freq - outcome_probabilities(m, rho)).sum() <= 0.01
    assert o.ledger_snapshot()["max_charges_per_register"] == 1


def test_qldp_constructor_validation():
    with pytest.raises(ValidationError):
        QldpOracle([MIXED], -1.0, make_rng(0))
    with pytest.raises(ValidationError):
        QldpOracle([MIXED], math.inf, make_rng(0))
    o = QldpOracle(ProductState([KET0, MIXED]), 0.0, make_rng(0))
    assert len(o) == 2
    assert o.query(1, coin_povm(), 0.0) in (1.0, 2.0)


def test_ledger_snapshot():
    o = QldpOracle([MIXED] * 4, 2.0, make_rng(0))
    o.query_many([0, 2], coin_povm(), 0.5)
    o.query(2, coin_povm(), 0.5)
    snap = o.ledger_snapshot()
    assert snap == {
        "budget": 2.0,
        "registers": 4,
        "registers_used": 2,
        "max_spent": 1.0,
        "max_charges_per_register": 2,
    }
