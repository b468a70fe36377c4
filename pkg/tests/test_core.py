from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qldp import core
from qldp.core import (
    DensityMatrix,
    ProductState,
    computational_basis_density,
    pure_state_density,
    random_density_matrix,
    tensor,
    walsh_hadamard,
)
from qldp.errors import CapacityError, ValidationError
from qldp.rng import make_rng

H1 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
seeds = st.integers(0, 2**32 - 1)


def test_tensor_identity():
    assert np.array_equal(tensor(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_basis_projectors():
    assert np.array_equal(tensor(np.diag([1, 0]), np.diag([0, 1])), np.diag([0, 1, 0, 0]))


def test_tensor_of_hadamards_matches_direct_construction():
    direct = 0.5 * np.array(
        [
            [1, 1, 1, 1],
            [1, -1, 1, -1],
            [1, 1, -1, -1],
            [1, -1, -1, 1],
        ]
    )
    assert np.allclose(tensor(H1, H1), direct, atol=1e-12)
    assert np.allclose(walsh_hadamard(2), direct, atol=1e-12)


def test_tensor_capacity():
    with pytest.raises(CapacityError):
        tensor(np.eye(64), np.eye(65))
    assert tensor(np.eye(8), np.eye(4), max_dim=32).shape == (32, 32)
    with pytest.raises(CapacityError):
        tensor(np.eye(8), np.eye(8), max_dim=32)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_tensor_associative(seed):
    rng = make_rng(seed)
    a, b, c = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(3))
    assert np.allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)), atol=1e-12)


def test_walsh_hadamard_one_qubit():
    assert np.allclose(walsh_hadamard(1), H1, atol=1e-15)


@pytest.mark.parametrize("n", range(1, 8))
def test_walsh_hadamard_matches_kron_power(n):
    u = walsh_hadamard(n)
    assert np.allclose(u, reduce(np.kron, [H1] * n), atol=1e-12)
    assert np.allclose(u @ u.conj().T, np.eye(2**n), atol=1e-9)
    assert np.array_equal(u, u.T)
    assert np.allclose(u @ u, np.eye(2**n), atol=1e-12)


def test_walsh_hadamard_column_zero():
    assert np.allclose(walsh_hadamard(3)[:, 0], 2**-1.5, atol=1e-15)


def test_walsh_hadamard_cap():
    with pytest.raises(CapacityError):
        walsh_hadamard(13)
    with pytest.raises(ValidationError):
        walsh_hadamard(0)


def test_pure_state_examples():
    assert np.allclose(pure_state_density([1, 0]).matrix, np.diag([1, 0]))
    assert np.allclose(pure_state_density([2**-0.5, 2**-0.5]).matrix, 0.5)
    bell = np.zeros((4, 4))
    bell[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.allclose(pure_state_density([2**-0.5, 0, 0, 2**-0.5]).matrix, bell, atol=1e-15)


def test_pure_state_rejects_unnormalized():
    with pytest.raises(ValidationError):
        pure_state_density([1, 1])


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 16))
def test_pure_state_idempotent_rank_one(seed, dim):
    rng = make_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    rho = pure_state_density(v / np.linalg.norm(v)).matrix
    assert np.allclose(rho @ rho, rho, atol=1e-9)
    assert np.linalg.matrix_rank(rho, tol=1e-9) == 1
    assert abs(np.trace(rho) - 1) < 1e-12


@pytest.mark.parametrize(
    "n, bits, diag",
    [(1, "0", [1, 0]), (2, "00", [1, 0, 0, 0]), (2, "11", [0, 0, 0, 1]), (2, "10", [0, 0, 1, 0])],
)
def test_computational_basis_density(n, bits, diag):
    assert np.array_equal(computational_basis_density(n, bits).matrix, np.diag(diag))


def test_computational_basis_density_bad_bits():
    with pytest.raises(ValidationError):
        computational_basis_density(2, "1")
    with pytest.raises(ValidationError):
        computational_basis_density(2, "1x")


def test_random_density_dim_one():
    assert np.allclose(random_density_matrix(1, make_rng(0)).matrix, [[1]])


def test_random_density_deterministic():
    a = random_density_matrix(2, make_rng(42)).matrix
    b = random_density_matrix(2, make_rng(42)).matrix
    assert np.array_equal(a, b)
    assert not np.array_equal(a, random_density_matrix(2, make_rng(43)).matrix)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 12))
def test_random_density_valid(seed, dim):
    rho = random_density_matrix(dim, make_rng(seed)).matrix
    lam = np.linalg.eigvalsh(rho)
    assert abs(np.trace(rho).real - 1) <= 1e-9
    assert lam[0] >= -1e-9 * dim and lam[-1] <= 1 + 1e-9


def test_density_validation():
    with pytest.raises(ValidationError, match="trace"):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValidationError, match="positive semidefinite"):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError, match="Hermitian"):
        DensityMatrix([[0.5, 0.1], [0.0, 0.5]])
    with pytest.raises(ValidationError):
        DensityMatrix(np.ones((2, 3)) / 2)
    with pytest.raises(ValidationError):
        DensityMatrix([[np.nan, 0], [0, 1]])


def test_density_symmetrizes_roundoff():
    m = np.array([[0.5, 0.1 + 1e-10], [0.1, 0.5]])
    rho = DensityMatrix(m).matrix
    assert np.array_equal(rho, rho.conj().T)
    assert not rho.flags.writeable


def test_product_state():
    a = computational_basis_density(1, "0")
    b = computational_basis_density(1, "1")
    ps = ProductState([a, b])
    assert ps.dims == (2, 2) and ps.total_dim == 4
    assert np.array_equal(ps.joint().matrix, np.diag([0, 1, 0, 0]))
    with pytest.raises(ValidationError):
        ProductState([])
    big = ProductState([random_density_matrix(2, make_rng(i)) for i in range(13)])
    with pytest.raises(CapacityError):
        big.joint()


def test_capacity_configurable(monkeypatch):
    monkeypatch.setattr(core, "MAX_DIM", 8)
    with pytest.raises(CapacityError):
        computational_basis_density(4, "0000")
