import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tdbem_contact.assembly import BlockLowerToeplitz
from tdbem_contact.errors import SingularBlockError
from tdbem_contact.mot_solver import factorize, march

from .oracles import dense_lower_toeplitz


def _random_blocks(rng, N, n, cond=10.0):
    blocks = rng.standard_normal((N, n, n)) / np.sqrt(n)
    blocks[0] += cond * np.eye(n) / 3
    return blocks


def test_factorize_identity():
    fac = factorize(np.eye(5))
    b = np.arange(5.0)
    np.testing.assert_array_equal(fac.solve(b), b)


def test_factorize_diagonal_example():
    np.testing.assert_allclose(factorize(np.diag([2.0, 4.0])).solve(np.array([2.0, 8.0])), [1.0, 2.0])


def test_factorize_random_residual(rng):
    A = rng.standard_normal((20, 20)) + 8 * np.eye(20)
    fac = factorize(A)
    for _ in range(5):
        b = rng.standard_normal(20)
        x = fac.solve(b)
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-12


def test_factorize_reports_singular_pivot():
    with pytest.raises(SingularBlockError, match="pivot"):
        factorize(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ValueError):
        factorize(np.ones((2, 3)))


def test_march_identity_system(rng):
    blocks = np.zeros((5, 3, 3))
    blocks[0] = np.eye(3)
    F = rng.standard_normal((5, 3))
    np.testing.assert_array_equal(march(BlockLowerToeplitz.from_blocks(blocks), F), F)


def test_march_single_step_is_one_solve(rng):
    A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    F = rng.standard_normal((1, 4))
    X = march(BlockLowerToeplitz.from_blocks(A[None]), F)
    np.testing.assert_array_equal(X[0], factorize(A).solve(F[0]))


@pytest.mark.parametrize("rows", [None, 2])
def test_march_matches_dense_monolithic_solve(rng, rows):
    N, n = 4, 6
    blocks = _random_blocks(rng, N, n)
    if rows is not None:
        blocks[1:, rows:] = 0.0
    S = BlockLowerToeplitz.from_blocks(blocks, rows=rows)
    F = rng.standard_normal((N, n))
    X = march(S, F)
    ref = np.linalg.solve(dense_lower_toeplitz(blocks), F.ravel()).reshape(N, n)
    assert np.linalg.norm(X - ref) / np.linalg.norm(ref) < 1e-10
    A = dense_lower_toeplitz(blocks)
    assert np.linalg.norm(A @ X.ravel() - F.ravel()) / np.linalg.norm(F) < 1e-9


def test_march_several_right_hand_sides(rng):
    blocks = _random_blocks(rng, 3, 4)
    S = BlockLowerToeplitz.from_blocks(blocks)
    F = rng.standard_normal((3, 4, 5))
    X = march(S, F)
    for k in range(5):
        np.testing.assert_allclose(X[..., k], march(S, F[..., k]), rtol=1e-13, atol=1e-14)


def test_march_partial_horizon(rng):
    blocks = _random_blocks(rng, 6, 3)
    S = BlockLowerToeplitz.from_blocks(blocks)
    F = rng.standard_normal((6, 3))
    np.testing.assert_array_equal(march(S, F, n_steps=4), march(S, F)[:4])


def test_march_rejects_bad_rhs(rng):
    S = BlockLowerToeplitz.from_blocks(_random_blocks(rng, 3, 4))
    with pytest.raises(ValueError):
        march(S, np.zeros((3, 5)))


def test_march_reproducible_bitwise(rng):
    blocks = _random_blocks(rng, 8, 5)
    S = BlockLowerToeplitz.from_blocks(blocks)
    F = rng.standard_normal((8, 5))
    assert march(S, F).tobytes() == march(S, F).tobytes()


@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2 ** 31))
def test_march_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    S = BlockLowerToeplitz.from_blocks(_random_blocks(rng, 4, 5))
    F1, F2 = rng.standard_normal((2, 4, 5))
    lhs = march(S, a * F1 + b * F2)
    rhs = a * march(S, F1) + b * march(S, F2)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), 1e-300) + 1e-13


def test_march_cost_quadratic_in_steps(rng):
    n = 60

    def timed(N):
        S = BlockLowerToeplitz.from_blocks(_random_blocks(rng, N, n))
        F = rng.standard_normal((N, n))
        best = np.inf
        for _ in range(5):
            t = time.perf_counter()
            march(S, F)
            best = min(best, time.perf_counter() - t)
        return best
    t1, t2 = timed(400), timed(800)
    assert t2 / t1 <= 4.5
