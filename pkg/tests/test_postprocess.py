import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tdbem_contact.assembly import BlockLowerToeplitz
from tdbem_contact.geometry import Material, TimeGrid, build_dof_layout, square_mesh
from tdbem_contact.postprocess import (energy, eval_interior, example1_exact, l2_spacetime_error,
                                       nodal_trace, observed_orders, reconstruct_displacement,
                                       richardson_reference, write_trace_csv)

from .oracles import dense_lower_toeplitz

EX1 = Material(rho=1.0, cP=1.0, cS=1.0 / math.sqrt(2.0))


# ---------------------------------------------------------------- reconstruct

def test_reconstruct_zero_and_single_ramp():
    grid = TimeGrid(1.0, 4)
    assert np.all(reconstruct_displacement(np.zeros((4, 3)), grid) == 0)
    U = np.zeros((4, 2, 3))
    U[0, 1, 2] = 1.0
    tr = reconstruct_displacement(U, grid)
    np.testing.assert_array_equal(tr[:, 1, 2], [0, 1, 1, 1, 1])
    assert np.count_nonzero(tr) == 4


@given(st.integers(0, 2 ** 31), st.floats(-5, 5), st.floats(-5, 5))
def test_reconstruct_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    U1, U2 = rng.standard_normal((2, 6, 4))
    lhs = reconstruct_displacement(a * U1 + b * U2)
    rhs = a * reconstruct_displacement(U1) + b * reconstruct_displacement(U2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


# ---------------------------------------------------------------- energy

def test_energy_trivial_examples():
    S = BlockLowerToeplitz.from_blocks(np.eye(2)[None])
    assert energy(np.array([[3.0, 4.0]]), S).total == 25.0
    assert energy(np.zeros((1, 2)), S).total == 0.0


def test_energy_matches_dense_quadratic_form(rng):
    N, n = 5, 4
    blocks = rng.standard_normal((N, n, n))
    S = BlockLowerToeplitz.from_blocks(blocks)
    X = rng.standard_normal((N, n))
    rep = energy(X, S)
    A = dense_lower_toeplitz(blocks)
    ref = X.ravel() @ A @ X.ravel()
    assert abs(rep.total - ref) <= 1e-12 * abs(ref)
    assert rep.total == rep.cumulative[-1]
    for k in range(1, N + 1):
        m = k * n
        sub = X[:k].ravel() @ A[:m, :m] @ X[:k].ravel()
        assert abs(rep.cumulative[k - 1] - sub) <= 1e-12 * max(1.0, abs(sub))


# ---------------------------------------------------------------- L2 errors

@pytest.fixture(scope="module")
def sq():
    mesh = square_mesh(0.25)
    grid = TimeGrid(1.0, 4)
    return mesh, grid, build_dof_layout(mesh, grid)


def _sampled_trace(fun, mesh, grid, lay):
    x = mesh.vertices[lay.u_vertices]
    tr = np.zeros((grid.n_steps + 1, 2, lay.n_u))
    for k, t in enumerate(grid.times):
        tr[k] = np.asarray(fun(x, np.full(len(x), t))).T
    return tr


def test_l2_exact_sample_is_zero(sq):
    mesh, grid, lay = sq

    def f(x, t):       # bilinear in (space along a side, time): reproduced exactly
        return np.stack([x[..., 0] * t, 2 * x[..., 1] - t], axis=-1)
    tr = _sampled_trace(f, mesh, grid, lay)
    assert l2_spacetime_error(tr, f, mesh, grid, lay) < 1e-13


def test_l2_constant_difference_closed_form(sq):
    mesh, grid, lay = sq
    c = 0.3
    tr = np.zeros((grid.n_steps + 1, 2, lay.n_u))
    tr[:, 1] = c
    zero = lambda x, t: np.zeros(np.shape(x))
    val = l2_spacetime_error(tr, zero, mesh, grid, lay)
    assert val == pytest.approx(c * math.sqrt(4.0 * 1.0), rel=1e-13)
    assert l2_spacetime_error(tr, zero, mesh, grid, lay, component=0) == 0.0


@given(st.integers(0, 2 ** 31))
def test_l2_triangle_inequality(seed):
    mesh = square_mesh(0.5)
    grid = TimeGrid(1.0, 2)
    lay = build_dof_layout(mesh, grid)
    rng = np.random.default_rng(seed)
    a, b, c = rng.standard_normal((3, 3, 2, lay.n_u))
    zero = lambda x, t: np.zeros(np.shape(x))

    def d(p, q):
        return l2_spacetime_error(p - q, zero, mesh, grid, lay)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


# ---------------------------------------------------------------- rates

def test_richardson_examples():
    hs = [0.1, 0.05, 0.025]
    E, p = richardson_reference(*[1 + h for h in hs])
    assert E == pytest.approx(1.0, abs=1e-12) and p == pytest.approx(1.0, abs=1e-10)
    E, p = richardson_reference(*[2 + 3 * h * h for h in hs])
    assert E == pytest.approx(2.0, abs=1e-12) and p == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(ValueError):
        richardson_reference(1.0, 2.0, 1.5)


@given(st.floats(0.5, 3.0), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-2), st.floats(-10, 10))
def test_richardson_recovers_power_law(p, C, E):
    hs = [0.2, 0.1, 0.05]
    Es, ps = richardson_reference(*[E + C * h ** p for h in hs])
    assert ps == pytest.approx(p, rel=1e-6)
    assert Es == pytest.approx(E, abs=1e-8 * (1 + abs(E) + abs(C)))


def test_observed_orders():
    rates, slope = observed_orders([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4])
    np.testing.assert_allclose(rates, [2.0, 2.0])
    assert slope == pytest.approx(2.0)


# ---------------------------------------------------------------- Example 1 formula

def test_example1_exact_causal_and_printed():
    x = np.array([[0.0, 0.5], [0.0, -0.5], [0.0, 0.0]])
    # top midpoint at t = 1: 1
    assert example1_exact(x[0], 1.0)[1] == pytest.approx(1.0)
    # zero initial state for the causal form, not for the printed one
    np.testing.assert_array_equal(example1_exact(x, np.zeros(3))[:, 1], 0.0)
    assert example1_exact(x[1], 0.0, printed=True)[1] == pytest.approx(1.0)
    # the two agree on the top side
    t = np.linspace(0, 2, 9)
    top = np.tile(x[0], (9, 1))
    np.testing.assert_allclose(example1_exact(top, t), example1_exact(top, t, printed=True))
    # interior point (0,0), t = 1: causal 0.5, printed 1.5
    assert example1_exact(x[2], 1.0)[1] == pytest.approx(0.5)
    assert example1_exact(x[2], 1.0, printed=True)[1] == pytest.approx(1.5)


# ---------------------------------------------------------------- interior

def test_interior_zero_densities(sq):
    mesh, grid, lay = sq
    U = np.zeros((4, 2, lay.n_u))
    Psi = np.zeros((4, 2, lay.n_psi))
    np.testing.assert_array_equal(eval_interior([0.0, 0.0], 0.9, U, Psi, mesh, grid, EX1, lay), 0.0)


def test_interior_causality(sq, rng):
    mesh, grid, lay = sq
    U = rng.standard_normal((4, 2, lay.n_u))
    Psi = rng.standard_normal((4, 2, lay.n_psi))
    # dist((0,0), Gamma) = 0.5 > cP t
    np.testing.assert_array_equal(eval_interior([0.0, 0.0], 0.45, U, Psi, mesh, grid, EX1, lay), 0.0)
    assert np.any(eval_interior([0.0, 0.0], 0.75, U, Psi, mesh, grid, EX1, lay) != 0)


def test_interior_warns_near_boundary(sq):
    mesh, grid, lay = sq
    U = np.zeros((4, 2, lay.n_u))
    Psi = np.zeros((4, 2, lay.n_psi))
    with pytest.warns(RuntimeWarning, match="closer"):
        eval_interior([0.0, 0.45], 0.5, U, Psi, mesh, grid, EX1, lay)


def test_trace_csv_17_digits(tmp_path):
    tr = np.full((2, 2, 1), 1.0 / 3.0)
    p = tmp_path / "t.csv"
    write_trace_csv(str(p), [0.0, 0.5], tr, ["mid"])
    lines = p.read_text().splitlines()
    assert lines[0] == "t,node,u1,u2"
    assert lines[1].split(",")[2] == format(1 / 3, ".17g")
