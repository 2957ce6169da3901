import math

import numpy as np
import pytest

from tdbem_contact.errors import WavefrontError
from tdbem_contact.geometry import Material, TimeGrid
from tdbem_contact.kernels import (eval_G, eval_traction_kernels, green_antiderivative,
                                   time_convolved_kernel, traction_from_gradient)

from .oracles import G1, G2, V_lag_time_pairing, fd_gradient, green_mp

EX1 = Material(rho=1.0, cP=1.0, cS=1.0 / math.sqrt(2.0))
EX2 = Material(rho=1.0, cP=2.0, cS=1.0)


def test_G_causal_zero():
    assert np.all(eval_G(np.array([0.3, 0.0]), 0.2, EX1) == 0)


def test_G_symmetric():
    G = eval_G(np.array([0.1, 0.1]), 0.5, EX1)
    assert G[0, 1] == G[1, 0]


@pytest.mark.parametrize("r,t", [((0.1, 0.0), 0.5), ((0.1, 0.1), 0.5), ((-0.2, 0.05), 0.25),
                                 ((0.3, -0.4), 0.6)])
def test_G_matches_multiprecision_oracle(r, t):
    pytest.importorskip("mpmath")
    G = eval_G(np.array(r), t, EX1)
    ref = np.array(green_mp(r, t, EX1), dtype=float)
    np.testing.assert_allclose(G, ref, rtol=1e-12, atol=1e-14 * np.abs(ref).max())


def test_G_guard_near_wavefront():
    with pytest.raises(WavefrontError):
        eval_G(np.array([0.5, 0.0]), 0.5 + 1e-15, EX1)


@pytest.mark.parametrize("mat", [EX1, EX2], ids=["ex1", "ex2"])
@pytest.mark.parametrize("r,s", [((0.1, 0.0), 0.5), ((0.05, 0.2), 0.3), ((0.3, -0.1), 0.25)])
def test_first_antiderivative_matches_adaptive_time_quadrature(mat, r, s):
    ref = G1(r, s, mat)
    val = green_antiderivative(1, np.array(r), s, mat)[0]
    np.testing.assert_allclose(val, ref, atol=1e-10 * max(1, np.abs(ref).max()))


@pytest.mark.parametrize("r,s", [((0.1, 0.0), 0.5), ((0.2, 0.15), 0.3)])
def test_second_antiderivative_matches_quadrature(r, s):
    ref = G2(r, s, EX2)
    val = green_antiderivative(2, np.array(r), s, EX2)[0]
    np.testing.assert_allclose(val, ref, atol=1e-10)


@pytest.mark.parametrize("n,derivs", [(2, 1), (3, 1), (3, 2)])
def test_antiderivative_spatial_derivatives_match_finite_differences(n, derivs):
    r = np.array([0.13, -0.07])
    s = 0.4
    out = green_antiderivative(n, r, s, EX1, derivs=derivs)
    fd = fd_gradient(lambda q: green_antiderivative(n, q, s, EX1, derivs=derivs - 1)[-1], r)
    np.testing.assert_allclose(out[derivs], fd, atol=1e-7)


def test_antiderivative_time_derivative_is_lower_order():
    r = np.array([0.1, 0.05])
    s, h = 0.4, 1e-6
    for n in (2, 3):
        hi = green_antiderivative(n, r, s + h, EX1)[0]
        lo = green_antiderivative(n, r, s - h, EX1)[0]
        np.testing.assert_allclose((hi - lo) / (2 * h), green_antiderivative(n - 1, r, s, EX1)[0],
                                   atol=1e-7)


def test_traction_kernels_causal_zero():
    k = eval_traction_kernels(np.array([0.5, 0.1]), 0.3, EX1, np.array([0, 1.0]), np.array([1.0, 0]))
    assert all(np.all(v == 0) for v in k.values())


def _pointwise_fd(r, t, mat, n_y, n_x):
    dG = fd_gradient(lambda q: eval_G(q, t, mat), r, h=1e-6)
    return (traction_from_gradient(dG, n_y, mat, side="y"),
            traction_from_gradient(dG, n_x, mat, side="x"))


def test_traction_kernels_match_finite_differences_of_G():
    r = np.array([0.12, 0.05])
    t = 0.5
    ny = np.array([0.6, 0.8])
    nx = np.array([0.0, 1.0])
    k = eval_traction_kernels(r, t, EX1, ny, nx)
    K, Ks = _pointwise_fd(r, t, EX1, ny, nx)
    np.testing.assert_allclose(k["Kkernel"], K, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(k["KstarKernel"], Ks, rtol=1e-6, atol=1e-8)


def test_K_and_Kstar_adjoint_under_exchange():
    r = np.array([0.12, 0.05])
    n1 = np.array([0.6, 0.8])
    n2 = np.array([0.0, 1.0])
    a = eval_traction_kernels(r, 0.5, EX1, n_y=n1, n_x=n2)["Kkernel"]        # [l, i]
    b = eval_traction_kernels(-r, 0.5, EX1, n_y=n2, n_x=n1)["KstarKernel"]   # [i, l]
    np.testing.assert_allclose(a, b.T, rtol=1e-12, atol=1e-14)


def test_W_symmetric_under_exchange():
    r = np.array([0.12, 0.05])
    n1 = np.array([0.6, 0.8])
    n2 = np.array([0.0, 1.0])
    a = eval_traction_kernels(r, 0.5, EX1, n_y=n1, n_x=n2)["Wkernel"]
    b = eval_traction_kernels(-r, 0.5, EX1, n_y=n2, n_x=n1)["Wkernel"]
    np.testing.assert_allclose(a, b.T, rtol=1e-10, atol=1e-12)


def test_W_matches_second_finite_differences():
    r = np.array([0.12, 0.05])
    t = 0.5
    ny, nx = np.array([0.6, 0.8]), np.array([0.0, 1.0])
    W = eval_traction_kernels(r, t, EX1, ny, nx)["Wkernel"]

    def Kfun(q):
        return eval_traction_kernels(q, t, EX1, ny, nx)["Kkernel"]
    dK = fd_gradient(Kfun, r, h=1e-6)        # [l, i, m]
    lam, mu = EX1.lam, EX1.mu
    divK = np.einsum("lil->i", dK)
    ref = (lam * nx[:, None] * divK[None, :] + mu * (np.einsum("lik,l->ki", dK, nx)
                                                     + np.einsum("kil,l->ki", dK, nx)))
    np.testing.assert_allclose(W, ref, rtol=1e-5, atol=1e-6)


def test_time_convolved_outside_light_cone_is_zero():
    grid = TimeGrid(1.0, 10)
    r = np.array([0.35, 0.0])      # cP t_{l+1} = 0.3 < |r| for l = 2
    for kind in ("V", "K", "Kstar", "W"):
        B = time_convolved_kernel(kind, r, 1, grid, EX1, n_y=np.array([0, 1.0]),
                                  n_x=np.array([0, 1.0]))
        assert np.all(B == 0)


def test_time_convolved_depends_on_lag_only():
    r = np.array([0.12, 0.05])
    a = time_convolved_kernel("V", r, 3, TimeGrid(0.5, 5), EX1)
    b = time_convolved_kernel("V", r, 3, TimeGrid(2.0, 20), EX1)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("lag", [0, 1, 2, 3])
@pytest.mark.parametrize("r", [(0.05, 0.0), (0.1, 0.12), (0.3, 0.0)])
def test_time_convolved_V_matches_time_quadrature(lag, r):
    grid = TimeGrid(1.0, 10)
    val = time_convolved_kernel("V", np.array(r), lag, grid, EX1)
    ref = V_lag_time_pairing(r, lag, grid.dt, EX1)
    np.testing.assert_allclose(val, ref, atol=1e-8)


@pytest.mark.parametrize("lag", [0, 2])
def test_time_convolved_K_matches_differentiated_time_quadrature(lag):
    # K(l) = traction of D2[grad G^[2]] / dt with G^[2] from the quadrature oracle
    grid = TimeGrid(1.0, 10)
    dt = grid.dt
    r = np.array([0.1, 0.08])
    ny = np.array([0.0, 1.0])

    def D2(q):
        return sum(c * (G2(q, (lag + k) * dt, EX1) if lag + k > 0 else 0.0)
                   for k, c in ((1, 1.0), (0, -2.0), (-1, 1.0)))
    dG = fd_gradient(D2, r, h=1e-5)
    ref = traction_from_gradient(dG, ny, EX1, side="y") / dt
    val = time_convolved_kernel("K", r, lag, grid, EX1, n_y=ny)
    np.testing.assert_allclose(val, ref, atol=1e-7)
