import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tdbem_contact.assembly import assemble_rhs, assemble_S_blocks
from tdbem_contact.config import preset
from tdbem_contact.contact import (ContactResponse, UzawaConfig, assemble_coupling,
                                   complementarity_residual, contact_frames, project_prC, uzawa_solve)
from tdbem_contact.errors import ConfigError, UzawaDivergence, UzawaNonConvergence
from tdbem_contact.geometry import Material, TimeGrid, build_dof_layout, slit_mesh, square_mesh
from tdbem_contact.mot_solver import factorize, march
from tdbem_contact.postprocess import reconstruct_displacement

from .toy import build_toy


@pytest.fixture(scope="module")
def toy():
    return build_toy()


def test_uzawa_config_validation():
    for kw in ({"rho": 0, "eps": 1e-5}, {"rho": 1, "eps": 0}, {"rho": 1, "eps": 1, "max_iter": 0}):
        with pytest.raises(ConfigError):
            UzawaConfig(**kw)


# ---------------------------------------------------------------- projection

def test_project_examples():
    np.testing.assert_array_equal(project_prC(np.array([-1.0, 2.0]), [0]), [0.0, 0.0])
    np.testing.assert_array_equal(project_prC(np.array([3.0, -4.0]), [0, 1]), [3.0, 0.0])
    np.testing.assert_array_equal(project_prC(np.zeros(4), [1, 3]), np.zeros(4))


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=12), st.data())
def test_project_idempotent_and_feasible(vals, data):
    W = np.array(vals)
    idx = data.draw(st.lists(st.integers(0, len(W) - 1), unique=True))
    P = project_prC(W, idx)
    np.testing.assert_array_equal(project_prC(P, idx), P)
    assert np.all(P[idx] >= 0)
    mask = np.ones(len(W), bool)
    mask[idx] = False
    assert np.all(P[mask] == 0)
    # non-expansive
    V = W[::-1].copy()
    assert np.linalg.norm(project_prC(V, idx) - P) <= np.linalg.norm(V - W) + 1e-9


# ---------------------------------------------------------------- coupling

def test_coupling_zero_gap_and_shapes():
    mesh = slit_mesh(0.1)
    grid = TimeGrid(0.5, 5)
    lay = build_dof_layout(mesh, grid)
    cp = assemble_coupling(mesh, grid, lay)
    assert cp.A.shape == (2 * lay.n_lambda, 2 * lay.n_u)
    assert np.all(cp.G == 0) and np.all(cp.MG == 0)
    L = np.random.default_rng(1).standard_normal((5, 2 * lay.n_lambda))
    assert np.all(cp.mstar(L)[:, :2 * lay.n_psi] == 0)


def test_coupling_horizontal_element_half_length():
    h = 0.1
    mesh = slit_mesh(h)
    grid = TimeGrid(0.5, 5)
    lay = build_dof_layout(mesh, grid)
    A = assemble_coupling(mesh, grid, lay).A
    tau, nrm = contact_frames(mesh, lay)
    nl, nu = lay.n_lambda, lay.n_u
    checked = 0
    for j, e in enumerate(lay.contact_elements):
        np.testing.assert_allclose(nrm[j], [0.0, 1.0])
        for m in lay.elem_u[e]:
            if m < 0:
                continue
            assert math.isclose(A[nl + j, nu + m], h / 2, rel_tol=1e-12)
            assert A[nl + j, m] == 0
            assert math.isclose(abs(A[j, m]), h / 2, rel_tol=1e-12)
            checked += 1
    assert checked > 0


def test_mtilde_time_pairing_weights():
    mesh = slit_mesh(0.1)
    grid = TimeGrid(0.5, 5)
    lay = build_dof_layout(mesh, grid)
    cp = assemble_coupling(mesh, grid, lay)
    U = np.zeros((5, 2 * lay.n_u))
    U[1] = 1.0
    MU = cp.mtilde(U)
    AU = cp.A @ U[1]
    # int_{I_l} r_1 dt: 0 for l = 0, dt/2 for l = 1, dt afterwards
    np.testing.assert_allclose(MU[0], 0.0)
    np.testing.assert_allclose(MU[1], grid.dt / 2 * AU)
    np.testing.assert_allclose(MU[3], grid.dt * AU)
    np.testing.assert_allclose(cp.Mtilde_dense() @ U.ravel(), MU.ravel())


def test_example4_gap_value():
    g = preset("4").gap_function()
    assert g(np.array([0.0, 0.0]), 0.5) == pytest.approx(0.0, abs=1e-15)
    assert g(np.array([0.0, -0.2]), 0.5) == pytest.approx(0.2)
    assert g(np.array([0.0, 0.0]), 1.5) == pytest.approx(-3.2)


def test_gap_interpolant_matches_nodal_values():
    mesh = square_mesh(0.25, regions={"bottom": "contact"})
    grid = TimeGrid(1.0, 8)
    lay = build_dof_layout(mesh, grid)

    def g(x, t):
        return 0.3 * np.sin(3 * t) + x[..., 0] ** 2 - 0.1

    cp = assemble_coupling(mesh, grid, lay, g=g)
    nodes = np.unique(lay.elem_u[lay.contact_elements])
    x = mesh.vertices[lay.u_vertices[nodes]]
    nu = lay.n_u
    trace = reconstruct_displacement(cp.G)                 # (N+1, 2 n_u)
    for k, t in enumerate(grid.times):
        want = g(x, t) - g(x, 0.0)
        # contact normal of the bottom side is (0, 1)
        np.testing.assert_allclose(trace[k, nu + nodes], want, atol=1e-14)
        np.testing.assert_allclose(trace[k, nodes], 0.0, atol=1e-14)
    # M~G includes the initial gap: for a time-constant gap it is dt * a g
    cst = assemble_coupling(mesh, grid, lay, g=lambda x, t: 0.25 + 0 * x[..., 0])
    nl = lay.n_lambda
    want = np.broadcast_to(grid.dt * 0.25 * mesh.lengths[lay.contact_elements], (grid.n_steps, nl))
    np.testing.assert_allclose(cst.MG[:, nl:], want, rtol=1e-13)
    np.testing.assert_allclose(cst.MG[:, :nl], 0.0)


# ---------------------------------------------------------------- Uzawa

def test_empty_contact_one_iteration():
    mesh = square_mesh(0.5)
    grid = TimeGrid(1.0, 2)
    lay = build_dof_layout(mesh, grid)
    S = assemble_S_blocks("nonsymmetric", mesh, grid, Material(), lay)
    F = assemble_rhs(lambda x, t, g: np.ones(np.broadcast_shapes(x.shape[:-1], np.shape(t)) + (2,)),
                     mesh, grid, lay)
    cp = assemble_coupling(mesh, grid, lay)
    res = uzawa_solve(S, F, cp, lay, UzawaConfig(rho=1.0, eps=1e-5))
    assert res.iterations == 1 and res.Lambda.size == 0
    np.testing.assert_array_equal(res.X, march(S, F))


def test_far_obstacle_inactive(toy):
    mesh = square_mesh(0.25, regions={"bottom": "contact"})
    grid = TimeGrid(0.5, 2)
    cp = assemble_coupling(mesh, grid, toy.layout, g=lambda x, t: -1e6 + 0 * x[..., 0])
    res = uzawa_solve(toy.system, 1e-3 * toy.F, cp, toy.layout, UzawaConfig(rho=100.0, eps=1e-8))
    assert np.all(res.Lambda == 0)
    np.testing.assert_array_equal(res.X, march(toy.system, 1e-3 * toy.F))


@pytest.mark.parametrize("method", ["response", "march"])
def test_toy_matches_active_set_oracle(toy, method):
    res = uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout,
                      UzawaConfig(rho=100.0, eps=1e-12), method=method)
    L = res.Lambda.ravel()
    np.testing.assert_allclose(L[toy.layout.normal_idx], toy.Lstar, atol=1e-6)
    assert np.all(L[toy.layout.tangent_idx] == 0)
    # the returned state solves S X = F + M* Lambda
    ref = march(toy.system, toy.F + toy.coupling.mstar(res.Lambda))
    np.testing.assert_allclose(res.X, ref, rtol=1e-12, atol=1e-14)
    MUG = toy.coupling.mtilde(res.U) - toy.coupling.MG
    assert complementarity_residual(res.Lambda, MUG, toy.layout) <= 1e-9


def test_toy_nontrivial(toy):
    """The oracle solution has both active and inactive constraints."""
    assert np.sum(toy.Lstar > 0) >= 1 and np.sum(toy.Lstar == 0) >= 1


def test_response_equals_march(toy):
    fac = factorize(toy.system.S0)
    nl = toy.layout.n_lambda
    resp = ContactResponse(toy.system, toy.coupling, fac, columns=np.arange(nl, 2 * nl))
    rng = np.random.default_rng(3)
    L = np.zeros((2, 2 * nl))
    L[:, nl:] = rng.random((2, nl))
    X = march(toy.system, toy.coupling.mstar(L), fac)
    direct = toy.coupling.mtilde(X[:, 2 * toy.layout.n_psi:])
    np.testing.assert_allclose(resp.apply(L), direct, rtol=1e-12, atol=1e-16)


def test_feasibility_after_every_iteration(toy):
    seen = []

    def cb(k, L, rel):
        Lf = L.ravel()
        seen.append(bool(np.all(Lf[toy.layout.normal_idx] >= 0)
                         and np.all(Lf[toy.layout.tangent_idx] == 0)))
    uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout, UzawaConfig(rho=30.0, eps=1e-8),
                callback=cb)
    assert seen and all(seen)


def test_lemma_distance_monotone(toy):
    rho = 0.5 * toy.threshold()
    idx = toy.layout.normal_idx
    dist = []

    def cb(k, L, rel):
        dist.append(np.linalg.norm(L.ravel()[idx] - toy.Lstar))
    uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout,
                UzawaConfig(rho=rho, eps=1e-14, max_iter=300), raise_on_failure=False, callback=cb)
    d = np.array(dist)
    assert len(d) == 300
    assert np.all(np.diff(d) <= 1e-13 * d[0])


def test_solution_independent_of_rho(toy):
    eps = 1e-9
    a = uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout, UzawaConfig(rho=30.0, eps=eps))
    b = uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout, UzawaConfig(rho=100.0, eps=eps))
    assert np.linalg.norm(a.U - b.U) <= 10 * eps * np.linalg.norm(b.U)


def test_divergence_reported(toy):
    with pytest.raises(UzawaDivergence) as exc:
        uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout, UzawaConfig(rho=1e4, eps=1e-8))
    assert len(exc.value.history) >= 20


def test_non_convergence_reported(toy):
    with pytest.raises(UzawaNonConvergence) as exc:
        uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout,
                    UzawaConfig(rho=10.0, eps=1e-12, max_iter=5))
    assert len(exc.value.history) == 5
    res = uzawa_solve(toy.system, toy.F, toy.coupling, toy.layout,
                      UzawaConfig(rho=10.0, eps=1e-12, max_iter=5), raise_on_failure=False)
    assert not res.converged and res.iterations == 5
