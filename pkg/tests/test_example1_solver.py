"""Solver-level checks on Example 1 at a coarse mesh (h = dt = 0.1)."""
import numpy as np
import pytest

from tdbem_contact.cli import example1_errors, run_config
from tdbem_contact.config import preset
from tdbem_contact.postprocess import (eval_interior, example1_exact, l2_spacetime_error,
                                       split_unknowns)


@pytest.fixture(scope="module")
def ex1(block_cache, tmp_path_factory):
    cfg = preset("1", h=0.1, out=str(tmp_path_factory.mktemp("ex1")))
    cfg.cache_dir = block_cache
    return run_config(cfg, write=False)


def _node(r, p):
    xs = r.mesh.vertices[r.layout.u_vertices]
    return int(np.argmin(np.hypot(*(xs - p).T)))


def test_top_midpoint_at_t1(ex1):
    m = _node(ex1, [0.0, 0.5])
    k = int(round(1.0 / ex1.grid.dt))
    assert example1_exact(np.array([0.0, 0.5]), 1.0)[1] == 1.0
    assert abs(ex1.trace[k, 1, m] - 1.0) < 0.05


def test_midpoint_traces_track_exact_solution(ex1):
    for p in ([0.0, 0.5], [0.5, 0.0], [0.0, -0.5]):
        m = _node(ex1, p)
        ex = example1_exact(np.tile(p, (len(ex1.grid.times), 1)), ex1.grid.times)
        assert np.max(np.abs(ex1.trace[:, 1, m] - ex[:, 1])) < 0.1


def test_u1_norm_is_error_against_zero(ex1):
    errs = example1_errors(ex1)
    zero = lambda x, t: np.zeros(np.shape(x))
    ref = l2_spacetime_error(ex1.trace, zero, ex1.mesh, ex1.grid, ex1.layout, component=0)
    assert errs["u1_l2"] == ref
    assert errs["u1_l2"] <= 1e-2 * errs["u2_l2"]


def test_one_uzawa_iteration_and_energy(ex1):
    assert ex1.uzawa.iterations == 1
    assert ex1.energy.total == pytest.approx(2.0, abs=0.02)
    assert np.all(np.diff(ex1.energy.cumulative) >= -1e-12)


def test_interior_value_at_centre(ex1):
    """At (0,0), t = 1 the causal solution is 0.5; the printed formula
    (x2 -> -x2) would give 1.5, which violates the zero initial state."""
    psi, u = split_unknowns(ex1.uzawa.X, ex1.layout)
    mat = ex1.config.build_material()
    v = eval_interior([0.0, 0.0], 1.0, u, psi, ex1.mesh, ex1.grid, mat, ex1.layout)
    assert abs(v[0]) < 0.02
    assert v[1] == pytest.approx(0.5, abs=0.01)
