"""How the Uzawa step size rho behaves on a small contact problem.

The contact response B (normal multipliers -> normal M~U) is assembled
once; the iteration converges when ||I - rho B|| <= 1 and diverges
well beyond that.  The divergence is reported as an error, not a
silent NaN.
"""
import numpy as np

from tdbem_contact.assembly import assemble_rhs, assemble_S_blocks
from tdbem_contact.contact import UzawaConfig, assemble_coupling, uzawa_solve
from tdbem_contact.errors import UzawaDivergence, UzawaNonConvergence
from tdbem_contact.geometry import Material, TimeGrid, build_dof_layout, square_mesh

mesh = square_mesh(0.25, regions={"bottom": "contact"})
grid = TimeGrid(0.5, 2)
mat = Material()
lay = build_dof_layout(mesh, grid)
system = assemble_S_blocks("nonsymmetric", mesh, grid, mat, lay)


def load(x, t, group):
    # pushed down on top, pulled unevenly on the bottom
    f = np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(t)) + (2,))
    f[..., 1] = -(group == "top") * 1.0 + (group == "bottom") * (0.3 + 2 * x[..., 0])
    return f


F = assemble_rhs(load, mesh, grid, lay).per_step
coupling = assemble_coupling(mesh, grid, lay)

for rho in (10, 30, 100, 200, 1e4):
    try:
        res = uzawa_solve(system, F, coupling, lay, UzawaConfig(rho=rho, eps=1e-8))
        L = res.Lambda[:, lay.n_lambda:]
        print(f"rho {rho:>7g}: {res.iterations:4d} iterations, Lambda = {np.round(L.ravel(), 4)}")
    except (UzawaDivergence, UzawaNonConvergence) as exc:
        print(f"rho {rho:>7g}: {type(exc).__name__}: {exc}")
