"""Example 1: a unit square pushed on top and pulled on the bottom.

No contact here, so the Uzawa loop stops after one pass and the run is a
plain time-domain BEM solve.  The vertical displacement of the three side
midpoints is compared with the 1D plane-wave solution.

    python demos/01_example1_square.py [h]
"""
import sys

import numpy as np

from tdbem_contact.cli import example1_errors, run_config
from tdbem_contact.config import preset
from tdbem_contact.postprocess import eval_interior, example1_exact, split_unknowns

h = float(sys.argv[1]) if len(sys.argv) > 1 else 0.1
cfg = preset("1", h=h, out="out/demo_example1")
cfg.cache_dir = ".cache/blocks"
r = run_config(cfg)
print(f"{r.mesh.n_elements} elements, {r.grid.n_steps} steps, "
      f"{r.metadata['timing_s']['total']:.1f} s")

# traces at the midpoints of top, right and bottom
xs = r.mesh.vertices[r.layout.u_vertices]
t = r.grid.times
for name, p in [("top", (0, 0.5)), ("right", (0.5, 0)), ("bottom", (0, -0.5))]:
    m = np.argmin(np.hypot(*(xs - p).T))
    exact = example1_exact(np.tile(p, (len(t), 1)), t)[:, 1]
    err = np.abs(r.trace[:, 1, m] - exact).max()
    print(f"{name:>6}: u2(t=1) = {r.trace[len(t) // 2, 1, m]: .4f}, max error {err:.3e}")

e = example1_errors(r)
print(f"L2 error {e['l2_error']:.3e}, |u1|/|u2| = {e['u1_l2'] / e['u2_l2']:.2e}")
print(f"energy {r.energy.total:.6f} (exact 2)")

# the representation formula inside the square
Psi, U = split_unknowns(r.uzawa.X, r.layout)
u = eval_interior([0.0, 0.0], 1.0, U, Psi, r.mesh, r.grid, cfg.build_material(), r.layout)
print("u(0, 0, t=1) =", u, " causal plane wave gives 0.5")
