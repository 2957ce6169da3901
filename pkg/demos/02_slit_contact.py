"""Example 2, Test 1: a slit pressed onto a rigid obstacle on [-0.2, 0.2].

Prints when the contact force switches on and off at the slit midpoint
and checks complementarity.  The lambda_2 surface lands in
out/demo_example2/multipliers.csv (t, element, lambda2).
"""
import numpy as np

from tdbem_contact.cli import run_config
from tdbem_contact.config import preset

cfg = preset("2t1", h=0.05, out="out/demo_example2")    # h = 0.025 in the paper setting
cfg.cache_dir = ".cache/blocks"
r = run_config(cfg)
nl = r.layout.n_lambda
lam = r.uzawa.Lambda[:, nl:]
tm = r.grid.times[:-1] + 0.5 * r.grid.dt

print(f"Uzawa: {r.uzawa.iterations} iterations, rho = {cfg.uzawa['rho']:g}")
print(f"complementarity {r.metadata['complementarity_residual']:.2e}, "
      f"|M~U|_inf {r.metadata['mtilde_u_inf']:.2e}")

total = lam.sum(axis=1)
on = total > 1e-3 * total.max()
edges = np.flatnonzero(np.diff(on.astype(int)))
for k in edges:
    print(f"contact {'on ' if on[k + 1] else 'off'} near t = {tm[k + 1]:.3f}")

m = np.argmin(np.hypot(*(r.mesh.vertices[r.layout.u_vertices]).T))
print("midpoint u2 every 0.25:", np.round(r.trace[::int(0.25 / r.grid.dt), 1, m], 4))
