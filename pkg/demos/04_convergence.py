"""Refinement study for Example 1 with both formulations.

Writes convergence.csv/json per formulation under out/demo_convergence and
prints the fitted orders of the L2 trace error and of the energy error.
Three levels from h = 0.1 take a few minutes on one core.
"""
from tdbem_contact.cli import convergence

for form in ("nonsymmetric", "symmetric"):
    rows, s = convergence("1", 3, h=0.1, formulation=form,
                          out=f"out/demo_convergence/{form}", cache_dir=".cache/blocks")
    print(form)
    for r in rows:
        print(f"  h {r.h:.4f}  energy {r.quantity:.6f}  error {r.error:.3e}  rate {r.rate:.2f}")
    print(f"  L2 order {s['l2_error_order']:.2f}, energy order {s['energy_error_order']:.2f}, "
          f"Richardson order {s['richardson_order']:.2f}")
