"""Gradient flows with a power-law dissipation and the energy identity.

With p = 3 the Euclidean flow of |x|^2/2 reaches the minimizer in finite
time t = 2. On the Funk disk the same potential drives a flow whose energy
ledger balances to integrator precision.
"""
import numpy as np

from asymflow import flow, models
from asymflow.norms import NormSpec

euc = models.MinkowskiSpace(NormSpec.euclidean(2))
quad = flow.Quadratic(np.eye(2))

tr = flow.integrate_flow(euc, flow.PowerLaw(3), quad, [0.0, 1.0], 3.0, 1e-3)
print(f"p=3 arrival time: {flow.arrival_time(tr, [0, 0]):.4f} (expected 2)")

funk = models.FunkBall(2)
for p in (1.5, 2.0, 3.0):
    tr = flow.integrate_flow(funk, flow.PowerLaw(p), quad, [0.6, -0.3], 1.0, 1e-2)
    audit = flow.energy_audit(tr, funk, flow.PowerLaw(p), quad)
    print(f"Funk, p={p}: phi {tr.phi[0]:.4f} -> {tr.phi[-1]:.6f}, energy residual {audit.max_residual:.2e}")

# the reverse Funk structure pushes the flow out of the disk in finite time
rev = models.ReverseModel(funk)
tr = flow.integrate_flow(rev, flow.PowerLaw(2), flow.Linear([1.0, 0.0]), [0.0, 0.0], 5.0, 1e-2)
print(f"reverse Funk, linear potential: status {tr.status} after t={tr.exit_time}")
