"""Forward convergence without backward control in the Funk disk.

Empirical measures on a radial curve that runs into the boundary: cutting off
the tail and sending it to the centre is cheap in the forward direction, yet
the distance from the centre to the measure grows without bound as the
sampling is refined.
"""
from asymflow import transport

ms = [2**j for j in range(2, 15, 2)]
ks = [1, 4, 16]
rows = transport.funk_divergence_experiment(ms, ks, p=1.0)
print("     m     k   forward W1   anchor W1")
for r in rows:
    print(f"{r.m:6d}  {r.k:4d}  {r.forward_dist:11.3e}  {r.anchor_dist:10.4f}")
