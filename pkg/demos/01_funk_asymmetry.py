"""Distances in the Funk disk are not symmetric.

Walking from the centre towards the boundary costs -ln(1 - r), walking back
only ln(1 + r). Straight chords are geodesics, and the ratio of the two
directions blows up near the boundary.
"""
import numpy as np

from asymflow import models

funk = models.FunkBall(2)
origin = np.zeros(2)

print("   r     d(0,x)      d(x,0)     ratio")
for r in (0.1, 0.5, 0.9, 0.99, 0.999999):
    x = np.array([r, 0.0])
    out, back = funk.distance(origin, x), funk.distance(x, origin)
    print(f"{r:8.6f}  {out:9.6f}  {back:9.6f}  {out / back:8.3f}")

# the geodesic from a to b runs along the chord at unit speed
a, b = np.array([0.1, 0.2]), np.array([0.5, -0.3])
tr = models.geodesic(funk, a, (b - a), 1.0, 2000)
off = tr.points - a
dev = np.abs(off[:, 0] * (b - a)[1] - off[:, 1] * (b - a)[0])
print(f"\nmax distance of the geodesic from the chord line: {dev.max():.1e}")

prof = models.reversibility_profile(funk, origin, [0.5, 1.0, 2.0, 3.0])
for r, th in zip(prof.radii, prof.values):
    print(f"sampled reversibility on the forward ball of radius {r}: {th:.3f}")
