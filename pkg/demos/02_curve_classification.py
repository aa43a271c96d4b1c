"""Forward and backward absolute continuity can disagree.

On the toy half line, moving right costs the distance travelled while moving
left costs a flat 1, so the identity path is forward AC only. In the Funk
disk, a path coming in from near the boundary has bounded forward length but
a backward certificate that grows without bound as its start approaches the
boundary.
"""
import numpy as np

from asymflow import curves, models

toy = models.ToyHalfLine()
t = np.linspace(0, 1, 65)
rep = curves.classify_ac(toy, curves.SampledCurve(t, t[:, None]))
print(f"toy line: forward_ok={rep.forward_ok}, backward_ok={rep.backward_ok}")

funk = models.FunkBall(2)
print("\n j   forward L1   backward L1   j*ln10")
for j in (2, 4, 6, 8):
    t = np.linspace(0, 1, 801)
    r = -np.expm1(-j * np.log(10) * (1 - t))
    c = curves.SampledCurve(t, np.stack([-r, np.zeros_like(r)], axis=1))
    rep = curves.classify_ac(funk, c)
    print(f"{j:2d}  {rep.lp_norms['forward']:10.6f}  {rep.lp_norms['backward']:11.6f}  {j * np.log(10):8.4f}")
