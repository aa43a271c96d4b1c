"""From a curve of measures to a measure on paths.

Optimal plans between consecutive measures are glued into a joint law on
node sequences. With chord interpolation between nodes we read off speeds
and an averaged velocity field, and check the continuity equation weakly.
"""
import numpy as np

from asymflow import flow, models, paths
from asymflow.norms import NormSpec
from asymflow.transport import DiscreteMeasure

randers = models.MinkowskiSpace(NormSpec.randers([0.3, -0.2]))
base = np.array([[0.0, 0.0], [0.4, 0.1], [-0.2, 0.3]])
v = np.array([0.5, 0.2])

test = flow.BlackBox(lambda x: x[0] ** 3 + x[0] * x[1] ** 2, 2)
for N in (1, 2, 3, 4):
    curve = paths.CurveOfMeasures.from_function(N, lambda t: DiscreteMeasure.uniform(base + t * v + 0.3 * t**2 * v[::-1]))
    joint = paths.glue_plans(randers, curve, 2)
    eta = paths.path_measure(joint, randers, "geodesic")
    fields = paths.cell_fields(eta, randers)
    res = paths.continuity_residual(curve, fields, [test]).max_residual
    step1 = paths.step1_inequalities_check(joint, randers)
    speed = paths.speed_estimate(eta, randers, 2, 0.5 / 2**N)
    print(f"N={N}: paths {len(joint.weights)}, first-cell speed {speed:.4f}, continuity residual {res:.2e}, path bounds ok {step1.ok}")

# every atom starts with velocity v, so the first-cell speed tends to F(v)
print(f"\nF(v) = {randers.metric_value([0, 0], v):.4f}, while F(-v) = {randers.metric_value([0, 0], -v):.4f}")
