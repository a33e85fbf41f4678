"""Walk through the bundle catalog: twists, curvature, degrees and slopes.

Run: python3 demos/curvature_tour.py
"""
import numpy as np

from twistflow import hermitian as hm
from twistflow.bundles import bundle_end, make_preset
from twistflow.chern import bundle_report, mean_curvature
from twistflow.subobjects import slope_verdict
from twistflow.torus import make_torus
from twistflow.twist import validate_twist

geom = make_torus(1j, 64)

print("== cocycles ==")
for kind, params in [("line_bundle", {"d": 2}), ("direct_sum", {"degrees": [1, -1]}),
                     ("atiyah_f2", {"beta": 1.0}), ("heisenberg", {"r": 3, "p": 1})]:
    b = make_preset(kind, params, geom=geom)
    rep = validate_twist(b)
    print(f"{b.name:32s} defect {rep.defect:.1e}  epsilon {rep.epsilon:.4f}")

# the Heisenberg phase cancels on End(E), so End is untwisted
end = bundle_end(make_preset("heisenberg", {"r": 3, "p": 1}, geom=geom))
print(f"End(heisenberg) epsilon = {end.twist.epsilon:.3f}")

print("\n== reference metrics on line bundles ==")
for d in range(-2, 3):
    b = make_preset("line_bundle", {"d": d}, geom=geom)
    rep = bundle_report(b, hm.reference_metric(b))
    print(f"d={d:+d}: degree {rep.degree:+.12f}, c = {rep.einstein_constant:+.6f}, "
          f"residual {rep.he_residual_sup:.1e}")

print("\n== a rough metric leaves the degree alone ==")
b = make_preset("extension", {"d1": 1, "d2": 1, "beta": 0.5}, geom=geom)
for seed in range(3):
    h = hm.random_metric(b, seed, 0.5)
    rep = bundle_report(b, h)
    k = mean_curvature(b, h).values
    print(f"seed {seed}: degree {rep.degree:.12f}  sup|K| {np.max(np.abs(k)):7.2f}  "
          f"verdict {slope_verdict(b, h).verdict}")
