"""The Donaldson Lagrangian three ways, plus its splitting along a sub-line."""
import numpy as np

from twistflow import hermitian as hm
from twistflow.bundles import make_preset
from twistflow.lagrangian import lagrangian_closed, lagrangian_decomposition, lagrangian_path

b = make_preset("atiyah_f2", {"beta": 1.0})
h, k = hm.random_metric(b, 1, 0.4), hm.random_metric(b, 2, 0.4)

closed = lagrangian_closed(h, k)
for nodes in (9, 17, 33, 65):
    geo = lagrangian_path(hm.geodesic_path(h, k, nodes))
    lin = lagrangian_path(hm.linear_path(h, k, nodes))
    print(f"nodes {nodes:3d}: geodesic {geo:+.12f}  linear {lin:+.12f}")
print(f"closed form     {closed:+.12f}")

parts = lagrangian_decomposition(h, k, b.declared_subbundles[0])
print("\nsplitting along the sub-line:")
for key in ("sub", "quotient", "c_norm_h", "c_norm_k", "predicted", "total", "residual"):
    print(f"  {key:10s} {parts[key]:+.12f}")

# a conformal change of the HE metric on a line bundle costs int |dbar u|^2
line = make_preset("line_bundle", {"d": 1})
s, _ = line.geom.st
for a in (0.1, 0.2, 0.4):
    ref = hm.reference_metric(line)
    val = lagrangian_closed(ref, hm.conformal_metric(ref, a * np.cos(2 * np.pi * s)))
    print(f"a={a}: L = {val:.12f}, pi^2 a^2 / 2 = {np.pi**2 * a**2 / 2:.12f}")
