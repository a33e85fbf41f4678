"""Three flows side by side: stable, strictly semistable and unstable.

A stable line bundle converges to its HE metric.  The Atiyah extension is
semistable but not polystable: m_K keeps decreasing while the metric
degenerates.  L(1) + L(-1) sits on the floor 8 pi^2 and the flow splits off
the destabilizing line.

Run: python3 demos/flow_story.py   (about 20 s)
"""
import numpy as np

from twistflow import hermitian as hm
from twistflow.bundles import make_preset
from twistflow.flow import FlowConfig, condition_number, extract_destabilizer, run_flow
from twistflow.subobjects import projector_degree, weakly_holo_residual


def show(trace, every):
    for row in trace.rows[::every]:
        print(f"  t={row[0]:8.3f}  m_K={row[1]:.4e}  L={row[3]:+.6f}")


line = make_preset("line_bundle", {"d": 1})
print("stable: line bundle from a rough metric")
tr = run_flow(line, hm.random_metric(line, 11, 0.5), FlowConfig(dt_max=0.1, t_final=20.0, growth=1.2))
show(tr, 40)

atiyah = make_preset("atiyah_f2", {"beta": 1.0})
print("\nsemistable: Atiyah extension from the identity")
tr = run_flow(atiyah, hm.reference_metric(atiyah), FlowConfig(dt_max=0.5, t_final=200.0, growth=1.2))
show(tr, 80)
print(f"  condition number of the final metric: {condition_number(tr.final):.1f}")

dsum = make_preset("direct_sum", {"degrees": [1, -1]})
print("\nunstable: L(1) + L(-1)")
tr = run_flow(dsum, hm.reference_metric(dsum), FlowConfig(dt_max=0.1, t_final=2.0))
show(tr, 50)
print(f"  floor 8 pi^2 = {8 * np.pi**2:.6f}")
proj = extract_destabilizer(tr.final)
print(f"  destabilizer degree {projector_degree(dsum, tr.final, proj):.6f}, "
      f"residuals {weakly_holo_residual(dsum, tr.final, proj)}")
