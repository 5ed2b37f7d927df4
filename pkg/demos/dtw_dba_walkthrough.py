"""DTW alignment and DBA averaging of a few phase-shifted sine waves."""

import numpy as np

from synthhar.synthgen import dba_iterations, dtw

rng = np.random.default_rng(0)
t = np.linspace(0, 2 * np.pi, 60)
members = [np.sin(t + rng.uniform(-0.6, 0.6)) + 0.05 * rng.normal(size=t.size) for _ in range(6)]

r = dtw(members[0], members[1])
print(f"DTW cost between members 0 and 1: {r.cost:.4f} (path of {len(r.path)} cells)")

bary, costs = dba_iterations(members)
print("within-set cost per iteration:", " -> ".join(f"{c:.3f}" for c in costs))
print(f"arithmetic mean cost: {sum(dtw(np.mean(members, axis=0), m).cost for m in members):.3f}")
print(f"barycentre cost:      {sum(dtw(bary, m).cost for m in members):.3f}")
