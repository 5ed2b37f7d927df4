"""Robust rank aggregation and Tanimoto stability on toy rank lists."""

import numpy as np

from synthhar.selection import RankList, rra, stability_of

rng = np.random.default_rng(1)
m = 62
lists = []
for alg in ("relieff", "mrmr", "ict", "oobi", "ldr"):
    # features 0-2 are near the top for every ranker, the rest are shuffled
    rest = rng.permutation(np.arange(3, m))
    head = rng.permutation(3)
    lists.append(RankList(alg, np.r_[head, rest]))

p = rra(lists)
for j in np.argsort(p)[:6]:
    print(f"feature {j:2d}: p = {p[j]:.3g}")

tops = [rl.top(10) for rl in lists]
print(f"mean Tanimoto of the top-10 sets: {stability_of(tops).mean:.3f}")
