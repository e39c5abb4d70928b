"""Distortion and first-return expansion for BlaschkePower(2)."""

import numpy as np

from circlemaps import BlaschkePower
from circlemaps.geometry import distortion, sample_disjoint_pairs, search_return_expansion, total_variation_log_deriv
from circlemaps.orbits import find_periodic_orbits

H = BlaschkePower(2)
tv = total_variation_log_deriv(H)
rng = np.random.default_rng(0)
worst = max(distortion(H, J, n) for J, n in sample_disjoint_pairs(H, rng, 30))
print(f"TV(log DH) = {tv:.4f}, worst sampled distortion = {worst:.4f}")

(p2,) = [o for o in find_periodic_orbits(H, 2) if o.classification == "Repelling"]
O = find_periodic_orbits(H, 3)[0]
res = search_return_expansion(H, p2.points[0], O, depths=range(2, 6), time_cap=12)
print(f"nice interval A = ({res.A.start:.6f}, {res.A.end:.6f}), inf DR_A = {res.inf_all:.3f}, "
      f"off-centre inf = {res.inf_others:.3f}")
