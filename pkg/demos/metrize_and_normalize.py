"""Conjugate maps with parabolic points to metrically expanding ones."""

import numpy as np

from circlemaps import AverageLift, BlaschkePower, HdMap, TrigLift, conjugate
from circlemaps.metrization import MetrizeConfig, metrize
from circlemaps.normalization import normalize, verify_whHinMd

for H in (HdMap(2), BlaschkePower(2), TrigLift(2, (0.1,), (0.05,))):
    g, phi, rep = metrize(H, MetrizeConfig(grid=2**12, check_points=2000))
    print(f"{type(H).__name__}: N = {rep.N}, min Dg = {rep.min_dg:.8f}, certified = {rep.certified}")

# DH already reaches 1 at the parabolic point; expansion elsewhere is what metrize certifies
x = np.arange(4096) / 4096
print("min DH for BlaschkePower(2):", float(BlaschkePower(2).deriv(x).min()))

H = BlaschkePower(2)
phi = AverageLift(H, 2)
rep = verify_whHinMd(H, phi, conjugate(phi, H), grid=10**4, par_pts=[0.0])
print("averaging: min H-hat' =", rep["min_deriv"], "max identity residual =", rep["max_residual"])

res = normalize(H, N=2)
print("normal form at the parabolic cycle:", res.cycles[0]["P0"] > 0, "| ok:", res.ok)
