"""Periodic orbits, parabolic detection and exact jets for BlaschkePower(2)."""

from fractions import Fraction as F

from circlemaps import BlaschkePower, HdMap
from circlemaps.jets import jet_at, verify_claim1
from circlemaps.orbits import certify_Tdstar, find_periodic_orbits

H = BlaschkePower(2)
for s in (1, 2, 3):
    for o in find_periodic_orbits(H, s):
        print(f"period {s}: {o.classification:9s} multiplier {o.multiplier:.6f} at {o.points[0]:.6f}")

cert = certify_Tdstar(H, 6)
print("weakly expanding up to period 6:", cert.certified, "| parabolic orbits:", len(cert.parabolic))

# 96-bit jets at the parabolic point: x + c x^3 with c = pi^2/4 and pi^2
for G in (H, HdMap(2)):
    jet = jet_at(G, 0, order=4, precision_bits=96)
    print(f"{type(G).__name__} jet at 0: x + {float(jet.coeffs[2]):.10f} x^3")

# exact jet-level averaging for a two-point parabolic cycle
res = verify_claim1([(F(1), F(2)), (F(3), F(-1))], 1)
print("averaged form P-hat:", res.P_hat)
print("residual against the sum formula at scale L/N:", res.residual_at_effective_scale)
