"""Limited-commitment risk sharing below and above the first-best threshold.

    python demos/risk_sharing.py
"""
import numpy as np

from regen_srs import simulate, uniform_distance
from regen_srs.engine import calibrate_burn_in, long_run_distribution
from regen_srs.fixtures import risk_sharing_fixture
from regen_srs.models import risk_sharing_map

for beta in (0.3, 0.55, 0.9):
    rs = risk_sharing_map(risk_sharing_fixture(beta))
    iv = ", ".join(f"[{a:.4f}, {b:.4f}]" for a, b in zip(rs.lo, rs.hi))
    print(f"beta = {beta}: intervals {iv}; first best sustainable: {rs.first_best}")

rs = risk_sharing_map(risk_sharing_fixture(0.55))
bi = calibrate_burn_in(rs.fmap, rs.driver)
a = long_run_distribution(rs.fmap, rs.driver, rs.c_min, bi.steps, 5000, seed=0, stream=1)
b = long_run_distribution(rs.fmap, rs.driver, rs.c_max, bi.steps, 5000, seed=0, stream=2)
print(f"disjoint case: d(limit from c_min, limit from c_max) = {uniform_distance(a.cdf, b.cdf):.4f}")

fb = risk_sharing_map(risk_sharing_fixture(0.9))
for x0 in (float(fb.lo.min()), float(fb.hi.max())):
    tr = simulate(fb.fmap, fb.driver, x0, 200, seed=1)
    print(f"first best, c0 = {x0:.4f}: settles at {tr.states[-1]:.4f} "
          f"(constant after t = {int(np.flatnonzero(tr.states != tr.states[-1]).max(initial=-1)) + 1})")
