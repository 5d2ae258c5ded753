"""How much power can the secondary array spend before the primary link notices?

Walks through the outage probability at a primary receiver, the per-antenna
power that keeps it at epsilon, and a Monte-Carlo check of that figure.
"""

import numpy as np

from mimocr import (LinkStats, SimScenario, SystemConfig, outage_min_sinr,
                    per_antenna_power_limit, power_cap, primary_outage_mc)
from mimocr.sweep import db

cfg = SystemConfig(M=4, N=8, L=2, p_p=10.0, epsilon=0.05)
stats = LinkStats(mean_x=db(20), mean_h=1.0)

# outage grows with the per-antenna power p_i and with the number of antennas
print("p_i      m=1      m=2      m=4")
for p_i in (0.01, 0.1, 1.0, 10.0):
    row = [outage_min_sinr(cfg, stats, p_i, m) for m in (1, 2, 4)]
    print(f"{p_i:<6g}" + "".join(f"{v:9.4f}" for v in row))

# the cap inverts that relation; it shrinks per antenna as m grows
print("\nm   per-antenna limit   total cap")
for m in range(1, cfg.M + 1):
    print(f"{m}   {per_antenna_power_limit(cfg, stats, m):17.4f}   {power_cap(cfg, stats, m):9.4f}")

# at the cap the simulated outage should sit on epsilon
m = cfg.M
p_i = per_antenna_power_limit(cfg, stats, m)
est = primary_outage_mc(SimScenario(cfg, stats, n_samples=200_000, seed=1), np.full(m, p_i))
print(f"\nclosed form at the cap: {outage_min_sinr(cfg, stats, p_i, m):.4f}")
print(f"Monte-Carlo estimate:   {est.mean:.4f} +- {est.std_err:.4f}")
