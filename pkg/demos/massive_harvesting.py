"""Idle antennas of a large array can harvest the energy the active ones spend.

Shows the active-antenna count, the harvested-power CDF and the average
capacity as the number of transmit antennas grows.
"""

from mimocr import (HarvestConfig, LinkStats, SystemConfig, active_antennas_massive,
                    avg_capacity_massive, avg_capacity_massive_lb, cdf_harvested_power)
from mimocr.sweep import db

hc = HarvestConfig(eta=0.85, s_th=db(100), k_factor=db(25), omega=db(-15))
stats = LinkStats(mean_y=100.0, mean_x=db(30))

print("M     active  per-antenna  P(P_H < S_th)  avg capacity  hardened")
for M in (8, 16, 32, 64):
    cfg = SystemConfig(M=M, N=128, gamma_th=7.0, y_th=3.0)
    plan = active_antennas_massive(cfg, stats, hc)
    if plan.m_active == 0:
        print(f"{M:<5d} no feasible active set")
        continue
    f = cdf_harvested_power(cfg, stats, hc, plan.m_active)
    c = avg_capacity_massive(cfg, stats, hc, plan.m_active)
    c_lb = avg_capacity_massive_lb(cfg, stats, hc, plan.m_active)
    print(f"{M:<5d} {plan.m_active:6d}  {plan.p_per_antenna:11.4g}  {f:13.4f}  "
          f"{c:12.4f}  {c_lb:8.4f}")
