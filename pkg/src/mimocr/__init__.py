"""Power allocation and antenna selection for underlay MIMO cognitive radio links.

Finite arrays use an outage-constrained power cap, water-filling and a
greedy effective-antenna search; massive arrays add energy harvesting at
the idle transmit antennas.
"""

from .alloc import (AllocationResult, InfeasiblePrimaryError, SystemConfig,
                    effective_antennas, outage_min_sinr, per_antenna_power_limit,
                    power_cap, waterfill)
from .capacity import CapacityBoundInputs, capacity_lower_bound, j1, j2
from .channel import (ChannelRealization, LinkStats, PathLossLaw, RicianLoopParams,
                      draw_realization)
from .harvest import (EnergyBooks, HarvestConfig, HarvestInfeasibleError, HarvestResult,
                      SlotRunner, active_antennas_massive, avg_capacity_massive,
                      avg_capacity_massive_lb, cdf_harvested_power, harvested_energy,
                      harvested_power, p_total_effective, power_per_antenna_massive)
from .mcsim import (McEstimate, SimScenario, ergodic_capacity_mc, harvest_mc,
                    primary_outage_mc, zf_stream_sinrs)
from .specfn import (NonConvergenceError, Phi2Args, bessel_i0, digamma, exp_int_e1,
                     exp_int_ei, gamma_upper, humbert_phi2, log_humbert_phi2)
from .sweep import SweepSpec, load_config, preset, run_sweep

__version__ = "0.1.0"
