"""Two-way video exchange over randomly placed relays.

Simulates and optimizes direct transmission, randomized distributed
space-time coded relaying (R-DSTC), its hop-reordered variant and R-DSTC
with XOR network coding, each with delay-constrained packet-level FEC.
"""

from .fec import FecPlan, fec_success_prob, make_plan, max_source_packets
from .harness import ExperimentSpec, compare_schemes, map_rate_to_psnr, run_experiment
from .mcper import (
    ChannelModel,
    PerEstimate,
    PerTable,
    Scheme,
    estimate_direct,
    estimate_rdstc,
    estimate_rdstc_hr,
    estimate_rdstc_nc,
)
from .phy import LinkModel, PathLossModel, default_link_model
from .scenario import NodePlacement, Region, SystemConfig, generate_placements, validate_config
from .schemes import RatePlan, SchemeResult, evaluate_plan, optimize

__version__ = "0.1.0"
