"""Power-controlled adaptive sum-capacity of block-fading Gaussian MACs
with distributed channel state information."""

from .exceptions import (ContractError, DomainError, FadingMacError, InfeasibleError,
                         NoConvergenceError, ScenarioError, UnsupportedSizeError)
from .fading import DEFAULT_GRID, FadingLaw, quantile, quantize, sample_block, sample_blocks
from .harness import SimReport, simulate, verify_outage_free
from .look import LookConfig, LookMidpointStrategy, look_capacity
from .mac import MacState, in_region, region_violations, sum_rate_bound
from .nonident import (CoupledBoundSolution, TimeShare, alpha_lower_bound, coupled_bound,
                       scaled_shortcut, solve_upper_bound, timeshare_fractions)
from .partial_csi import GroupCsiStrategy, ThresholdCsi, c_psi, psi_prime, verify_relaxation
from .ratesplit import LayeredStrategy, build_layering, fraction_sweep, greedy_schedule
from .scenario import Scenario, parse_scenario, serialize
from .strategies import (AlphaMidpointStrategy, MidpointStrategy, OtdmaStrategy,
                         PlainTdmaStrategy, VirtualSplitStrategy, ZeroStrategy, otdma_benchmark,
                         throughput)
from .waterfill import WaterFilling, c1, solve_level

__all__ = [
    "ContractError", "DomainError", "FadingMacError", "InfeasibleError",
    "NoConvergenceError", "ScenarioError", "UnsupportedSizeError", "DEFAULT_GRID",
    "FadingLaw", "quantile", "quantize", "sample_block", "sample_blocks", "SimReport",
    "simulate", "verify_outage_free", "LookConfig", "LookMidpointStrategy", "look_capacity",
    "MacState", "in_region", "region_violations", "sum_rate_bound", "CoupledBoundSolution",
    "TimeShare", "alpha_lower_bound", "coupled_bound", "scaled_shortcut",
    "solve_upper_bound", "timeshare_fractions", "GroupCsiStrategy", "ThresholdCsi", "c_psi",
    "psi_prime", "verify_relaxation", "LayeredStrategy", "build_layering", "fraction_sweep",
    "greedy_schedule", "Scenario", "parse_scenario", "serialize", "AlphaMidpointStrategy",
    "MidpointStrategy", "OtdmaStrategy", "PlainTdmaStrategy", "VirtualSplitStrategy",
    "ZeroStrategy", "otdma_benchmark", "throughput", "WaterFilling", "c1", "solve_level",
]

__version__ = "0.1.0"
