"""Covert NOMA downlink with average age-of-information minimisation.

Modules: ``channel`` (placement, fading), ``detection`` (Willie's
radiometer), ``noma`` (SIC rates and their SCA bound), ``solver``
(alternating AoI/power optimisation), ``simulation`` (slotted runs) and
``experiments`` (sweeps, CSV, CLI back end).
"""
from .channel import ChannelState, ScenarioConfig, Topology, make_rng
from .detection import DetectionResult, NoiseUncertainty, covert_power_cap, optimal_detection
from .noma import PowerAllocation
from .solver import SolveResult, Status, alternating_solve

__version__ = "0.1.0"
