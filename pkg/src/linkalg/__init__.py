"""Executable process algebra for wireless link-layer protocols.

The core engine turns a network of protocol processes into a probabilistic
labelled transition system; the analyses check deadlock freedom, eventuality
properties and bisimilarity on it, and the harness runs scenarios, Monte-Carlo
simulations and traces.
"""

from .analysis import (EventualityQuery, check_deadlock_freedom, holds_outright, min_prob,
                       min_reach_values, packet_delivery, prob_at_least, uniform_bounded_prob)
from .bisim import strong_bisim
from .config import ScenarioConfig, build, load
from .csma import CsmaParams, build_csma_defs, build_csma_rts_defs, cw_of, rts_duration
from .network import Model, Network
from .plts import Plts, ResourceError, explore

__version__ = "0.1.0"

__all__ = [
    "EventualityQuery", "check_deadlock_freedom", "holds_outright", "min_prob", "min_reach_values",
    "packet_delivery", "prob_at_least", "uniform_bounded_prob", "strong_bisim", "ScenarioConfig",
    "build", "load", "CsmaParams", "build_csma_defs", "build_csma_rts_defs", "cw_of",
    "rts_duration", "Model", "Network", "Plts", "ResourceError", "explore",
]
