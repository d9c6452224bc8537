"""Simulation and security bounds for quantum bit-string generation with coherent states."""

from .adversary import BiasEstimate, Strategy, measure_bias
from .bounds import SecurityReport, build_report, default_kappa
from .optics import ChannelModel, CoherentState, FockExpansion, GaussianState
from .protocol import Outcome, ProtocolConfig, RoundRecord, run_protocol

__all__ = [
    "BiasEstimate",
    "ChannelModel",
    "CoherentState",
    "FockExpansion",
    "GaussianState",
    "Outcome",
    "ProtocolConfig",
    "RoundRecord",
    "SecurityReport",
    "Strategy",
    "build_report",
    "default_kappa",
    "measure_bias",
    "run_protocol",
]
