"""Seeded simulator and security harness for a quantum election with a split administrator."""

from .adversary import AttackOutcome, density_audit
from .aqkd_basic import run_basic_session
from .aqkd_string import StringAqkdKeys, round_trip, setup_keys
from .election import (
    ChannelConfig,
    ElectionConfig,
    ElectionParams,
    classical_baseline_run,
    run_full_election,
)
from .primitives import EccCode
from .qubit_sim import QubitRegister, QubitState
from .transcript import Transcript, make_rng

__version__ = "0.1.0"

__all__ = [
    "AttackOutcome",
    "ChannelConfig",
    "EccCode",
    "ElectionConfig",
    "ElectionParams",
    "QubitRegister",
    "QubitState",
    "StringAqkdKeys",
    "Transcript",
    "classical_baseline_run",
    "density_audit",
    "make_rng",
    "run_basic_session",
    "run_full_election",
    "round_trip",
    "setup_keys",
]
