"""Elective surgery planning in flexible operating rooms under duration uncertainty.

Builds and solves four planning models over a shared scenario/instance layer:
a sample-average approximation (SAA), a Wasserstein-ball distributionally
robust model (W-DRO), a mean-support distributionally robust model (M-DRO),
and a block-allocation extension of the Wasserstein model (W-DSBA).  Ships
brute-force oracles for every reformulation step and an out-of-sample
simulation harness for replication studies.
"""

from orplan.core import (
    REJECT,
    Block,
    BlockOutcome,
    Instance,
    Scenario,
    Schedule,
    Surgery,
    SurgeryType,
    canonical_overtime_idle,
    first_stage_cost,
    recourse_cost,
    validate_instance,
)

__version__ = "0.1.0"

__all__ = [
    "REJECT",
    "Block",
    "BlockOutcome",
    "Instance",
    "Scenario",
    "Schedule",
    "Surgery",
    "SurgeryType",
    "canonical_overtime_idle",
    "first_stage_cost",
    "recourse_cost",
    "validate_instance",
]
