"""Domain types, instance validation, and closed-form second-stage recourse.

All types are immutable after construction and every operation here is a pure
function, so everything is safe to share across threads.  Time is minutes,
money is dollars; no unit conversion happens in this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

#: Sentinel assignment target for a surgery postponed to the next planning
#: cycle.  It is not a physical block and carries no recourse.
REJECT: int = -1

MIX_FRACTION_TOL = 1e-9


@dataclass(frozen=True)
class SurgeryType:
    """Statistical description of one surgical specialty."""

    name: str
    mean_duration: float
    sd_duration: float
    d_lo: float
    d_hi: float
    mix_fraction: float


@dataclass(frozen=True)
class Surgery:
    """One elective case on the waiting list.

    ``schedule_cost`` applies to every compatible block; ``reject_cost`` is
    the penalty for postponing the case to the next planning cycle and must
    strictly exceed ``schedule_cost``.
    """

    id: int
    type: SurgeryType
    schedule_cost: float
    reject_cost: float


@dataclass(frozen=True)
class Block:
    """A pre-allocated OR time window tied to one specialty.

    ``open_cost`` is only meaningful for the block-allocation model and may
    be left as ``None`` otherwise.  ``e_lo``/``e_hi``/``e_mean`` describe the
    random capacity the block must cede to same-day emergency cases.
    """

    id: int
    or_room: str
    day: str
    specialty: SurgeryType
    length: float
    overtime_rate: float
    idle_rate: float
    e_lo: float
    e_hi: float
    e_mean: float
    open_cost: float | None = None


@dataclass(frozen=True)
class Instance:
    """Deterministic problem data: surgeries, blocks, and their compatibility.

    Compatibility is derived, never stored: surgery ``i`` may go to block
    ``b`` iff ``type(i) is specialty(b)`` (matched by type name).
    """

    types: tuple[SurgeryType, ...]
    surgeries: tuple[Surgery, ...]
    blocks: tuple[Block, ...]

    @cached_property
    def compatible_blocks(self) -> tuple[tuple[int, ...], ...]:
        """Sorted compatible block ids, indexed by surgery id."""
        by_type: dict[str, list[int]] = {}
        for b in self.blocks:
            by_type.setdefault(b.specialty.name, []).append(b.id)
        return tuple(
            tuple(sorted(by_type.get(s.type.name, ()))) for s in self.surgeries
        )

    @cached_property
    def compatible_pairs(self) -> tuple[tuple[int, int], ...]:
        """All (surgery, block) pairs allowed by the compatibility relation."""
        return tuple(
            (s.id, b)
            for s in self.surgeries
            for b in self.compatible_blocks[s.id]
        )

    @property
    def n_surgeries(self) -> int:
        return len(self.surgeries)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def is_compatible(self, surgery_id: int, block_id: int) -> bool:
        return block_id in self.compatible_blocks[surgery_id]

    def forced_rejections(self) -> list[int]:
        """Surgeries with no compatible block; they can only be rejected."""
        return [s.id for s in self.surgeries if not self.compatible_blocks[s.id]]


@dataclass(frozen=True)
class Scenario:
    """One joint realization of surgery durations and emergency capacities."""

    d: np.ndarray
    e: np.ndarray


@dataclass(frozen=True)
class Schedule:
    """First-stage decision: assignment of each surgery to a block or REJECT.

    ``open_blocks`` is present only for block-allocation solutions; when set,
    every assigned block must belong to it.
    """

    assignment: Mapping[int, int]
    open_blocks: frozenset[int] | None = None

    def assigned_to(self, block_id: int) -> list[int]:
        return sorted(i for i, b in self.assignment.items() if b == block_id)

    def scheduled_count(self) -> int:
        return sum(1 for b in self.assignment.values() if b != REJECT)

    def rejected_count(self) -> int:
        return sum(1 for b in self.assignment.values() if b == REJECT)


@dataclass(frozen=True)
class BlockOutcome:
    """Realized load and the canonical overtime/idle split for one block."""

    load: float
    overtime: float
    idle: float


def validate_instance(inst: Instance) -> list[str]:
    """Check every type invariant; return one message per violation.

    Violations are data, not failures: an empty list means the instance is
    valid.  Surgeries with zero compatible blocks are *not* violations (they
    are simply forced rejections, see :meth:`Instance.forced_rejections`).
    """
    out: list[str] = []
    seen_names: set[str] = set()
    for t in inst.types:
        if t.name in seen_names:
            out.append(f"type {t.name}: duplicate type name")
        seen_names.add(t.name)
        if not (0.0 <= t.d_lo <= t.mean_duration <= t.d_hi):
            out.append(
                f"type {t.name}: bounds must satisfy 0 <= d_lo <= mean_duration <= d_hi"
            )
        if t.sd_duration < 0.0:
            out.append(f"type {t.name}: sd_duration must be nonnegative")
    mix_total = sum(t.mix_fraction for t in inst.types)
    if inst.types and abs(mix_total - 1.0) > MIX_FRACTION_TOL:
        out.append(f"types: mix fractions sum to {mix_total!r}, expected 1")

    known = {t.name for t in inst.types}
    ids = [s.id for s in inst.surgeries]
    if ids != list(range(len(ids))):
        out.append("surgeries: ids must be 0..I-1 in order")
    for s in inst.surgeries:
        if s.type.name not in known:
            out.append(f"surgery {s.id}: unknown type {s.type.name}")
        if not s.reject_cost > s.schedule_cost:
            out.append(f"surgery {s.id}: reject_cost must exceed schedule_cost")

    bids = [b.id for b in inst.blocks]
    if bids != list(range(len(bids))):
        out.append("blocks: ids must be 0..B-1 in order")
    for b in inst.blocks:
        if b.specialty.name not in known:
            out.append(f"block {b.id}: unknown specialty {b.specialty.name}")
        if not b.length > 0.0:
            out.append(f"block {b.id}: length must be positive")
        if b.overtime_rate < 0.0:
            out.append(f"block {b.id}: overtime_rate must be nonnegative")
        if b.idle_rate < 0.0:
            out.append(f"block {b.id}: idle_rate must be nonnegative")
        if not (0.0 <= b.e_lo <= b.e_mean <= b.e_hi):
            out.append(
                f"block {b.id}: emergency bounds must satisfy 0 <= e_lo <= e_mean <= e_hi"
            )
    return out


def validate_schedule(inst: Instance, sched: Schedule) -> None:
    """Raise ``ValueError`` unless ``sched`` is feasible for ``inst``."""
    if set(sched.assignment) != {s.id for s in inst.surgeries}:
        raise ValueError("schedule must assign every surgery exactly once")
    for i, b in sched.assignment.items():
        if b == REJECT:
            continue
        if not inst.is_compatible(i, b):
            raise ValueError(f"surgery {i} assigned to incompatible block {b}")
        if sched.open_blocks is not None and b not in sched.open_blocks:
            raise ValueError(f"surgery {i} assigned to closed block {b}")
    if sched.open_blocks is not None:
        bad = set(sched.open_blocks) - set(range(inst.n_blocks))
        if bad:
            raise ValueError(f"open_blocks references unknown blocks {sorted(bad)}")


def validate_scenario(inst: Instance, scen: Scenario) -> None:
    """Raise ``ValueError`` if a coordinate of ``scen`` leaves its support."""
    if len(scen.d) != inst.n_surgeries or len(scen.e) != inst.n_blocks:
        raise ValueError("scenario dimensions do not match instance")
    for s in inst.surgeries:
        if not (s.type.d_lo - 1e-9 <= scen.d[s.id] <= s.type.d_hi + 1e-9):
            raise ValueError(f"scenario duration for surgery {s.id} outside support")
    for b in inst.blocks:
        if not (b.e_lo - 1e-9 <= scen.e[b.id] <= b.e_hi + 1e-9):
            raise ValueError(f"scenario emergency load for block {b.id} outside support")


def canonical_overtime_idle(load: float, length: float) -> tuple[float, float]:
    """Unique optimizer of the per-block recourse LP, as a closed form.

    Returns ``(max(0, load-length), max(0, length-load))``.  This is the LP
    optimum whenever both unit costs are positive and the canonical choice
    when the idle cost is zero (where the LP is degenerate in idle time).
    """
    if load < 0.0:
        raise ValueError("load must be nonnegative")
    if length <= 0.0:
        raise ValueError("length must be positive")
    delta = load - length
    return (max(0.0, delta), max(0.0, -delta))


def block_outcomes(
    inst: Instance, sched: Schedule, scen: Scenario
) -> dict[int, BlockOutcome]:
    """Per-block realized load and canonical overtime/idle split.

    Blocks outside ``open_blocks`` (block-allocation schedules) carry no
    emergency load and are omitted from the result.
    """
    validate_schedule(inst, sched)
    loads: dict[int, float] = {}
    open_ids = (
        range(inst.n_blocks) if sched.open_blocks is None else sorted(sched.open_blocks)
    )
    for b in open_ids:
        loads[b] = float(scen.e[b])
    for i, b in sched.assignment.items():
        if b != REJECT:
            loads[b] += float(scen.d[i])
    return {
        b: BlockOutcome(load, *canonical_overtime_idle(load, inst.blocks[b].length))
        for b, load in loads.items()
    }


def recourse_cost(inst: Instance, sched: Schedule, scen: Scenario) -> float:
    """Second-stage cost of ``sched`` under ``scen``: overtime plus idle cost.

    Equals the optimum of the per-block recourse LP, evaluated in closed
    form.  Closed blocks of a block-allocation schedule contribute zero.
    """
    total = 0.0
    for b, out in block_outcomes(inst, sched, scen).items():
        blk = inst.blocks[b]
        total += blk.overtime_rate * out.overtime + blk.idle_rate * out.idle
    return total


def first_stage_cost(inst: Instance, sched: Schedule) -> float:
    """Scheduling/rejection cost, plus block opening cost when present."""
    validate_schedule(inst, sched)
    total = 0.0
    for s in inst.surgeries:
        target = sched.assignment[s.id]
        total += s.reject_cost if target == REJECT else s.schedule_cost
    if sched.open_blocks is not None:
        for b in sorted(sched.open_blocks):
            cost = inst.blocks[b].open_cost
            if cost is None:
                raise ValueError(f"block {b} has no open_cost but is in open_blocks")
            total += cost
    return total


def reject_all_schedule(inst: Instance, open_blocks: Iterable[int] | None = None) -> Schedule:
    ob = None if open_blocks is None else frozenset(open_blocks)
    return Schedule({s.id: REJECT for s in inst.surgeries}, ob)


# --- JSON serialization ----------------------------------------------------
#
# Document layout: {"types": [...], "surgeries": [...], "blocks": [...]}
# with field names matching the dataclasses; type references are by name.


def instance_to_json(inst: Instance) -> str:
    doc = {
        "types": [
            {
                "name": t.name,
                "mean_duration": t.mean_duration,
                "sd_duration": t.sd_duration,
                "d_lo": t.d_lo,
                "d_hi": t.d_hi,
                "mix_fraction": t.mix_fraction,
            }
            for t in inst.types
        ],
        "surgeries": [
            {
                "id": s.id,
                "type": s.type.name,
                "schedule_cost": s.schedule_cost,
                "reject_cost": s.reject_cost,
            }
            for s in inst.surgeries
        ],
        "blocks": [
            {
                "id": b.id,
                "or_room": b.or_room,
                "day": b.day,
                "specialty": b.specialty.name,
                "length": b.length,
                "overtime_rate": b.overtime_rate,
                "idle_rate": b.idle_rate,
                "open_cost": b.open_cost,
                "e_lo": b.e_lo,
                "e_hi": b.e_hi,
                "e_mean": b.e_mean,
            }
            for b in inst.blocks
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    types = tuple(
        SurgeryType(
            name=t["name"],
            mean_duration=float(t["mean_duration"]),
            sd_duration=float(t["sd_duration"]),
            d_lo=float(t["d_lo"]),
            d_hi=float(t["d_hi"]),
            mix_fraction=float(t["mix_fraction"]),
        )
        for t in doc["types"]
    )
    by_name = {t.name: t for t in types}
    surgeries = tuple(
        Surgery(
            id=int(s["id"]),
            type=by_name[s["type"]],
            schedule_cost=float(s["schedule_cost"]),
            reject_cost=float(s["reject_cost"]),
        )
        for s in doc["surgeries"]
    )
    blocks = tuple(
        Block(
            id=int(b["id"]),
            or_room=str(b["or_room"]),
            day=str(b["day"]),
            specialty=by_name[b["specialty"]],
            length=float(b["length"]),
            overtime_rate=float(b["overtime_rate"]),
            idle_rate=float(b["idle_rate"]),
            open_cost=None if b.get("open_cost") is None else float(b["open_cost"]),
            e_lo=float(b["e_lo"]),
            e_hi=float(b["e_hi"]),
            e_mean=float(b["e_mean"]),
        )
        for b in doc["blocks"]
    )
    return Instance(types=types, surgeries=surgeries, blocks=blocks)


def schedule_to_json(sched: Schedule) -> str:
    doc: dict = {
        "assignment": {
            str(i): (None if b == REJECT else b)
            for i, b in sorted(sched.assignment.items())
        }
    }
    if sched.open_blocks is not None:
        doc["open_blocks"] = sorted(sched.open_blocks)
    return json.dumps(doc, indent=2)


def schedule_from_json(text: str) -> Schedule:
    doc = json.loads(text)
    assignment = {
        int(i): (REJECT if b is None else int(b))
        for i, b in doc["assignment"].items()
    }
    ob = doc.get("open_blocks")
    return Schedule(assignment, None if ob is None else frozenset(int(b) for b in ob))
