"""Benchmark instance construction: specialty statistics, the weekly block
schedule, cost structures, and deterministic synthetic duration data.

The six-specialty statistics and the 10-room / 32-block weekly schedule
mirror a widely used hospital benchmark.  The raw historical duration records
behind those statistics are not redistributable, so a seeded moment-matched
lognormal sample stands in for them; supports are then taken from the
synthetic data exactly as they would be from real records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from orplan.core import Block, Instance, Surgery, SurgeryType
from orplan.ingest import DurationDataset, empirical_stats

#: (name, share %, mean minutes, sd minutes) per surgical specialty.
SPECIALTY_STATS: tuple[tuple[str, float, float, float], ...] = (
    ("CARD", 14.01, 99.0, 53.0),
    ("GASTRO", 17.79, 132.0, 76.0),
    ("GYN", 27.81, 78.0, 52.0),
    ("MED", 4.41, 75.0, 72.0),
    ("ORTH", 17.81, 142.0, 58.0),
    ("URO", 17.98, 72.0, 38.0),
)

#: Weekly assignment of specialties to OR rooms (32 blocks over 10 rooms).
WEEKLY_BLOCK_SCHEDULE: tuple[tuple[str, str, str], ...] = (
    ("OR1", "Mon", "GASTRO"), ("OR1", "Tue", "GASTRO"), ("OR1", "Wed", "GASTRO"),
    ("OR2", "Wed", "GASTRO"), ("OR2", "Thu", "GASTRO"), ("OR2", "Fri", "GASTRO"),
    ("OR3", "Mon", "CARD"), ("OR3", "Wed", "CARD"), ("OR3", "Fri", "CARD"),
    ("OR4", "Mon", "ORTH"), ("OR4", "Tue", "ORTH"), ("OR4", "Thu", "ORTH"),
    ("OR4", "Fri", "ORTH"),
    ("OR5", "Tue", "ORTH"), ("OR5", "Wed", "MED"),
    ("OR6", "Mon", "GYN"), ("OR6", "Tue", "GYN"), ("OR6", "Wed", "GYN"),
    ("OR6", "Thu", "GYN"),
    ("OR7", "Tue", "GYN"), ("OR7", "Wed", "GYN"), ("OR7", "Thu", "GYN"),
    ("OR7", "Fri", "GYN"),
    ("OR8", "Mon", "URO"), ("OR8", "Tue", "URO"), ("OR8", "Thu", "URO"),
    ("OR8", "Fri", "URO"),
    ("OR9", "Mon", "CARD"), ("OR9", "Wed", "URO"), ("OR9", "Fri", "CARD"),
    ("OR10", "Mon", "URO"), ("OR10", "Wed", "ORTH"),
)

BLOCK_LENGTH_MIN = 8 * 60.0

#: (overtime $/min, idle $/min).  Cost1 fixes the overtime/idle ratio at 1.5;
#: Cost2 ignores idle time.
COST1: tuple[float, float] = (26.0, 26.0 / 1.5)
COST2: tuple[float, float] = (26.0, 0.0)

DEFAULT_DATASET_SIZE = 10390
DEFAULT_BASE_COST_FACTOR = 9.0
DEFAULT_REJECT_MULTIPLIER = 5.0
DEFAULT_RESERVED_ORS = ("OR10",)
EMERGENCY_SUPPORT_CAP = 3.0


@dataclass(frozen=True)
class CostConfig:
    """Patient-cost generation knobs.

    Scheduling cost is a per-type base value, ``base_factor`` times the type
    mean duration (rounded to a dollar); rejection costs ``reject_multiplier``
    times that.
    """

    base_factor: float = DEFAULT_BASE_COST_FACTOR
    reject_multiplier: float = DEFAULT_REJECT_MULTIPLIER

    def schedule_cost(self, t: SurgeryType) -> float:
        return float(round(self.base_factor * t.mean_duration))

    def reject_cost(self, t: SurgeryType) -> float:
        return self.reject_multiplier * self.schedule_cost(t)


def largest_remainder_counts(weights: list[float], total: int) -> list[int]:
    """Apportion ``total`` items to ``weights`` by the largest-remainder rule."""
    w = np.asarray(weights, dtype=float)
    quota = w / w.sum() * total
    counts = np.floor(quota).astype(int)
    remainder = total - int(counts.sum())
    order = np.argsort(-(quota - counts), kind="stable")
    for k in range(remainder):
        counts[order[k]] += 1
    return counts.tolist()


def synthetic_duration_dataset(
    seed: int = 20240, n_records: int = DEFAULT_DATASET_SIZE
) -> DurationDataset:
    """Seeded lognormal records matching the per-specialty mean/sd targets."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    counts = largest_remainder_counts([s[1] for s in SPECIALTY_STATS], n_records)
    records: list[tuple[str, float]] = []
    for (name, _, mean, sd), count in zip(SPECIALTY_STATS, counts):
        sigma2 = np.log1p((sd / mean) ** 2)
        mu = np.log(mean) - sigma2 / 2.0
        vals = rng.lognormal(mu, np.sqrt(sigma2), size=count)
        vals = np.maximum(vals, 5.0)
        records.extend((name, float(round(v, 1))) for v in vals)
    return DurationDataset(tuple(records))


def _emergency_support(
    length: float, e_mean: float
) -> tuple[float, float]:
    e_hi = min(length, EMERGENCY_SUPPORT_CAP * e_mean) if e_mean > 0 else 0.0
    return 0.0, e_hi


def build_instance(
    types: dict[str, SurgeryType],
    n_surgeries: int,
    block_plan: list[tuple[str, str, str]],
    cost_rates: tuple[float, float] = COST1,
    costs: CostConfig | None = None,
    open_cost: float | None = None,
    emergency_rate_mult: float = 1.0,
    block_length: float = BLOCK_LENGTH_MIN,
) -> Instance:
    """Assemble an instance from type statistics and a block plan.

    Surgeries are apportioned to types by mix fraction (largest remainder)
    and listed grouped by type.  Emergency capacity per block averages one
    elective case of the block's specialty, scaled by ``emergency_rate_mult``
    and supported on [0, min(length, 3x mean)].
    """
    costs = costs or CostConfig()
    co, cg = cost_rates
    names = sorted(types)
    counts = largest_remainder_counts(
        [types[n].mix_fraction for n in names], n_surgeries
    )
    surgeries: list[Surgery] = []
    for name, count in zip(names, counts):
        t = types[name]
        for _ in range(count):
            surgeries.append(
                Surgery(
                    id=len(surgeries),
                    type=t,
                    schedule_cost=costs.schedule_cost(t),
                    reject_cost=costs.reject_cost(t),
                )
            )
    blocks: list[Block] = []
    for room, day, spec_name in block_plan:
        t = types[spec_name]
        e_mean = emergency_rate_mult * t.mean_duration
        e_lo, e_hi = _emergency_support(block_length, e_mean)
        if e_mean > e_hi:
            raise ValueError(
                f"block {room}/{day}: emergency mean {e_mean} exceeds support"
            )
        blocks.append(
            Block(
                id=len(blocks),
                or_room=room,
                day=day,
                specialty=t,
                length=block_length,
                overtime_rate=co,
                idle_rate=cg,
                e_lo=e_lo,
                e_hi=e_hi,
                e_mean=e_mean,
                open_cost=open_cost,
            )
        )
    present = {s.type.name for s in surgeries} | {b.specialty.name for b in blocks}
    used_types = tuple(types[n] for n in names if n in present)
    return Instance(types=used_types, surgeries=tuple(surgeries), blocks=tuple(blocks))


def paper_types(dataset: DurationDataset | None = None) -> dict[str, SurgeryType]:
    """Benchmark type parameters, with supports taken from the dataset."""
    ds = dataset or synthetic_duration_dataset()
    return empirical_stats(ds)


def benchmark_instance(
    n_surgeries: int = 60,
    cost_rates: tuple[float, float] = COST1,
    dataset: DurationDataset | None = None,
    costs: CostConfig | None = None,
    emergency_rate_mult: float = 1.0,
) -> Instance:
    """The full 10-room, 32-block weekly instance."""
    types = paper_types(dataset)
    return build_instance(
        types,
        n_surgeries,
        list(WEEKLY_BLOCK_SCHEDULE),
        cost_rates=cost_rates,
        costs=costs,
        emergency_rate_mult=emergency_rate_mult,
    )


def desk_instance(
    n_surgeries: int = 10,
    cost_rates: tuple[float, float] = COST1,
    dataset: DurationDataset | None = None,
    costs: CostConfig | None = None,
    emergency_rate_mult: float = 1.0,
) -> Instance:
    """A scaled-down instance: block count sized to roughly match demand.

    Types with no apportioned surgery get no blocks; each present type gets
    max(1, round(count * mean * 2 / length)) blocks, labelled by type.
    """
    types = paper_types(dataset)
    names = sorted(types)
    counts = dict(
        zip(names, largest_remainder_counts(
            [types[n].mix_fraction for n in names], n_surgeries
        ))
    )
    plan: list[tuple[str, str, str]] = []
    for name in names:
        if counts[name] == 0:
            continue
        demand = counts[name] * types[name].mean_duration * 2.0
        n_blocks = max(1, round(demand / BLOCK_LENGTH_MIN))
        for k in range(n_blocks):
            plan.append((f"OR-{name}{k + 1}", "Mon", name))
    return build_instance(
        types, n_surgeries, plan, cost_rates=cost_rates, costs=costs,
        emergency_rate_mult=emergency_rate_mult,
    )


def single_specialty_instance(
    specialty: str = "GASTRO",
    n_surgeries: int = 25,
    n_blocks: int = 10,
    overtime_rate: float = 780.0,
    idle_rate: float = 0.0,
    open_cost: float = 800.0,
    dataset: DurationDataset | None = None,
    costs: CostConfig | None = None,
) -> Instance:
    """Block-allocation study instance: one specialty, open costs on blocks."""
    types = paper_types(dataset)
    t = types[specialty]
    only = {specialty: SurgeryType(
        name=t.name, mean_duration=t.mean_duration, sd_duration=t.sd_duration,
        d_lo=t.d_lo, d_hi=t.d_hi, mix_fraction=1.0,
    )}
    plan = [(f"OR{k + 1}", "Mon", specialty) for k in range(n_blocks)]
    return build_instance(
        only, n_surgeries, plan, cost_rates=(overtime_rate, idle_rate),
        costs=costs, open_cost=open_cost,
    )


# --- instance transforms for policy studies ---------------------------------


def with_cost_rates(inst: Instance, cost_rates: tuple[float, float]) -> Instance:
    co, cg = cost_rates
    blocks = tuple(
        Block(
            id=b.id, or_room=b.or_room, day=b.day, specialty=b.specialty,
            length=b.length, overtime_rate=co, idle_rate=cg,
            e_lo=b.e_lo, e_hi=b.e_hi, e_mean=b.e_mean, open_cost=b.open_cost,
        )
        for b in inst.blocks
    )
    return Instance(types=inst.types, surgeries=inst.surgeries, blocks=blocks)


def with_emergency_rate(inst: Instance, mult: float) -> Instance:
    """Scale every block's emergency mean, recomputing its support."""
    blocks = []
    for b in inst.blocks:
        e_mean = mult * b.e_mean
        e_lo, e_hi = _emergency_support(b.length, e_mean)
        if e_mean > e_hi:
            raise ValueError(f"block {b.id}: scaled emergency mean exceeds support")
        blocks.append(
            Block(
                id=b.id, or_room=b.or_room, day=b.day, specialty=b.specialty,
                length=b.length, overtime_rate=b.overtime_rate,
                idle_rate=b.idle_rate, e_lo=e_lo, e_hi=e_hi, e_mean=e_mean,
                open_cost=b.open_cost,
            )
        )
    return Instance(types=inst.types, surgeries=inst.surgeries, blocks=tuple(blocks))


def dedicated_variant(
    inst: Instance, reserved_ors: tuple[str, ...] = DEFAULT_RESERVED_ORS
) -> Instance:
    """Dedicated-OR policy: reserved rooms leave the elective pool and the
    remaining blocks carry no emergency load (zero-width support)."""
    rooms = {b.or_room for b in inst.blocks}
    if set(reserved_ors) >= rooms:
        raise ValueError("reserved ORs cover every room; no elective blocks left")
    blocks = []
    for b in inst.blocks:
        if b.or_room in reserved_ors:
            continue
        blocks.append(
            Block(
                id=len(blocks), or_room=b.or_room, day=b.day,
                specialty=b.specialty, length=b.length,
                overtime_rate=b.overtime_rate, idle_rate=b.idle_rate,
                e_lo=0.0, e_hi=0.0, e_mean=0.0, open_cost=b.open_cost,
            )
        )
    return Instance(types=inst.types, surgeries=inst.surgeries, blocks=tuple(blocks))
