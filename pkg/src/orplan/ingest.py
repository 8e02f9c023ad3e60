"""Historical duration records, empirical statistics, and scenario sampling.

Sampling is deterministic per (seed, scenario index): scenario ``n`` is drawn
from its own counter-derived RNG stream, so generating scenarios in parallel
or in any order reproduces the sequential output bit for bit.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from orplan.core import Instance, Scenario, SurgeryType

DURATION_HEADER = ("specialty", "duration_min")
SCENARIO_HEADER = ("scenario_index", "kind", "entity_index", "value_min")

DURATION_KINDS = ("empirical-resample", "lognormal", "point-mass")
EMERGENCY_KINDS = ("truncated-exponential", "empirical-resample", "point-mass")

_REJECTION_CAP = 1000


@dataclass(frozen=True)
class DurationDataset:
    """Historical (specialty, duration) records with per-type arrays."""

    records: tuple[tuple[str, float], ...]

    @property
    def by_type(self) -> dict[str, np.ndarray]:
        out: dict[str, list[float]] = {}
        for name, dur in self.records:
            out.setdefault(name, []).append(dur)
        return {name: np.asarray(vals) for name, vals in out.items()}

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SamplerSpec:
    """How to draw one scenario set: generative regime, seed, and size."""

    kind: str = "empirical-resample"
    emergency_kind: str = "truncated-exponential"
    seed: int = 0
    N: int = 1
    dataset: DurationDataset | None = None

    def __post_init__(self) -> None:
        if self.kind not in DURATION_KINDS:
            raise ValueError(f"unknown duration sampler kind {self.kind!r}")
        if self.emergency_kind not in EMERGENCY_KINDS:
            raise ValueError(f"unknown emergency sampler kind {self.emergency_kind!r}")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        needs_data = self.kind == "empirical-resample" or (
            self.emergency_kind == "empirical-resample"
        )
        if needs_data and self.dataset is None:
            raise ValueError("empirical-resample requires a dataset")


@dataclass(frozen=True)
class ScenarioSet:
    """N joint samples of surgery durations and emergency capacities.

    ``d`` has shape (N, I) and ``e`` shape (N, B).  Provenance (seed and
    source regime) is carried so studies can be replayed exactly.
    """

    d: np.ndarray
    e: np.ndarray
    seed: int = 0
    kind: str = "unspecified"
    emergency_kind: str = "unspecified"

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def scenario(self, n: int) -> Scenario:
        return Scenario(d=self.d[n], e=self.e[n])

    def __iter__(self):
        return (self.scenario(n) for n in range(self.n))


def load_duration_records(
    path: str | Path, known_types: set[str] | None = None
) -> DurationDataset:
    """Parse a ``specialty,duration_min`` CSV; report bad rows by line number."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    records: list[tuple[str, float]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise ValueError(f"{path}: empty file, expected header "
                             f"{','.join(DURATION_HEADER)}") from exc
        if tuple(h.strip() for h in header) != DURATION_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(DURATION_HEADER)},"
                f" got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            name = row[0].strip()
            try:
                duration = float(row[1])
            except ValueError as exc:
                raise ValueError(
                    f"{path}:{lineno}: unparseable duration {row[1]!r}"
                ) from exc
            if duration <= 0:
                raise ValueError(f"{path}:{lineno}: duration must be positive")
            if known_types is not None and name not in known_types:
                raise ValueError(f"{path}:{lineno}: unknown specialty {name!r}")
            records.append((name, duration))
    if not records:
        warnings.warn(f"{path}: no duration records beyond the header")
    return DurationDataset(tuple(records))


def write_duration_records(path: str | Path, ds: DurationDataset) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DURATION_HEADER)
        for name, dur in ds.records:
            writer.writerow([name, repr(float(dur))])


def empirical_stats(
    ds: DurationDataset, min_records: int = 2
) -> dict[str, SurgeryType]:
    """Per-type mean, sample sd, support bounds, and mix fraction.

    Uses the sample standard deviation (ddof=1); support bounds are the
    observed min and max.  Mix fractions are each type's share of records.
    """
    by_type = ds.by_type
    total = len(ds)
    if total == 0:
        raise ValueError("dataset is empty")
    out: dict[str, SurgeryType] = {}
    for name in sorted(by_type):
        vals = by_type[name]
        if len(vals) < min_records:
            raise ValueError(
                f"type {name}: {len(vals)} records, need at least {min_records}"
            )
        out[name] = SurgeryType(
            name=name,
            mean_duration=float(np.mean(vals)),
            sd_duration=float(np.std(vals, ddof=1)),
            d_lo=float(np.min(vals)),
            d_hi=float(np.max(vals)),
            mix_fraction=len(vals) / total,
        )
    return out


def _scenario_rng(seed: int, n: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n,)))


def _lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    sigma2 = np.log1p((sd / mean) ** 2)
    mu = np.log(mean) - sigma2 / 2.0
    return mu, float(np.sqrt(sigma2))


def _draw_truncated(
    rng: np.random.Generator, draw, lo: float, hi: float
) -> float:
    """Rejection-sample ``draw(rng)`` into [lo, hi]; clamp after 1000 tries."""
    for _ in range(_REJECTION_CAP):
        x = draw(rng)
        if lo <= x <= hi:
            return float(x)
    return float(min(max(draw(rng), lo), hi))


def _check_sampler_config(inst: Instance, spec: SamplerSpec) -> None:
    for s in inst.surgeries:
        t = s.type
        if not (t.d_lo <= t.mean_duration <= t.d_hi):
            raise ValueError(
                f"type {t.name}: sampler mean {t.mean_duration} outside support"
            )
    for b in inst.blocks:
        if not (b.e_lo <= b.e_mean <= b.e_hi):
            raise ValueError(
                f"block {b.id}: emergency mean {b.e_mean} outside support"
            )
    if spec.kind == "empirical-resample" or spec.emergency_kind == "empirical-resample":
        by_type = spec.dataset.by_type
        names = {s.type.name for s in inst.surgeries}
        if spec.emergency_kind == "empirical-resample":
            names |= {b.specialty.name for b in inst.blocks}
        missing = sorted(names - set(by_type))
        if missing:
            raise ValueError(f"dataset has no records for types {missing}")


def sample_scenarios(inst: Instance, spec: SamplerSpec) -> ScenarioSet:
    """Draw ``spec.N`` joint scenarios, every value clamped to its support.

    Durations are i.i.d. from the type's sampler; emergency load is drawn per
    block from the emergency sampler.  Identical (instance, spec) inputs give
    bit-identical output.
    """
    _check_sampler_config(inst, spec)
    by_type = spec.dataset.by_type if spec.dataset is not None else {}
    n_i, n_b = inst.n_surgeries, inst.n_blocks
    d = np.empty((spec.N, n_i))
    e = np.empty((spec.N, n_b))
    for n in range(spec.N):
        rng = _scenario_rng(spec.seed, n)
        for s in inst.surgeries:
            t = s.type
            if spec.kind == "point-mass":
                x = t.mean_duration
            elif spec.kind == "empirical-resample":
                vals = by_type[t.name]
                x = float(vals[rng.integers(len(vals))])
            else:  # lognormal
                if t.sd_duration == 0.0:
                    x = t.mean_duration
                else:
                    mu, sigma = _lognormal_params(t.mean_duration, t.sd_duration)
                    x = _draw_truncated(
                        rng, lambda g: g.lognormal(mu, sigma), t.d_lo, t.d_hi
                    )
            d[n, s.id] = min(max(x, t.d_lo), t.d_hi)
        for b in inst.blocks:
            if spec.emergency_kind == "point-mass":
                x = b.e_mean
            elif spec.emergency_kind == "empirical-resample":
                vals = by_type[b.specialty.name]
                x = float(vals[rng.integers(len(vals))])
            else:  # truncated-exponential
                if b.e_mean == 0.0:
                    x = 0.0
                else:
                    x = _draw_truncated(
                        rng, lambda g: g.exponential(b.e_mean), b.e_lo, b.e_hi
                    )
            e[n, b.id] = min(max(x, b.e_lo), b.e_hi)
    d.setflags(write=False)
    e.setflags(write=False)
    return ScenarioSet(
        d=d, e=e, seed=spec.seed, kind=spec.kind, emergency_kind=spec.emergency_kind
    )


def write_scenario_csv(path: str | Path, scen: ScenarioSet) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCENARIO_HEADER)
        for n in range(scen.n):
            for i, val in enumerate(scen.d[n]):
                writer.writerow([n, "d", i, repr(float(val))])
            for b, val in enumerate(scen.e[n]):
                writer.writerow([n, "e", b, repr(float(val))])


def read_scenario_csv(path: str | Path) -> ScenarioSet:
    rows_d: dict[tuple[int, int], float] = {}
    rows_e: dict[tuple[int, int], float] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(h.strip() for h in header) != SCENARIO_HEADER:
            raise ValueError(f"{path}: unexpected scenario CSV header")
        for row in reader:
            if not row:
                continue
            n, kind, idx, val = int(row[0]), row[1], int(row[2]), float(row[3])
            (rows_d if kind == "d" else rows_e)[(n, idx)] = val
    n_sc = 1 + max(n for n, _ in rows_d) if rows_d else 0
    n_i = 1 + max(i for _, i in rows_d) if rows_d else 0
    n_b = 1 + max(b for _, b in rows_e) if rows_e else 0
    d = np.empty((n_sc, n_i))
    e = np.empty((n_sc, n_b))
    for (n, i), val in rows_d.items():
        d[n, i] = val
    for (n, b), val in rows_e.items():
        e[n, b] = val
    d.setflags(write=False)
    e.setflags(write=False)
    return ScenarioSet(d=d, e=e, kind="file", emergency_kind="file")


def subset(scen: ScenarioSet, count: int) -> ScenarioSet:
    """First ``count`` scenarios of a set (prefix; preserves provenance)."""
    if count > scen.n:
        raise ValueError("subset larger than scenario set")
    return ScenarioSet(
        d=scen.d[:count], e=scen.e[:count], seed=scen.seed,
        kind=scen.kind, emergency_kind=scen.emergency_kind,
    )
