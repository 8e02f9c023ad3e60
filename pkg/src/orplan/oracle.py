"""Independent brute-force verifiers for every reformulation step.

These functions never import from :mod:`orplan.models`; they recompute inner
suprema, fixed-assignment dual values, and global optima from first
principles (candidate enumeration, grid minimization, exhaustive search) so
the model builders can be checked against them.  They are written for
correctness at desk scale, not for speed.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from orplan.core import (
    REJECT,
    Instance,
    Schedule,
    first_stage_cost,
    recourse_cost,
)
from orplan.ingest import ScenarioSet

EXHAUSTIVE_LIMIT = 100_000
GRID_POINTS = 101


def _candidate_tables(
    inst: Instance, scen: ScenarioSet, n: int, b: int, sched: Schedule
) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-coordinate candidate values/deviations for block ``b``, sample ``n``.

    Columns are the surgeries scheduled in ``b`` followed by the block's
    emergency coordinate; rows are the candidates (lower bound, sample,
    upper bound).  Every coordinate term of the inner supremum is concave
    piecewise-linear with its only breakpoint at the sample, so maximizing
    over these three candidates per coordinate is exact.
    """
    block = inst.blocks[b]
    scheduled = [i for i, t in sorted(sched.assignment.items()) if t == b]
    k = len(scheduled)
    vals = np.empty((3, k + 1))
    for col, i in enumerate(scheduled):
        t = inst.surgeries[i].type
        vals[:, col] = (t.d_lo, scen.d[n, i], t.d_hi)
    vals[:, k] = (block.e_lo, scen.e[n, b], block.e_hi)
    sample = vals[1].copy()
    devs = np.abs(vals - sample)
    return vals, devs, block.length


def _inner_sup_grid(
    inst: Instance,
    scen: ScenarioSet,
    n: int,
    b: int,
    sched: Schedule,
    grid: np.ndarray,
) -> np.ndarray:
    """Inner supremum values over a vector of penalty rates ``grid``."""
    if sched.open_blocks is not None and b not in sched.open_blocks:
        return np.zeros(len(grid))
    block = inst.blocks[b]
    vals, devs, length = _candidate_tables(inst, scen, n, b, sched)
    out = np.full(len(grid), -math.inf)
    for beta in (block.overtime_rate, -block.idle_rate):
        # (3, k+1, G): candidate value minus the transport penalty
        scores = beta * vals[:, :, None] - devs[:, :, None] * grid[None, None, :]
        branch = scores.max(axis=0).sum(axis=0) - length * beta
        out = np.maximum(out, branch)
    return out


def inner_sup_bruteforce(
    inst: Instance,
    scen: ScenarioSet,
    n: int,
    b: int,
    sched: Schedule,
    rho: float,
) -> float:
    """Exact inner supremum for one (sample, block) at penalty rate ``rho``.

    Maximizes, over the dual extremes {overtime rate, -idle rate} and the
    per-coordinate candidates {lower bound, sample, upper bound}, the
    deviation-penalized dual recourse value.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return float(_inner_sup_grid(inst, scen, n, b, sched, np.array([float(rho)]))[0])


def _branch_crossings(
    inst: Instance, scen: ScenarioSet, n: int, b: int, sched: Schedule
) -> list[float]:
    """Penalty rates where the overtime and idle branches of the inner
    supremum cross; the pointwise max kinks there as well as at the unit
    costs themselves."""
    if sched.open_blocks is not None and b not in sched.open_blocks:
        return []
    block = inst.blocks[b]
    co, cg = block.overtime_rate, block.idle_rate

    def branch_at(beta: float, rho: float) -> float:
        vals, devs, length = _candidate_tables(inst, scen, n, b, sched)
        return float((beta * vals - rho * devs).max(axis=0).sum() - length * beta)

    # both branches are linear up to their unit cost and constant after it
    def segment_value(beta, thr, rho):
        rho_eff = min(rho, thr)
        v0 = branch_at(beta, 0.0)
        if thr <= 0:
            return v0
        vt = branch_at(beta, thr)
        return v0 + (vt - v0) * (rho_eff / thr)

    crossings: list[float] = []
    knots = sorted({0.0, co, cg, max(co, cg)})
    for lo, hi in zip(knots, knots[1:]):
        if hi - lo <= 0:
            continue
        f = lambda r: segment_value(co, co, r) - segment_value(-cg, cg, r)
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            crossings.append(lo)
        if (flo < 0 < fhi) or (fhi < 0 < flo):
            root = lo + (hi - lo) * (-flo) / (fhi - flo)
            crossings.append(float(root))
    return crossings


def rho_upper_bound(inst: Instance) -> float:
    """Safe cap on the transport penalty rate: beyond the largest unit cost,
    every corner candidate is dominated by the sample candidate."""
    if not inst.blocks:
        return 0.0
    return max(max(b.overtime_rate, b.idle_rate) for b in inst.blocks)


def rho_grid(
    inst: Instance,
    scen: ScenarioSet,
    sched: Schedule,
    n_points: int = GRID_POINTS,
) -> np.ndarray:
    """Penalty-rate grid: dense cover of [0, cap] plus every kink.

    Includes every block's overtime/idle unit cost and the computed branch
    crossings, which together hold all kinks of the piecewise-linear
    objective; the grid minimum is therefore exact.
    """
    cap = rho_upper_bound(inst)
    if cap <= 0.0:
        return np.array([0.0])
    pts = set(np.linspace(0.0, cap, n_points).tolist())
    for b in inst.blocks:
        pts.add(min(b.overtime_rate, cap))
        pts.add(min(b.idle_rate, cap))
    for n in range(scen.n):
        for b in range(inst.n_blocks):
            for r in _branch_crossings(inst, scen, n, b, sched):
                if 0.0 <= r <= cap:
                    pts.add(float(r))
    return np.array(sorted(pts))


def wdro_fixed_y_value(
    inst: Instance,
    scen: ScenarioSet,
    epsilon: float,
    sched: Schedule,
    grid: np.ndarray | None = None,
) -> float:
    """Worst-case expected recourse of a fixed schedule, by grid minimization.

    Evaluates ``epsilon * rho + (1/N) * sum of inner suprema`` over the grid
    and returns the minimum; with the default grid (all kinks included) this
    equals the exact infimum over nonnegative penalty rates.
    """
    if grid is None:
        grid = rho_grid(inst, scen, sched)
    total = np.zeros(len(grid))
    for n in range(scen.n):
        for b in range(inst.n_blocks):
            total += _inner_sup_grid(inst, scen, n, b, sched, grid)
    return float(np.min(epsilon * grid + total / scen.n))


def saa_objective_direct(
    inst: Instance, scen: ScenarioSet, sched: Schedule
) -> float:
    """First-stage cost plus the scenario-average recourse, in closed form."""
    rec = sum(recourse_cost(inst, sched, scen.scenario(n)) for n in range(scen.n))
    return first_stage_cost(inst, sched) + rec / scen.n


def max_support_recourse(inst: Instance, sched: Schedule) -> float:
    """Worst recourse over the whole support (the robust limit at huge radius).

    Per block the recourse depends on the load only, so the maximum is at
    one of the two extreme loads.
    """
    total = 0.0
    open_ids = (
        range(inst.n_blocks) if sched.open_blocks is None
        else sorted(sched.open_blocks)
    )
    for b in open_ids:
        block = inst.blocks[b]
        lo = block.e_lo - block.length
        hi = block.e_hi - block.length
        for i, t in sched.assignment.items():
            if t == b:
                lo += inst.surgeries[i].type.d_lo
                hi += inst.surgeries[i].type.d_hi
        total += max(
            max(block.overtime_rate * delta, -block.idle_rate * delta)
            for delta in (lo, hi)
        )
    return total


def _assignment_candidates(
    inst: Instance, open_blocks: Iterable[int] | None = None
) -> list[list[int]]:
    allowed = None if open_blocks is None else set(open_blocks)
    cands = []
    for s in inst.surgeries:
        blocks = [
            b for b in inst.compatible_blocks[s.id]
            if allowed is None or b in allowed
        ]
        cands.append([REJECT] + blocks)
    return cands


def exhaustive_best_schedule(
    inst: Instance, scen: ScenarioSet, epsilon: float
) -> tuple[Schedule, float]:
    """Global optimum by enumerating every feasible assignment.

    Scores each assignment with first-stage cost plus the fixed-assignment
    worst-case value; ties go to the lexicographically smallest assignment
    vector (rejection ordered before blocks).
    """
    cands = _assignment_candidates(inst)
    size = math.prod(len(c) for c in cands)
    if size > EXHAUSTIVE_LIMIT:
        raise ValueError(f"{size} assignments exceed the exhaustive limit")
    best: tuple[Schedule, float] | None = None
    for combo in itertools.product(*cands):
        sched = Schedule({s.id: t for s, t in zip(inst.surgeries, combo)})
        value = first_stage_cost(inst, sched) + wdro_fixed_y_value(
            inst, scen, epsilon, sched
        )
        if best is None or value < best[1] - 0.0:
            best = (sched, value)
    assert best is not None
    return best


def exhaustive_best_schedule_saa(
    inst: Instance, scen: ScenarioSet
) -> tuple[Schedule, float]:
    """Global SAA optimum by enumeration of assignments (closed-form recourse)."""
    cands = _assignment_candidates(inst)
    size = math.prod(len(c) for c in cands)
    if size > EXHAUSTIVE_LIMIT:
        raise ValueError(f"{size} assignments exceed the exhaustive limit")
    best: tuple[Schedule, float] | None = None
    for combo in itertools.product(*cands):
        sched = Schedule({s.id: t for s, t in zip(inst.surgeries, combo)})
        value = saa_objective_direct(inst, scen, sched)
        if best is None or value < best[1]:
            best = (sched, value)
    assert best is not None
    return best


def exhaustive_best_allocation(
    inst: Instance, scen: ScenarioSet, epsilon: float
) -> tuple[Schedule, float]:
    """Global block-allocation optimum: enumerate open sets and assignments."""
    n_b = inst.n_blocks
    total = 0
    best: tuple[Schedule, float] | None = None
    for mask in range(2 ** n_b):
        open_blocks = frozenset(b for b in range(n_b) if mask >> b & 1)
        cands = _assignment_candidates(inst, open_blocks)
        size = math.prod(len(c) for c in cands)
        total += size
        if total > EXHAUSTIVE_LIMIT:
            raise ValueError("allocation enumeration exceeds the exhaustive limit")
        for combo in itertools.product(*cands):
            sched = Schedule(
                {s.id: t for s, t in zip(inst.surgeries, combo)}, open_blocks
            )
            value = first_stage_cost(inst, sched) + wdro_fixed_y_value(
                inst, scen, epsilon, sched
            )
            if best is None or value < best[1]:
                best = (sched, value)
    assert best is not None
    return best


def mdro_inner_corner_value(
    inst: Instance,
    sched: Schedule,
    mu_d: np.ndarray,
    mu_e: np.ndarray,
    max_dims: int = 16,
) -> float:
    """Exact worst-case expected recourse over the mean-support ambiguity set.

    The recourse is convex in the uncertain vector, so the worst distribution
    lives on the support corners; this solves the corner-distribution LP
    (maximize expected recourse subject to the mean constraints) directly.
    Coordinates of rejected surgeries never enter the recourse and are
    dropped (their marginal can always be patched to match the mean).
    """
    scheduled = sorted(i for i, t in sched.assignment.items() if t != REJECT)
    dims: list[tuple[float, float, float]] = []
    for i in scheduled:
        t = inst.surgeries[i].type
        dims.append((t.d_lo, t.d_hi, float(mu_d[i])))
    for b in inst.blocks:
        dims.append((b.e_lo, b.e_hi, float(mu_e[b.id])))
    if len(dims) > max_dims:
        raise ValueError(f"{len(dims)} uncertain coordinates exceed corner limit")
    corners = list(itertools.product(*[(lo, hi) for lo, hi, _ in dims]))
    k = len(scheduled)
    f_vals = []
    for corner in corners:
        cost = 0.0
        for b in inst.blocks:
            load = corner[k + b.id]
            for col, i in enumerate(scheduled):
                if sched.assignment[i] == b.id:
                    load += corner[col]
            delta = load - b.length
            cost += max(b.overtime_rate * delta, -b.idle_rate * delta)
        f_vals.append(cost)
    a_eq = np.vstack(
        [np.array([c[j] for c in corners]) for j in range(len(dims))]
        + [np.ones(len(corners))]
    )
    b_eq = np.array([mu for _, _, mu in dims] + [1.0])
    res = linprog(
        -np.asarray(f_vals), A_eq=a_eq, b_eq=b_eq,
        bounds=[(0.0, 1.0)] * len(corners), method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"corner LP failed with status {res.status}")
    return float(-res.fun)


def exhaustive_best_schedule_mdro(
    inst: Instance, mu_d: np.ndarray, mu_e: np.ndarray
) -> tuple[Schedule, float]:
    """Global mean-support optimum by assignment enumeration + corner LP."""
    cands = _assignment_candidates(inst)
    size = math.prod(len(c) for c in cands)
    if size > 4096:
        raise ValueError(f"{size} assignments exceed the corner-LP enumeration limit")
    best: tuple[Schedule, float] | None = None
    for combo in itertools.product(*cands):
        sched = Schedule({s.id: t for s, t in zip(inst.surgeries, combo)})
        value = first_stage_cost(inst, sched) + mdro_inner_corner_value(
            inst, sched, mu_d, mu_e
        )
        if best is None or value < best[1]:
            best = (sched, value)
    assert best is not None
    return best
