"""MILP builders for the four planning models, plus schedule extraction.

Each builder is a pure function from (instance, config) to a
:class:`~orplan.milp.MilpModel` with canonically ordered variables and rows,
so the emitted model is reproducible regardless of how row generation might
be parallelized.  Builder bookkeeping needed to decode solutions lives in
``model.meta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from orplan.core import REJECT, Instance, Schedule
from orplan.ingest import ScenarioSet
from orplan.milp import BINARY, CONTINUOUS, MilpModel, MilpSolution

INTEGRALITY_DECODE_TOL = 1e-4
FIRST_STAGE_MATCH_TOL = 1e-6

#: Corner labels in canonical row order: durations x emergency x dual extreme.
_CORNER_ORDER = (
    ("hi", "hi", "o"), ("hi", "lo", "o"), ("hi", "hi", "g"), ("hi", "lo", "g"),
    ("lo", "hi", "o"), ("lo", "lo", "o"), ("lo", "hi", "g"), ("lo", "lo", "g"),
)


@dataclass(frozen=True)
class CutRow:
    """One affine lower bound on the per-(sample, block) epigraph variable.

    ``y_coef``/``pi_coef`` map compatible surgery ids to coefficients;
    ``x_coef``/``tau_coef`` are used only by the block-allocation variant,
    where the block's emergency and length terms scale with the open
    indicator.  Sample rows carry no penalty-rate coupling at all.
    """

    kind: str  # "corner" or "sample"
    d_corner: str | None
    e_corner: str | None
    beta: float
    y_coef: dict[int, float]
    pi_coef: dict[int, float]
    rho_coef: float
    const: float
    x_coef: float = 0.0
    tau_coef: float = 0.0

    def value(self, y: dict[int, float], rho: float, x: float = 1.0) -> float:
        """Row value at a fixed assignment and penalty rate (pi = rho * y)."""
        acc = self.const + self.rho_coef * rho * x + self.x_coef * x
        acc += self.tau_coef * rho * x
        for i, c in self.y_coef.items():
            acc += c * y.get(i, 0.0)
        for i, c in self.pi_coef.items():
            acc += c * rho * y.get(i, 0.0)
        return acc


def _row_data(inst: Instance, scen: ScenarioSet, n: int, b: int, scaled: bool):
    block = inst.blocks[b]
    co, cg = block.overtime_rate, block.idle_rate
    compat = [s.id for s in inst.surgeries if inst.is_compatible(s.id, b)]
    rows: list[CutRow] = []
    for d_c, e_c, beta_c in _CORNER_ORDER:
        beta = co if beta_c == "o" else -cg
        y_coef: dict[int, float] = {}
        pi_coef: dict[int, float] = {}
        for i in compat:
            t = inst.surgeries[i].type
            dv = t.d_hi if d_c == "hi" else t.d_lo
            y_coef[i] = dv * beta
            pi_coef[i] = -abs(dv - float(scen.d[n, i]))
        ev = block.e_hi if e_c == "hi" else block.e_lo
        e_dev = abs(ev - float(scen.e[n, b]))
        e_term = ev * beta - block.length * beta
        if scaled:
            rows.append(CutRow(
                "corner", d_c, e_c, beta, y_coef, pi_coef,
                rho_coef=0.0, const=0.0, x_coef=e_term, tau_coef=-e_dev,
            ))
        else:
            rows.append(CutRow(
                "corner", d_c, e_c, beta, y_coef, pi_coef,
                rho_coef=-e_dev, const=e_term,
            ))
    for beta_c in ("o", "g"):
        beta = co if beta_c == "o" else -cg
        y_coef = {i: float(scen.d[n, i]) * beta for i in compat}
        e_term = float(scen.e[n, b]) * beta - block.length * beta
        if scaled:
            rows.append(CutRow(
                "sample", None, None, beta, y_coef, {},
                rho_coef=0.0, const=0.0, x_coef=e_term,
            ))
        else:
            rows.append(CutRow(
                "sample", None, None, beta, y_coef, {},
                rho_coef=0.0, const=e_term,
            ))
    return rows


def eta_cut_rows(
    inst: Instance, scen: ScenarioSet, n: int, b: int
) -> list[CutRow]:
    """The ten epigraph rows for (sample ``n``, block ``b``).

    Eight corner rows (duration bound x emergency bound x dual extreme) plus
    two sample rows.  The bilinear penalty-times-assignment products appear
    through the ``pi`` coefficients.
    """
    return _row_data(inst, scen, n, b, scaled=False)


def wdsba_cut_rows(
    inst: Instance, scen: ScenarioSet, n: int, b: int
) -> list[CutRow]:
    """Block-allocation variant: emergency/length terms scale with the open
    indicator, and the emergency deviation couples through ``tau``."""
    return _row_data(inst, scen, n, b, scaled=True)


def default_rho_upper(inst: Instance) -> float:
    """Safe penalty-rate cap: beyond the largest unit cost every corner row
    is dominated by a sample row, so larger rates never help."""
    return max(max(b.overtime_rate, b.idle_rate) for b in inst.blocks)


@dataclass(frozen=True)
class WdroConfig:
    """Wasserstein-ball model configuration (L1 transport metric)."""

    epsilon: float
    scenarios: ScenarioSet
    rho_upper: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def resolved_rho_upper(self, inst: Instance) -> float:
        safe = default_rho_upper(inst)
        if self.rho_upper is None:
            return safe
        if self.rho_upper < safe:
            raise ValueError(
                f"rho_upper {self.rho_upper} below the safe bound {safe}"
            )
        return self.rho_upper


@dataclass(frozen=True)
class MomentInfo:
    """Means for the mean-support model; supports come from the instance."""

    mu_d: np.ndarray
    mu_e: np.ndarray
    rho_lo: float | None = None
    rho_hi: float | None = None

    @classmethod
    def from_instance(cls, inst: Instance) -> "MomentInfo":
        mu_d = np.array([s.type.mean_duration for s in inst.surgeries])
        mu_e = np.array([b.e_mean for b in inst.blocks])
        return cls(mu_d=mu_d, mu_e=mu_e)

    def validate(self, inst: Instance) -> None:
        for s in inst.surgeries:
            if not (s.type.d_lo <= self.mu_d[s.id] <= s.type.d_hi):
                raise ValueError(f"mean duration of surgery {s.id} outside support")
        for b in inst.blocks:
            if not (b.e_lo <= self.mu_e[b.id] <= b.e_hi):
                raise ValueError(f"mean emergency load of block {b.id} outside support")

    def rho_bounds(self, inst: Instance) -> tuple[float, float]:
        span = max(b.overtime_rate for b in inst.blocks) + max(
            b.idle_rate for b in inst.blocks
        )
        lo = -span if self.rho_lo is None else self.rho_lo
        hi = span if self.rho_hi is None else self.rho_hi
        if not lo < hi:
            raise ValueError("empty rho bound interval")
        return lo, hi


def _add_assignment(model: MilpModel, inst: Instance):
    y_name: dict[tuple[int, int], str] = {}
    r_name: dict[int, str] = {}
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            y_name[(s.id, b)] = model.add_variable(f"y_{s.id}_{b}", 0, 1, BINARY)
        r_name[s.id] = model.add_variable(f"yr_{s.id}", 0, 1, BINARY)
    for s in inst.surgeries:
        terms = [(y_name[(s.id, b)], 1.0) for b in inst.compatible_blocks[s.id]]
        terms.append((r_name[s.id], 1.0))
        model.add_constraint(f"assign_{s.id}", terms, "=", 1.0)
    first_stage = {}
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            first_stage[y_name[(s.id, b)]] = s.schedule_cost
        first_stage[r_name[s.id]] = s.reject_cost
    return y_name, r_name, first_stage


def build_saa(inst: Instance, scen: ScenarioSet) -> MilpModel:
    """Sample-average model: scenario-indexed overtime/idle balances."""
    if scen.n == 0:
        raise ValueError("empty scenario set")
    model = MilpModel(name="saa")
    y_name, r_name, objective = _add_assignment(model, inst)
    o_name: dict[tuple[int, int], str] = {}
    g_name: dict[tuple[int, int], str] = {}
    for b in range(inst.n_blocks):
        for n in range(scen.n):
            o_name[(b, n)] = model.add_variable(f"o_{b}_{n}", 0, math.inf)
            g_name[(b, n)] = model.add_variable(f"g_{b}_{n}", 0, math.inf)
    for b_obj in inst.blocks:
        b = b_obj.id
        for n in range(scen.n):
            terms = [(o_name[(b, n)], 1.0), (g_name[(b, n)], -1.0)]
            for s in inst.surgeries:
                if inst.is_compatible(s.id, b):
                    terms.append((y_name[(s.id, b)], -float(scen.d[n, s.id])))
            rhs = float(scen.e[n, b]) - b_obj.length
            model.add_constraint(f"bal_{b}_{n}", terms, "=", rhs)
            objective[o_name[(b, n)]] = b_obj.overtime_rate / scen.n
            objective[g_name[(b, n)]] = b_obj.idle_rate / scen.n
    model.set_objective(objective)
    model.meta = {
        "kind": "saa",
        "y": {f"{i}_{b}": name for (i, b), name in y_name.items()},
        "reject": {str(i): name for i, name in r_name.items()},
        "first_stage_vars": sorted(
            list(y_name.values()) + list(r_name.values())
        ),
    }
    model.validate()
    return model


def _mccormick_product(
    model: MilpModel, prod: str, scalar: str, indicator: str, upper: float, tag: str
) -> None:
    # prod = scalar * indicator with scalar in [0, upper], indicator binary
    model.add_constraint(
        f"mc_lo_{tag}", [(prod, 1.0), (scalar, -1.0), (indicator, -upper)], ">=", -upper
    )
    model.add_constraint(f"mc_ub_{tag}", [(prod, 1.0), (indicator, -upper)], "<=", 0.0)
    model.add_constraint(f"mc_sc_{tag}", [(prod, 1.0), (scalar, -1.0)], "<=", 0.0)


def _per_block_maps(inst: Instance, y_name, pi_name):
    y_by_block: dict[int, dict[int, str]] = {b: {} for b in range(inst.n_blocks)}
    pi_by_block: dict[int, dict[int, str]] = {b: {} for b in range(inst.n_blocks)}
    for (i, b), name in y_name.items():
        y_by_block[b][i] = name
    for (i, b), name in pi_name.items():
        pi_by_block[b][i] = name
    return y_by_block, pi_by_block


def _cut_constraint_terms(
    row: CutRow, eta: str, y_name, pi_name, rho: str | None,
    x: str | None = None, tau: str | None = None,
):
    terms = [(eta, 1.0)]
    for i, c in row.y_coef.items():
        if c != 0.0:
            terms.append((y_name[i], -c))
    for i, c in row.pi_coef.items():
        if c != 0.0:
            terms.append((pi_name[i], -c))
    if rho is not None and row.rho_coef != 0.0:
        terms.append((rho, -row.rho_coef))
    if x is not None and row.x_coef != 0.0:
        terms.append((x, -row.x_coef))
    if tau is not None and row.tau_coef != 0.0:
        terms.append((tau, -row.tau_coef))
    return terms


def build_wdro(inst: Instance, cfg: WdroConfig) -> MilpModel:
    """Wasserstein-ball model as one MILP.

    Binary assignment variables, one penalty rate, its per-pair McCormick
    products, and a free epigraph variable per (sample, block) bounded below
    by all ten cut rows.  Objective: first-stage cost + radius * rate +
    average epigraph value.
    """
    scen = cfg.scenarios
    if scen.n == 0:
        raise ValueError("empty scenario set")
    rho_up = cfg.resolved_rho_upper(inst)
    model = MilpModel(name="wdro")
    y_name, r_name, objective = _add_assignment(model, inst)
    rho = model.add_variable("rho", 0.0, rho_up)
    pi_name: dict[tuple[int, int], str] = {}
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            pi_name[(s.id, b)] = model.add_variable(f"pi_{s.id}_{b}", 0.0, rho_up)
    eta_name: dict[tuple[int, int], str] = {}
    for n in range(scen.n):
        for b in range(inst.n_blocks):
            eta_name[(n, b)] = model.add_variable(
                f"eta_{n}_{b}", -math.inf, math.inf
            )
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            _mccormick_product(
                model, pi_name[(s.id, b)], rho, y_name[(s.id, b)], rho_up,
                f"pi_{s.id}_{b}",
            )
    y_by_block, pi_by_block = _per_block_maps(inst, y_name, pi_name)
    for n in range(scen.n):
        for b in range(inst.n_blocks):
            for k, row in enumerate(eta_cut_rows(inst, scen, n, b)):
                model.add_constraint(
                    f"cut_{n}_{b}_{k}",
                    _cut_constraint_terms(
                        row, eta_name[(n, b)], y_by_block[b], pi_by_block[b], rho
                    ),
                    ">=",
                    row.const,
                )
    objective[rho] = cfg.epsilon
    for key in eta_name:
        objective[eta_name[key]] = 1.0 / scen.n
    model.set_objective(objective)
    model.meta = {
        "kind": "wdro",
        "y": {f"{i}_{b}": name for (i, b), name in y_name.items()},
        "reject": {str(i): name for i, name in r_name.items()},
        "pi": {f"{i}_{b}": name for (i, b), name in pi_name.items()},
        "first_stage_vars": sorted(list(y_name.values()) + list(r_name.values())),
        "rho_var": rho,
        "eta_vars": sorted(eta_name.values()),
        "epsilon": cfg.epsilon,
        "rho_upper": rho_up,
        "n_scenarios": scen.n,
    }
    model.validate()
    return model


def build_wdsba(inst: Instance, cfg: WdroConfig) -> MilpModel:
    """Block-allocation extension: open indicators gate each block.

    A closed block carries no emergency load or capacity, every linking row
    forces its assignments to zero, and its epigraph variable collapses to
    zero; opening costs enter the first stage.
    """
    scen = cfg.scenarios
    if scen.n == 0:
        raise ValueError("empty scenario set")
    for b in inst.blocks:
        if b.open_cost is None:
            raise ValueError(f"block {b.id} has no open_cost")
    rho_up = cfg.resolved_rho_upper(inst)
    model = MilpModel(name="wdsba")
    y_name, r_name, objective = _add_assignment(model, inst)
    x_name = {
        b.id: model.add_variable(f"x_{b.id}", 0, 1, BINARY) for b in inst.blocks
    }
    rho = model.add_variable("rho", 0.0, rho_up)
    pi_name: dict[tuple[int, int], str] = {}
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            pi_name[(s.id, b)] = model.add_variable(f"pi_{s.id}_{b}", 0.0, rho_up)
    tau_name = {
        b.id: model.add_variable(f"tau_{b.id}", 0.0, rho_up) for b in inst.blocks
    }
    eta_name: dict[tuple[int, int], str] = {}
    for n in range(scen.n):
        for b in range(inst.n_blocks):
            eta_name[(n, b)] = model.add_variable(
                f"eta_{n}_{b}", -math.inf, math.inf
            )
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            model.add_constraint(
                f"link_{s.id}_{b}",
                [(y_name[(s.id, b)], 1.0), (x_name[b], -1.0)],
                "<=",
                0.0,
            )
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            _mccormick_product(
                model, pi_name[(s.id, b)], rho, y_name[(s.id, b)], rho_up,
                f"pi_{s.id}_{b}",
            )
    for b in range(inst.n_blocks):
        _mccormick_product(model, tau_name[b], rho, x_name[b], rho_up, f"tau_{b}")
    y_by_block, pi_by_block = _per_block_maps(inst, y_name, pi_name)
    for n in range(scen.n):
        for b in range(inst.n_blocks):
            for k, row in enumerate(wdsba_cut_rows(inst, scen, n, b)):
                model.add_constraint(
                    f"cut_{n}_{b}_{k}",
                    _cut_constraint_terms(
                        row, eta_name[(n, b)], y_by_block[b], pi_by_block[b], rho,
                        x=x_name[b], tau=tau_name[b],
                    ),
                    ">=",
                    row.const,
                )
    for b in inst.blocks:
        objective[x_name[b.id]] = float(b.open_cost)
    objective[rho] = cfg.epsilon
    for key in eta_name:
        objective[eta_name[key]] = 1.0 / scen.n
    model.set_objective(objective)
    model.meta = {
        "kind": "wdsba",
        "y": {f"{i}_{b}": name for (i, b), name in y_name.items()},
        "reject": {str(i): name for i, name in r_name.items()},
        "x": {str(b): name for b, name in x_name.items()},
        "pi": {f"{i}_{b}": name for (i, b), name in pi_name.items()},
        "tau": {str(b): name for b, name in tau_name.items()},
        "first_stage_vars": sorted(
            list(y_name.values()) + list(r_name.values()) + list(x_name.values())
        ),
        "rho_var": rho,
        "eta_vars": sorted(eta_name.values()),
        "epsilon": cfg.epsilon,
        "rho_upper": rho_up,
        "n_scenarios": scen.n,
    }
    model.validate()
    return model


def build_mdro(inst: Instance, mom: MomentInfo) -> MilpModel:
    """Mean-support model: scenario-free dual with per-surgery price variables.

    Eight corner rows per block bound the epigraph; the price-times-assignment
    products are linearized with two-sided McCormick rows (prices may be
    negative).  Valid here because every block hosts a single specialty, so
    all coordinates sharing a block share their support and mean.
    """
    mom.validate(inst)
    rho_lo, rho_hi = mom.rho_bounds(inst)
    model = MilpModel(name="mdro")
    y_name, r_name, objective = _add_assignment(model, inst)
    rho_name = {
        s.id: model.add_variable(f"rho_{s.id}", rho_lo, rho_hi)
        for s in inst.surgeries
    }
    alpha_name = {
        b.id: model.add_variable(f"alpha_{b.id}", -math.inf, math.inf)
        for b in inst.blocks
    }
    eta_name = {
        b.id: model.add_variable(f"eta_{b.id}", -math.inf, math.inf)
        for b in inst.blocks
    }
    k_lo, k_hi = min(rho_lo, 0.0), max(rho_hi, 0.0)
    k_name: dict[tuple[int, int], str] = {}
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            k_name[(s.id, b)] = model.add_variable(f"k_{s.id}_{b}", k_lo, k_hi)
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            k, y, rho = k_name[(s.id, b)], y_name[(s.id, b)], rho_name[s.id]
            tag = f"k_{s.id}_{b}"
            model.add_constraint(f"mc_a_{tag}", [(k, 1.0), (y, -rho_lo)], ">=", 0.0)
            model.add_constraint(
                f"mc_b_{tag}", [(k, 1.0), (rho, -1.0), (y, -rho_hi)], ">=", -rho_hi
            )
            model.add_constraint(f"mc_c_{tag}", [(k, 1.0), (y, -rho_hi)], "<=", 0.0)
            model.add_constraint(
                f"mc_d_{tag}", [(k, 1.0), (rho, -1.0), (y, -rho_lo)], "<=", -rho_lo
            )
    for blk in inst.blocks:
        b = blk.id
        compat = [s.id for s in inst.surgeries if inst.is_compatible(s.id, b)]
        for idx, (d_c, e_c, beta_c) in enumerate(_CORNER_ORDER):
            beta = blk.overtime_rate if beta_c == "o" else -blk.idle_rate
            ev = blk.e_hi if e_c == "hi" else blk.e_lo
            terms = [(eta_name[b], 1.0), (alpha_name[b], ev)]
            for i in compat:
                t = inst.surgeries[i].type
                dv = t.d_hi if d_c == "hi" else t.d_lo
                terms.append((y_name[(i, b)], -dv * beta))
                terms.append((k_name[(i, b)], dv))
            rhs = ev * beta - blk.length * beta
            model.add_constraint(f"corner_{b}_{idx}", terms, ">=", rhs)
    for s in inst.surgeries:
        for b in inst.compatible_blocks[s.id]:
            objective[k_name[(s.id, b)]] = float(mom.mu_d[s.id])
    for b in inst.blocks:
        objective[alpha_name[b.id]] = float(mom.mu_e[b.id])
        objective[eta_name[b.id]] = 1.0
    model.set_objective(objective)
    model.meta = {
        "kind": "mdro",
        "y": {f"{i}_{b}": name for (i, b), name in y_name.items()},
        "reject": {str(i): name for i, name in r_name.items()},
        "first_stage_vars": sorted(list(y_name.values()) + list(r_name.values())),
        "rho_vars": {str(i): name for i, name in rho_name.items()},
        "rho_bounds": (rho_lo, rho_hi),
    }
    model.validate()
    return model


def mdro_active_rho_bounds(
    model: MilpModel, sol: MilpSolution, tol: float = 1e-6
) -> list[int]:
    """Blocks whose duration-price aggregate is clipped by the declared box.

    Within a block all scheduled surgeries share a type, so only the sum of
    their prices is determined; solvers may park individual prices on a bound
    without the box binding.  The box genuinely binds only when every
    scheduled surgery of a block sits on the same bound.  A nonempty result
    signals the bounds should be widened.  Rejected surgeries never matter:
    their prices are unconstrained.
    """
    meta = model.meta
    rho_lo, rho_hi = meta["rho_bounds"]
    by_block: dict[int, list[float]] = {}
    for key, name in meta["y"].items():
        if sol.values[name] > 0.5:
            i, b = (int(p) for p in key.split("_"))
            by_block.setdefault(b, []).append(sol.values[meta["rho_vars"][str(i)]])
    active = []
    for b, prices in sorted(by_block.items()):
        if all(v <= rho_lo + tol for v in prices) or all(
            v >= rho_hi - tol for v in prices
        ):
            active.append(b)
    return active


def extract_schedule(
    model: MilpModel, sol: MilpSolution, require_optimal: bool = True
) -> Schedule:
    """Decode an optimal solution into a schedule.

    Assignment values are rounded at 0.5 after checking they are within 1e-4
    of integrality; the re-evaluated first-stage cost must match the
    objective's first-stage component.  ``require_optimal=False`` decodes a
    feasible incumbent from a time-limited solve instead of refusing it.
    """
    if sol.status != "optimal" and (require_optimal or not sol.values):
        raise ValueError(f"cannot extract schedule from status {sol.status!r}")
    meta = model.meta
    binaries = dict(meta["y"])
    binaries.update({f"r{k}": v for k, v in meta["reject"].items()})
    if "x" in meta:
        binaries.update({f"x{k}": v for k, v in meta["x"].items()})
    rounded: dict[str, int] = {}
    for key, name in binaries.items():
        v = sol.values[name]
        if abs(v - round(v)) > INTEGRALITY_DECODE_TOL:
            raise ValueError(f"variable {name} = {v!r} is not integral")
        rounded[name] = int(v >= 0.5)

    assignment: dict[int, int] = {}
    for key, name in meta["y"].items():
        i, b = (int(p) for p in key.split("_"))
        if rounded[name]:
            if i in assignment:
                raise ValueError(f"surgery {i} assigned twice")
            assignment[i] = b
    for key, name in meta["reject"].items():
        i = int(key)
        if rounded[name]:
            if i in assignment:
                raise ValueError(f"surgery {i} both assigned and rejected")
            assignment[i] = REJECT
        elif i not in assignment:
            raise ValueError(f"surgery {i} has no target")

    open_blocks = None
    if "x" in meta:
        open_blocks = frozenset(
            int(k) for k, name in meta["x"].items() if rounded[name]
        )
        for i, b in assignment.items():
            if b != REJECT and b not in open_blocks:
                raise ValueError(f"surgery {i} assigned to closed block {b}")

    fs_component = sum(
        model.objective.get(name, 0.0) * sol.values[name]
        for name in meta["first_stage_vars"]
    )
    fs_rounded = sum(
        model.objective.get(name, 0.0) * rounded[name]
        for name in meta["first_stage_vars"]
        if name in rounded
    )
    if abs(fs_component - fs_rounded) > FIRST_STAGE_MATCH_TOL * (1 + abs(fs_rounded)):
        raise ValueError(
            f"first-stage component {fs_component!r} does not match the "
            f"decoded schedule cost {fs_rounded!r}"
        )
    return Schedule(assignment, open_blocks)


def fix_schedule(model: MilpModel, sched: Schedule) -> MilpModel:
    """Copy of the model with the assignment bounds pinned to a schedule.

    Solving the result optimizes only the second-stage dual variables, which
    is what fixed-assignment verification needs.
    """
    from orplan.milp import Variable

    meta = model.meta
    target: dict[str, float] = {}
    for key, name in meta["y"].items():
        i, b = (int(p) for p in key.split("_"))
        target[name] = 1.0 if sched.assignment.get(i) == b else 0.0
    for key, name in meta["reject"].items():
        target[name] = 1.0 if sched.assignment[int(key)] == REJECT else 0.0
    if "x" in meta:
        if sched.open_blocks is None:
            raise ValueError("block-allocation model needs open_blocks")
        for key, name in meta["x"].items():
            target[name] = 1.0 if int(key) in sched.open_blocks else 0.0
    variables = [
        Variable(v.name, target.get(v.name, v.lb), target.get(v.name, v.ub), v.kind)
        for v in model.variables
    ]
    fixed = MilpModel(
        name=model.name + "_fixed",
        variables=variables,
        constraints=list(model.constraints),
        objective=dict(model.objective),
        objective_constant=model.objective_constant,
        meta=dict(model.meta),
    )
    return fixed


def model_size(model: MilpModel) -> dict[str, int]:
    """Variable/constraint counts by kind, for size assertions and reports."""
    n_bin = sum(1 for v in model.variables if v.kind == BINARY)
    n_cont = sum(1 for v in model.variables if v.kind == CONTINUOUS)
    n_cut = sum(1 for c in model.constraints if c.name.startswith("cut_"))
    return {
        "binaries": n_bin,
        "continuous": n_cont,
        "variables": n_bin + n_cont,
        "constraints": len(model.constraints),
        "cut_rows": n_cut,
    }
