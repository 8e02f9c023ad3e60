"""Solver-agnostic MILP representation plus two independent solution paths.

``solve`` dispatches to an external MIP backend (the shipped default is the
HiGHS solver bundled with scipy); ``solve_reference_bnb`` is a bundled exact
branch-and-bound for tiny models, used as a test oracle.  Models round-trip
through a plain LP-file text format for offline inspection.
"""

from __future__ import annotations

import heapq
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog
from scipy.optimize import milp as _scipy_milp

CONTINUOUS = "continuous"
BINARY = "binary"

FEASIBILITY_TOL = 1e-6
INTEGRALITY_TOL = 1e-6
MAX_REFERENCE_BINARIES = 30

BACKEND_ENV_VAR = "ORPLAN_SOLVER"


class BackendError(RuntimeError):
    """Raised when the selected MIP backend is unavailable or misbehaves."""


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float
    ub: float
    kind: str = CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # one of "<=", "=", ">="
    rhs: float


@dataclass
class SolveParams:
    time_limit: float = 600.0
    rel_gap: float = 1e-6
    threads: int = 1

    def __post_init__(self) -> None:
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass
class MilpSolution:
    status: str  # optimal | infeasible | unbounded | limit
    objective: float
    values: dict[str, float]
    gap: float
    runtime: float


@dataclass
class MilpModel:
    """A minimize-form mixed binary/continuous linear program.

    ``meta`` is builder-private bookkeeping (e.g. which variables encode the
    assignment) and is not part of the mathematical model; it is ignored by
    serialization and equality of the mathematical content.
    """

    name: str = "model"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    meta: dict = field(default_factory=dict)

    def add_variable(
        self, name: str, lb: float = 0.0, ub: float = math.inf, kind: str = CONTINUOUS
    ) -> str:
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY and not (math.isfinite(lb) and math.isfinite(ub)):
            raise ValueError("binary variables need finite bounds")
        self.variables.append(Variable(name, float(lb), float(ub), kind))
        return name

    def add_constraint(
        self, name: str, terms: list[tuple[str, float]], sense: str, rhs: float
    ) -> None:
        if sense not in ("<=", "=", ">="):
            raise ValueError(f"unknown constraint sense {sense!r}")
        self.constraints.append(Constraint(name, tuple(terms), sense, rhs))

    def set_objective(self, terms: dict[str, float], constant: float = 0.0) -> None:
        self.objective = dict(terms)
        self.objective_constant = constant

    def var_index(self) -> dict[str, int]:
        return {v.name: k for k, v in enumerate(self.variables)}

    def binary_names(self) -> list[str]:
        return [v.name for v in self.variables if v.kind == BINARY]

    def validate(self) -> None:
        """Raise ``ValueError`` on duplicate names or undeclared references."""
        idx = self.var_index()
        if len(idx) != len(self.variables):
            raise ValueError("variable names must be unique")
        for v in self.variables:
            if v.lb > v.ub:
                raise ValueError(f"variable {v.name}: lb > ub")
        for c in self.constraints:
            for name, _ in c.terms:
                if name not in idx:
                    raise ValueError(f"constraint {c.name} references unknown {name}")
        for name in self.objective:
            if name not in idx:
                raise ValueError(f"objective references unknown {name}")

    def same_model(self, other: "MilpModel") -> bool:
        """Structural equality of the mathematical content (meta excluded)."""
        return (
            self.name == other.name
            and self.variables == other.variables
            and self.constraints == other.constraints
            and self.objective == other.objective
            and self.objective_constant == other.objective_constant
        )

    def objective_value(self, values: dict[str, float]) -> float:
        return (
            sum(coef * values[name] for name, coef in self.objective.items())
            + self.objective_constant
        )


def constraint_violation(model: MilpModel, values: dict[str, float]) -> float:
    """Largest absolute violation of any constraint or bound by ``values``."""
    worst = 0.0
    for v in model.variables:
        x = values[v.name]
        worst = max(worst, v.lb - x, x - v.ub)
    for c in model.constraints:
        lhs = sum(coef * values[name] for name, coef in c.terms)
        if c.sense == "<=":
            worst = max(worst, lhs - c.rhs)
        elif c.sense == ">=":
            worst = max(worst, c.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - c.rhs))
    return worst


def _to_arrays(model: MilpModel):
    idx = model.var_index()
    n = len(model.variables)
    c = np.zeros(n)
    for name, coef in model.objective.items():
        c[idx[name]] += coef
    lb = np.array([v.lb for v in model.variables])
    ub = np.array([v.ub for v in model.variables])
    integrality = np.array(
        [1 if v.kind == BINARY else 0 for v in model.variables], dtype=int
    )
    rows, cols, data = [], [], []
    clo = np.empty(len(model.constraints))
    chi = np.empty(len(model.constraints))
    for k, con in enumerate(model.constraints):
        for name, coef in con.terms:
            rows.append(k)
            cols.append(idx[name])
            data.append(coef)
        if con.sense == "<=":
            clo[k], chi[k] = -np.inf, con.rhs
        elif con.sense == ">=":
            clo[k], chi[k] = con.rhs, np.inf
        else:
            clo[k], chi[k] = con.rhs, con.rhs
    a = sparse.csr_matrix(
        (data, (rows, cols)), shape=(len(model.constraints), n)
    )
    return c, integrality, lb, ub, a, clo, chi


def _solve_highs(model: MilpModel, params: SolveParams) -> MilpSolution:
    c, integrality, lb, ub, a, clo, chi = _to_arrays(model)
    options = {
        "time_limit": float(params.time_limit),
        "mip_rel_gap": float(params.rel_gap),
    }
    t0 = time.perf_counter()
    constraints = [LinearConstraint(a, clo, chi)] if a.shape[0] else []
    res = _scipy_milp(
        c=c,
        integrality=integrality,
        bounds=Bounds(lb, ub),
        constraints=constraints,
        options=options,
    )
    runtime = time.perf_counter() - t0
    status_map = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}
    status = status_map.get(res.status, "limit")
    if res.x is None:
        return MilpSolution(status, math.nan, {}, math.inf, runtime)
    values = {v.name: float(x) for v, x in zip(model.variables, res.x)}
    objective = model.objective_value(values)
    gap = float(res.mip_gap) if res.mip_gap is not None else 0.0
    return MilpSolution(status, objective, values, gap, runtime)


_BACKENDS: dict[str, Callable[[MilpModel, SolveParams], MilpSolution]] = {
    "highs": _solve_highs,
}


def register_backend(
    name: str, fn: Callable[[MilpModel, SolveParams], MilpSolution]
) -> None:
    _BACKENDS[name] = fn


def solve(
    model: MilpModel, params: SolveParams | None = None, backend: str | None = None
) -> MilpSolution:
    """Solve through the configured backend and re-check feasibility.

    Backend resolution order: explicit argument, the ``ORPLAN_SOLVER``
    environment variable, then the bundled HiGHS backend.  Any solution
    reported optimal is re-checked against every constraint at absolute
    tolerance 1e-6 before being surfaced.
    """
    model.validate()
    params = params or SolveParams()
    name = backend or os.environ.get(BACKEND_ENV_VAR) or "highs"
    if name not in _BACKENDS:
        raise BackendError(
            f"backend {name!r} unavailable; known: {sorted(_BACKENDS)}"
        )
    sol = _BACKENDS[name](model, params)
    if sol.status == "optimal":
        worst = constraint_violation(model, sol.values)
        if worst > FEASIBILITY_TOL:
            raise BackendError(
                f"backend {name} returned infeasible 'optimal' point "
                f"(violation {worst:.3e})"
            )
    return sol


# --- reference branch-and-bound ---------------------------------------------


def _lp_relaxation(
    c, a, clo, chi, lb, ub
) -> tuple[str, float, np.ndarray | None]:
    # two-sided rows clo <= Ax <= chi as a stacked A_ub, skipping inert sides
    a_ub = b_ub = None
    if a.shape[0]:
        up = np.isfinite(chi)
        lo = np.isfinite(clo)
        a_ub = sparse.vstack([a[up], -a[lo]]).tocsr()
        b_ub = np.concatenate([chi[up], -clo[lo]])
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=np.column_stack([lb, ub]),
        method="highs",
    )
    if res.status == 0:
        return "optimal", float(res.fun), res.x
    if res.status == 2:
        return "infeasible", math.inf, None
    if res.status == 3:
        return "unbounded", -math.inf, None
    return "limit", math.inf, None


def solve_reference_bnb(
    model: MilpModel, params: SolveParams | None = None
) -> MilpSolution:
    """Exact best-bound branch-and-bound over the binary variables.

    Branches on the most fractional binary, bounding each node with its LP
    relaxation.  Only intended for models with at most 30 binaries; it exists
    to certify backend results, not to be fast.
    """
    model.validate()
    params = params or SolveParams()
    t0 = time.perf_counter()
    c, integrality, lb0, ub0, a, clo, chi = _to_arrays(model)
    bin_idx = np.flatnonzero(integrality == 1)
    if len(bin_idx) > MAX_REFERENCE_BINARIES:
        raise ValueError(
            f"reference solver limited to {MAX_REFERENCE_BINARIES} binaries, "
            f"got {len(bin_idx)}"
        )
    best_obj = math.inf
    best_x: np.ndarray | None = None
    counter = 0
    status, bound, x = _lp_relaxation(c, a, clo, chi, lb0, ub0)
    if status == "infeasible":
        return MilpSolution("infeasible", math.nan, {}, math.inf, time.perf_counter() - t0)
    if status == "unbounded":
        return MilpSolution("unbounded", -math.inf, {}, math.inf, time.perf_counter() - t0)
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (bound, counter, lb0, ub0, x))
    while heap:
        bound, _, lb, ub, x = heapq.heappop(heap)
        if bound >= best_obj - 1e-12:
            continue
        frac = np.abs(x[bin_idx] - np.round(x[bin_idx]))
        if frac.size == 0 or frac.max() <= INTEGRALITY_TOL:
            if bound < best_obj:
                best_obj, best_x = bound, x
            continue
        j = bin_idx[int(np.argmax(frac))]
        for val in (0.0, 1.0):
            lbc, ubc = lb.copy(), ub.copy()
            lbc[j] = ubc[j] = val
            st, bd, xx = _lp_relaxation(c, a, clo, chi, lbc, ubc)
            if st == "optimal" and bd < best_obj - 1e-12:
                counter += 1
                heapq.heappush(heap, (bd, counter, lbc, ubc, xx))
    runtime = time.perf_counter() - t0
    if best_x is None:
        return MilpSolution("infeasible", math.nan, {}, math.inf, runtime)
    values = {v.name: float(x) for v, x in zip(model.variables, best_x)}
    for v in model.variables:
        if v.kind == BINARY:
            values[v.name] = float(round(values[v.name]))
    return MilpSolution(
        "optimal", model.objective_value(values), values, 0.0, runtime
    )


# --- LP-file text format -----------------------------------------------------
#
# Plain CPLEX-style LP text: Minimize / Subject To / Bounds / Binaries / End.
# Coefficients are written with repr() so that parsing them back reproduces
# the exact floats (structural round-trip).


def _fmt_terms(terms: list[tuple[str, float]]) -> str:
    parts: list[str] = []
    for name, coef in terms:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {repr(abs(coef))} {name}")
    if not parts:
        return "0"
    first = parts[0]
    if first.startswith("+ "):
        first = first[2:]
    return " ".join([first] + parts[1:])


def write_lp(model: MilpModel) -> str:
    lines = [f"\\ {model.name}", "Minimize"]
    obj_terms = list(model.objective.items())
    obj = _fmt_terms(obj_terms)
    if model.objective_constant:
        sign = "-" if model.objective_constant < 0 else "+"
        obj += f" {sign} {repr(abs(model.objective_constant))}"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for con in model.constraints:
        lines.append(
            f" {con.name}: {_fmt_terms(list(con.terms))} {con.sense} {repr(con.rhs)}"
        )
    lines.append("Bounds")
    for v in model.variables:
        lo = "-inf" if v.lb == -math.inf else repr(v.lb)
        hi = "+inf" if v.ub == math.inf else repr(v.ub)
        lines.append(f" {lo} <= {v.name} <= {hi}")
    binaries = model.binary_names()
    if binaries:
        lines.append("Binaries")
        for name in binaries:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_terms(text: str) -> tuple[list[tuple[str, float]], float]:
    tokens = text.split()
    terms: list[tuple[str, float]] = []
    constant = 0.0
    sign = 1.0
    k = 0
    while k < len(tokens):
        tok = tokens[k]
        if tok == "+":
            sign = 1.0
            k += 1
            continue
        if tok == "-":
            sign = -1.0
            k += 1
            continue
        value = float(tok)
        if k + 1 < len(tokens) and tokens[k + 1] not in ("+", "-"):
            terms.append((tokens[k + 1], sign * value))
            k += 2
        else:
            constant += sign * value
            k += 1
        sign = 1.0
    return terms, constant


def parse_lp(text: str) -> MilpModel:
    """Parse text produced by :func:`write_lp` back into a model."""
    lines = [ln.strip() for ln in text.splitlines()]
    name = "model"
    section = None
    obj_text = ""
    con_texts: list[tuple[str, str]] = []
    bound_lines: list[str] = []
    binaries: set[str] = set()
    for ln in lines:
        if not ln:
            continue
        if ln.startswith("\\"):
            name = ln[1:].strip() or name
            continue
        low = ln.lower()
        if low == "minimize":
            section = "obj"
            continue
        if low == "subject to":
            section = "con"
            continue
        if low == "bounds":
            section = "bnd"
            continue
        if low == "binaries":
            section = "bin"
            continue
        if low == "end":
            break
        if section == "obj":
            obj_text += " " + ln.split(":", 1)[1] if ":" in ln else " " + ln
        elif section == "con":
            cname, body = ln.split(":", 1)
            con_texts.append((cname.strip(), body.strip()))
        elif section == "bnd":
            bound_lines.append(ln)
        elif section == "bin":
            binaries.update(ln.split())

    model = MilpModel(name=name)
    bounds: dict[str, tuple[float, float]] = {}
    order: list[str] = []
    for ln in bound_lines:
        lo_s, _, rest = ln.partition("<=")
        vname, _, hi_s = rest.partition("<=")
        vname = vname.strip()
        lo = -math.inf if lo_s.strip() == "-inf" else float(lo_s)
        hi = math.inf if hi_s.strip() == "+inf" else float(hi_s)
        bounds[vname] = (lo, hi)
        order.append(vname)
    for vname in order:
        lo, hi = bounds[vname]
        model.add_variable(
            vname, lo, hi, BINARY if vname in binaries else CONTINUOUS
        )
    for cname, body in con_texts:
        for sense in (">=", "<=", "="):
            if f" {sense} " in body:
                lhs, rhs = body.rsplit(f" {sense} ", 1)
                terms, const = _parse_terms(lhs)
                model.add_constraint(cname, terms, sense, float(rhs) - const)
                break
        else:
            raise ValueError(f"constraint {cname}: no sense found")
    terms, const = _parse_terms(obj_text)
    model.set_objective(dict(terms), const)
    model.validate()
    return model
