"""Command-line entry point for reproducible planning runs.

Subcommands: ``gen`` (instances and data), ``solve`` (one model), ``simulate``
(out-of-sample evaluation of a schedule), ``sweep`` (radius sweep),
``experiment`` (named studies), ``verify`` (oracle suite).  Flag values take
precedence over a JSON config file, which takes precedence over defaults; the
effective configuration is echoed to ``resolved-config.json`` in the output
directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from orplan import benchmark, core, evaluate, ingest, models, verify
from orplan.milp import SolveParams, write_lp

EXPERIMENTS = (
    "radius-sweep",
    "perfect-info",
    "misspecified-logn",
    "policy-compare",
    "block-allocation",
    "timing",
)

DEFAULT_EPS_GRID = (0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 75.0, 100.0)


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_rows_csv(path: Path, rows: list[dict]) -> None:
    """Tidy CSV with a stable field order and round-trippable floats."""
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt_cell(row.get(f)) for f in fields])


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _resolve(args: argparse.Namespace, config: dict, defaults: dict) -> dict:
    """Merge CLI > config file > defaults for the given keys."""
    merged = {}
    for key, default in defaults.items():
        cli_val = getattr(args, key.replace("-", "_"), None)
        if cli_val is not None:
            merged[key] = cli_val
        elif key in config:
            merged[key] = config[key]
        else:
            merged[key] = default
    return merged


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out

def _echo_config(out: Path, command: str, cfg: dict) -> None:
    _write_json(out / "resolved-config.json", {"command": command, **cfg})


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in str(text).split(",") if tok != "")


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in str(text).split(",") if tok != "")


def _cost_rates(name: str) -> tuple[float, float]:
    return {"cost1": benchmark.COST1, "cost2": benchmark.COST2}[name]


def _load_instance(cfg: dict) -> core.Instance:
    if cfg.get("instance"):
        return core.instance_from_json(Path(cfg["instance"]).read_text())
    raise SystemExit("an --instance file is required")


def _load_dataset(cfg: dict) -> ingest.DurationDataset | None:
    if cfg.get("data"):
        return ingest.load_duration_records(cfg["data"])
    return None


def _sampler_kinds(cfg: dict, dataset) -> tuple[str, str]:
    kind = cfg.get("sampler") or ("empirical-resample" if dataset else "lognormal")
    return kind, cfg.get("emergency_sampler") or "truncated-exponential"


def _solve_params(cfg: dict) -> SolveParams:
    return SolveParams(
        time_limit=float(cfg.get("time_limit") or 600.0),
        rel_gap=float(cfg.get("rel_gap") or 1e-6),
        threads=int(cfg.get("threads") or 1),
    )


def cmd_gen(args: argparse.Namespace) -> int:
    defaults = {
        "preset": "paper", "I": 60, "types": None, "blocks": None,
        "cost": "cost1", "seed": 20240, "out": "out-gen",
        "emergency_rate_mult": 1.0, "N": None, "Nprime": None,
    }
    cfg = _resolve(args, _load_config(args.config), defaults)
    if getattr(args, "paper_default", False):
        cfg["preset"] = "paper"
    out = _out_dir(cfg)
    rates = _cost_rates(cfg["cost"])
    dataset = benchmark.synthetic_duration_dataset(seed=int(cfg["seed"]))
    if cfg["types"] is not None or cfg["blocks"] is not None:
        n_types = int(cfg["types"] or 1)
        n_blocks = int(cfg["blocks"] or n_types)
        stats = benchmark.paper_types(dataset)
        names = [s[0] for s in benchmark.SPECIALTY_STATS[:n_types]]
        chosen = {}
        for name in names:
            t = stats[name]
            chosen[name] = core.SurgeryType(
                name=t.name, mean_duration=t.mean_duration,
                sd_duration=t.sd_duration, d_lo=t.d_lo, d_hi=t.d_hi,
                mix_fraction=1.0 / len(names),
            )
        plan = [
            (f"OR{k + 1}", "Mon", names[k % len(names)]) for k in range(n_blocks)
        ]
        inst = benchmark.build_instance(
            chosen, int(cfg["I"]), plan, cost_rates=rates,
            emergency_rate_mult=float(cfg["emergency_rate_mult"]),
        )
    elif cfg["preset"] == "desk":
        inst = benchmark.desk_instance(
            int(cfg["I"]), rates, dataset,
            emergency_rate_mult=float(cfg["emergency_rate_mult"]),
        )
    elif cfg["preset"] == "block-allocation":
        inst = benchmark.single_specialty_instance(dataset=dataset)
    else:
        inst = benchmark.benchmark_instance(
            int(cfg["I"]), rates, dataset,
            emergency_rate_mult=float(cfg["emergency_rate_mult"]),
        )
    (out / "instance.json").write_text(core.instance_to_json(inst) + "\n")
    ingest.write_duration_records(out / "duration_data.csv", dataset)
    if cfg["N"]:
        spec = ingest.SamplerSpec(
            kind="empirical-resample", seed=int(cfg["seed"]),
            N=int(cfg["N"]), dataset=dataset,
        )
        ingest.write_scenario_csv(
            out / "scenarios.csv", ingest.sample_scenarios(inst, spec)
        )
    bad = core.validate_instance(inst)
    forced = inst.forced_rejections()
    if forced:
        print(f"note: surgeries {forced} have no compatible block (forced rejection)")
    _echo_config(out, "gen", cfg)
    if bad:
        for msg in bad:
            print(f"invalid: {msg}", file=sys.stderr)
        return 1
    print(f"wrote {out}/instance.json ({inst.n_surgeries} surgeries, "
          f"{inst.n_blocks} blocks)")
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    defaults = {
        "instance": None, "scenarios": None, "data": None, "model": "wdro",
        "epsilon": 10.0, "N": 10, "seed": 0, "out": "out-solve",
        "time_limit": 600.0, "rel_gap": 1e-6, "threads": 1,
        "sampler": None, "emergency_sampler": None, "write_lp": False,
    }
    cfg = _resolve(args, _load_config(args.config), defaults)
    out = _out_dir(cfg)
    inst = _load_instance(cfg)
    dataset = _load_dataset(cfg)
    kind = cfg["model"]
    scen = None
    if kind != "mdro":
        if cfg["scenarios"]:
            scen = ingest.read_scenario_csv(cfg["scenarios"])
        else:
            d_kind, e_kind = _sampler_kinds(cfg, dataset)
            spec = ingest.SamplerSpec(
                kind=d_kind, emergency_kind=e_kind, seed=int(cfg["seed"]),
                N=int(cfg["N"]), dataset=dataset,
            )
            scen = ingest.sample_scenarios(inst, spec)
    sched, sol, model = evaluate.solve_model_kind(
        inst, kind, scen=scen, epsilon=float(cfg["epsilon"]),
        params=_solve_params(cfg),
    )
    if cfg["write_lp"]:
        (out / "model.lp").write_text(write_lp(model))
    report = {
        "model": kind,
        "status": sol.status,
        "gap": sol.gap,
        "runtime_seconds": sol.runtime,
        "size": models.model_size(model),
    }
    _echo_config(out, "solve", cfg)
    if sol.status != "optimal":
        _write_json(out / "report.json", report)
        print(f"solve failed: status {sol.status}", file=sys.stderr)
        return 1
    report.update(evaluate.objective_breakdown(model, sol))
    if kind == "mdro":
        active = models.mdro_active_rho_bounds(model, sol)
        report["active_rho_bounds"] = active
        if active:
            print(f"warning: price bounds active for surgeries {active}",
                  file=sys.stderr)
    (out / "schedule.json").write_text(core.schedule_to_json(sched) + "\n")
    _write_json(out / "report.json", report)
    print(f"objective {sol.objective!r} ({sched.scheduled_count()} scheduled, "
          f"{sched.rejected_count()} rejected)")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    defaults = {
        "instance": None, "schedule": None, "scenarios": None, "data": None,
        "Nprime": 10_000, "seed": 0, "out": "out-simulate",
        "sampler": None, "emergency_sampler": None,
    }
    cfg = _resolve(args, _load_config(args.config), defaults)
    out = _out_dir(cfg)
    inst = _load_instance(cfg)
    sched = core.schedule_from_json(Path(cfg["schedule"]).read_text())
    dataset = _load_dataset(cfg)
    if cfg["scenarios"]:
        eval_set = ingest.read_scenario_csv(cfg["scenarios"])
    else:
        d_kind, e_kind = _sampler_kinds(cfg, dataset)
        eval_set = evaluate.make_eval_set(
            inst, dataset, int(cfg["Nprime"]), int(cfg["seed"]), d_kind, e_kind
        )
    metrics = evaluate.simulate_out_of_sample(inst, sched, eval_set)
    row = evaluate._metrics_row(metrics)
    _write_json(out / "metrics.json", row)
    write_rows_csv(out / "metrics.csv", [row])
    _echo_config(out, "simulate", cfg)
    print(f"mean out-of-sample cost {metrics.mean_cost!r}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    defaults = {
        "instance": None, "data": None, "epsilon": None, "N": 5, "reps": 20,
        "Nprime": 10_000, "seed": 0, "out": "out-sweep", "time_limit": 600.0,
        "rel_gap": 1e-6, "threads": 1, "sampler": None,
        "emergency_sampler": None,
    }
    cfg = _resolve(args, _load_config(args.config), defaults)
    out = _out_dir(cfg)
    inst = _load_instance(cfg)
    dataset = _load_dataset(cfg)
    eps_list = (
        _parse_float_list(cfg["epsilon"]) if cfg["epsilon"] else DEFAULT_EPS_GRID
    )
    d_kind, _ = _sampler_kinds(cfg, dataset)
    rows = evaluate.radius_sweep(
        inst, dataset, eps_list, int(cfg["N"]), int(cfg["reps"]),
        int(cfg["Nprime"]), int(cfg["seed"]), _solve_params(cfg),
        in_kind=d_kind, eval_kind=d_kind, workers=int(cfg["threads"]),
    )
    write_rows_csv(out / "sweep.csv", rows)
    write_rows_csv(out / "sweep_summary.csv", evaluate.sweep_summary(rows))
    _echo_config(out, "sweep", cfg)
    print(f"wrote {out}/sweep.csv ({len(rows)} cells)")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    defaults = {
        "I": None, "N": None, "Nprime": 10_000, "reps": None, "epsilon": None,
        "seed": 0, "cost": "cost1", "out": None, "time_limit": 600.0,
        "rel_gap": 1e-6, "threads": 1, "policy": None,
        "emergency_rate_mult": None, "data_seed": 20240,
    }
    cfg = _resolve(args, _load_config(args.config), defaults)
    name = args.experiment
    cfg["out"] = cfg["out"] or f"out-{name}"
    cfg["reps"] = cfg["reps"] if cfg["reps"] is not None else (
        3 if name == "timing" else 20
    )
    out = _out_dir(cfg)
    params = _solve_params(cfg)
    workers = int(cfg["threads"])
    dataset = benchmark.synthetic_duration_dataset(seed=int(cfg["data_seed"]))
    rates = _cost_rates(cfg["cost"])
    seed = int(cfg["seed"])
    n_prime = int(cfg["Nprime"])
    reps = int(cfg["reps"])
    eps_list = (
        _parse_float_list(cfg["epsilon"]) if cfg["epsilon"] else None
    )

    t0 = time.perf_counter()
    if name == "radius-sweep":
        inst = benchmark.desk_instance(int(cfg["I"] or 10), rates, dataset)
        n_list = _parse_int_list(cfg["N"]) if cfg["N"] else (5,)
        rows = []
        for n in n_list:
            for row in evaluate.radius_sweep(
                inst, dataset, eps_list or DEFAULT_EPS_GRID, n, reps,
                n_prime, seed, params, workers=workers,
            ):
                rows.append(row)
        write_rows_csv(out / "radius-sweep.csv", rows)
        write_rows_csv(
            out / "radius-sweep-summary.csv", evaluate.sweep_summary(rows)
        )
    elif name in ("perfect-info", "misspecified-logn"):
        inst = benchmark.desk_instance(int(cfg["I"] or 10), rates, dataset)
        study = evaluate.ReplicationStudy(
            models=("saa", "wdro", "mdro"),
            reps=reps,
            n_list=_parse_int_list(cfg["N"]) if cfg["N"] else (5, 10, 50, 100),
            n_prime=n_prime,
            eps_list=eps_list or (0.1, 10.0, 100.0),
            seed=seed,
            eval_kind=(
                "lognormal" if name == "misspecified-logn" else "empirical-resample"
            ),
        )
        rows = evaluate.run_replication_study(inst, dataset, study, params, workers)
        write_rows_csv(out / f"{name}.csv", rows)
    elif name == "policy-compare":
        inst = benchmark.benchmark_instance(int(cfg["I"] or 80), rates, dataset)
        rows = evaluate.compare_policies(
            inst, dataset,
            epsilon=(eps_list or (10.0,))[0],
            n=_parse_int_list(cfg["N"])[0] if cfg["N"] else 10,
            reps=reps, n_prime=n_prime, seed=seed,
            rate_mults=(
                (float(cfg["emergency_rate_mult"]),)
                if cfg["emergency_rate_mult"] else (1.0, 2.0)
            ),
            params=params, workers=workers,
        )
        write_rows_csv(out / "policy-compare.csv", rows)
    elif name == "block-allocation":
        inst = benchmark.single_specialty_instance(dataset=dataset)
        study = evaluate.ReplicationStudy(
            models=("wdsba",), reps=reps,
            n_list=_parse_int_list(cfg["N"]) if cfg["N"] else (5, 10, 50),
            n_prime=n_prime, eps_list=eps_list or (10.0,), seed=seed,
        )
        rows = evaluate.run_replication_study(inst, dataset, study, params, workers)
        write_rows_csv(out / "block-allocation.csv", rows)
    elif name == "timing":
        rows = evaluate.timing_harness(
            sizes=_parse_int_list(cfg["I"]) if cfg["I"] else (60,),
            n_list=_parse_int_list(cfg["N"]) if cfg["N"] else (5, 10, 50, 100),
            reps=reps, seed=seed, dataset=dataset, params=params,
            epsilon=(eps_list or (10.0,))[0],
        )
        write_rows_csv(out / "timing.csv", rows)
    else:
        raise SystemExit(f"unknown experiment {name!r}")
    _echo_config(out, f"experiment {name}", cfg)
    print(f"experiment {name} finished in {time.perf_counter() - t0:.1f}s -> {out}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    defaults = {
        "instance": None, "scenarios": None, "seed": 0, "count": 10,
        "check": "all", "out": None,
    }
    cfg = _resolve(args, _load_config(args.config), defaults)
    checks = (
        ("cuts", "dual", "exhaustive", "eps0")
        if cfg["check"] == "all" else (cfg["check"],)
    )
    inst = scen = None
    if cfg["instance"]:
        inst = core.instance_from_json(Path(cfg["instance"]).read_text())
        scen = ingest.read_scenario_csv(cfg["scenarios"])
    results = verify.run_verification(
        seed=int(cfg["seed"]), count=int(cfg["count"]), checks=checks,
        instance=inst, scenarios=scen,
    )
    failures = 0
    for res in results:
        mark = "PASS" if res.passed else "FAIL"
        detail = f" ({res.detail})" if res.detail else ""
        print(f"[{mark}] {res.name}{detail}")
        failures += 0 if res.passed else 1
    if cfg["out"]:
        out = _out_dir(cfg)
        _write_json(out / "verify.json", [res.__dict__ for res in results])
        _echo_config(out, "verify", cfg)
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 1 if failures else 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orplan",
        description="Elective surgery planning models over scenario data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance and duration data")
    _add_common(p)
    p.add_argument("--paper-default", action="store_true",
                   help="full 10-room, 32-block weekly instance")
    p.add_argument("--preset", choices=("paper", "desk", "block-allocation"))
    p.add_argument("--I", type=int, help="number of surgeries")
    p.add_argument("--types", type=int, help="number of specialties (custom)")
    p.add_argument("--blocks", type=int, help="number of blocks (custom)")
    p.add_argument("--cost", choices=("cost1", "cost2"))
    p.add_argument("--emergency-rate-mult", type=float)
    p.add_argument("--N", type=int, help="also write N sampled scenarios")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="build and solve one model")
    _add_common(p)
    p.add_argument("--instance")
    p.add_argument("--scenarios", help="scenario CSV (sampled if omitted)")
    p.add_argument("--data", help="duration records CSV")
    p.add_argument("--model", choices=evaluate.MODEL_KINDS)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--rel-gap", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--sampler", choices=ingest.DURATION_KINDS)
    p.add_argument("--emergency-sampler", choices=ingest.EMERGENCY_KINDS)
    p.add_argument("--write-lp", action="store_true",
                   help="also dump the model in LP format")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="out-of-sample evaluation of a schedule")
    _add_common(p)
    p.add_argument("--instance")
    p.add_argument("--schedule")
    p.add_argument("--scenarios")
    p.add_argument("--data")
    p.add_argument("--Nprime", type=int)
    p.add_argument("--sampler", choices=ingest.DURATION_KINDS)
    p.add_argument("--emergency-sampler", choices=ingest.EMERGENCY_KINDS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="radius sweep on a given instance")
    _add_common(p)
    p.add_argument("--instance")
    p.add_argument("--data")
    p.add_argument("--epsilon", help="comma-separated radius grid")
    p.add_argument("--N", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--Nprime", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--rel-gap", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--sampler", choices=ingest.DURATION_KINDS)
    p.add_argument("--emergency-sampler", choices=ingest.EMERGENCY_KINDS)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("experiment", help="run a named study end to end")
    _add_common(p)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--I", help="surgeries (comma list for timing)")
    p.add_argument("--N", help="comma-separated in-sample sizes")
    p.add_argument("--Nprime", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--epsilon", help="comma-separated radius grid")
    p.add_argument("--cost", choices=("cost1", "cost2"))
    p.add_argument("--policy", choices=("flexible", "dedicated"))
    p.add_argument("--emergency-rate-mult", type=float)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--rel-gap", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--data-seed", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="run the oracle verification suite")
    _add_common(p)
    p.add_argument("--instance")
    p.add_argument("--scenarios")
    p.add_argument("--count", type=int)
    p.add_argument("--check", choices=("all", "cuts", "dual", "exhaustive", "eps0"))
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
