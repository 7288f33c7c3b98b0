"""Command-line entry point.

Every command writes CSV files plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 invalid input, 3 infeasible configuration,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

from dynpipe import __version__
from dynpipe.bench import (
    DEFAULT_TARGETS,
    PAIR_ORDERINGS,
    AppRequirements,
    app_costs,
    bench_threshold,
    bench_two_level,
    summarize,
)
from dynpipe.composer import (
    DEFAULT_GRID,
    best_volume,
    budget_grid,
    buffer_range,
    compose_pareto,
    evaluate,
    single_level_front,
)
from dynpipe.core import MAJORANA, PRESET_NAMES, PRESETS, PhysicalParams, build_levels, stab_round_time
from dynpipe.errors import IneffectiveLevelWarning, InfeasibleConfig, PipelineError, ProtocolError
from dynpipe.failure import monte_carlo_delay, recovery_time, schedule_from_trace
from dynpipe.simulator import TwoLevelConfig, forced_sequential_config, simulate_two_level, write_trace_csv

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4
PROTOCOLS = ("15to1",)
PARAM_KEYS = ("t_2q_ns", "t_meas_ns", "p_phys", "eps_raw")


class InputError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "inf" if math.isinf(x) else f"{x:.6g}"
    if isinstance(x, tuple):
        return "-".join(str(v) for v in x)
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


# --- input handling ------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineSpec:
    params: PhysicalParams
    distances: tuple[int, ...]
    protocol: str
    budget: int | None
    buffer_size: int | None


def _load_json(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"{path}: cannot read ({e.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}:{e.lineno}: invalid JSON ({e.msg})") from None


def _params(raw, preset: str | None, where: str) -> PhysicalParams:
    if raw is None:
        if preset is None or preset == MAJORANA:
            raise InputError(f"{where}: field 'physical_params' is required without a built-in preset")
        return PRESETS[preset]
    if not isinstance(raw, dict):
        raise InputError(f"{where}: field 'physical_params' must be an object")
    missing = [k for k in PARAM_KEYS if k not in raw]
    if missing:
        raise InputError(f"{where}: field 'physical_params.{missing[0]}' is missing")
    try:
        return PhysicalParams(float(raw["t_2q_ns"]), float(raw["t_meas_ns"]), float(raw["p_phys"]), float(raw["eps_raw"]))
    except (TypeError, ValueError) as e:
        raise InputError(f"{where}: field 'physical_params': {e}") from None


def _distances(raw, preset: str | None, where: str) -> tuple[int, ...]:
    if not isinstance(raw, list) or not raw or not all(isinstance(d, int) and not isinstance(d, bool) for d in raw):
        raise InputError(f"{where}: field 'code_distances' must be a non-empty list of integers")
    lowest = 1 if preset == MAJORANA else 3
    for d in raw:
        if d < lowest or d % 2 == 0:
            raise InputError(f"{where}: field 'code_distances' needs odd values >= {lowest}, got {d}")
    return tuple(raw)


def _opt_int(data, key, where):
    v = data.get(key)
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
        raise InputError(f"{where}: field '{key}' must be a positive integer")
    return v


def parse_spec(path: Path, preset: str | None) -> PipelineSpec:
    data = _load_json(path)
    where = str(path)
    if not isinstance(data, dict):
        raise InputError(f"{where}: top level must be an object")
    if "code_distances" not in data:
        raise InputError(f"{where}: field 'code_distances' is missing")
    protocol = data.get("protocol", "15to1")
    if protocol not in PROTOCOLS:
        raise InputError(f"{where}: field 'protocol' must be one of {PROTOCOLS}, got {protocol!r}")
    return PipelineSpec(
        _params(data.get("physical_params"), preset, where),
        _distances(data["code_distances"], preset, where),
        protocol,
        _opt_int(data, "budget", where),
        _opt_int(data, "buffer_size", where),
    )


def parse_requirements(path: Path, preset: str | None) -> tuple[PhysicalParams, list[AppRequirements]]:
    data = _load_json(path)
    where = str(path)
    if not isinstance(data, dict):
        raise InputError(f"{where}: top level must be an object")
    preset = data.get("preset", preset)
    if preset is not None and preset not in PRESET_NAMES:
        raise InputError(f"{where}: field 'preset' must be one of {PRESET_NAMES}")
    params = _params(data.get("physical_params"), preset, where)
    entries = data.get("applications", [data])
    if not isinstance(entries, list) or not entries:
        raise InputError(f"{where}: field 'applications' must be a non-empty list")
    apps = []
    for i, e in enumerate(entries):
        loc = f"{where}: applications[{i}]" if "applications" in data else where
        for key in ("required_fidelity", "magic_count", "runtime_s", "code_distances"):
            if key not in e:
                raise InputError(f"{loc}: field '{key}' is missing")
        try:
            fid, count, runtime = float(e["required_fidelity"]), int(e["magic_count"]), float(e["runtime_s"])
        except (TypeError, ValueError):
            raise InputError(f"{loc}: numeric fields must be numbers") from None
        if not (0 < fid < 1 and count > 0 and runtime > 0):
            raise InputError(f"{loc}: need 0 < required_fidelity < 1, magic_count > 0, runtime_s > 0")
        apps.append(AppRequirements(str(e.get("name", f"app{i}")), fid, count, runtime,
                                    _distances(e["code_distances"], preset, loc)))
    return params, apps


# --- commands ----------------------------------------------------------------------------


def _top_config(spec: PipelineSpec, grid_points: int):
    """Configs to simulate for the top two levels of ``spec``."""
    levels = build_levels(spec.distances, spec.params)
    high = levels[-1]
    lower = single_level_front(levels[0]) if len(levels) == 2 else compose_pareto(spec.distances[:-1], spec.params, grid_points)
    options = tuple(p.factory for p in lower)
    if spec.budget is None and spec.buffer_size is None:
        return [forced_sequential_config(options, high, spec.params)]
    buffers = [spec.buffer_size] if spec.buffer_size is not None else list(buffer_range(high))
    out = []
    for n_buf in buffers:
        budgets = [spec.budget] if spec.budget is not None else budget_grid(options, high, n_buf, grid_points)
        out += [TwoLevelConfig.build(options, high, b, n_buf, spec.params) for b in budgets]
    return out


def cmd_simulate(args) -> dict:
    spec = parse_spec(Path(args.spec), args.preset)
    if len(spec.distances) < 2:
        raise InputError(f"{args.spec}: field 'code_distances' needs at least two levels to simulate")
    best = None
    for cfg in _top_config(spec, args.budget_grid):
        try:
            point = evaluate(cfg, spec.distances)
        except InfeasibleConfig as e:
            err = e
            continue
        if best is None or (point.volume, point.q) < (best[1].volume, best[1].q):
            best = (cfg, point)
    if best is None:
        raise err
    cfg, point = best
    trace = simulate_two_level(cfg)
    out = Path(args.out)
    write_trace_csv(trace, out / "trace.csv")
    header = ["q_physical", "t_rounds", "t_seconds", "volume", "stall_count", "expected_delay_rounds",
              "buffer_size", "budget", "launch_round", "launch_threshold"]
    row = [point.q, point.t, point.t * stab_round_time(spec.params) * 1e-9, point.volume, trace.stall_count,
           point.delay, cfg.n_buf, cfg.q_budget, trace.launch_round, trace.launch_threshold]
    if args.mc_samples:
        dt = recovery_time(trace, cfg)
        mc = monte_carlo_delay(schedule_from_trace(trace, cfg), cfg.n_buf, lambda _t: dt, args.mc_samples, args.seed)
        header.append("mc_delay_rounds")
        row.append(mc)
    write_csv(out / "summary.csv", header, [row])
    return {"outputs": ["summary.csv", "trace.csv"]}


def cmd_pareto(args) -> dict:
    spec = parse_spec(Path(args.spec), args.preset)
    buffers = [spec.buffer_size] if spec.buffer_size is not None else None
    front = compose_pareto(spec.distances, spec.params, args.budget_grid, buffers, spec.protocol)
    star = best_volume(front)
    to_s = stab_round_time(spec.params) * 1e-9
    rows = [
        (p.q, p.t, p.t * to_s, p.n_buf if p.n_buf is not None else "", p.budget, p.volume, p is star)
        for p in front
    ]
    write_csv(Path(args.out) / "front.csv",
              ["q_physical", "t_rounds", "t_seconds", "buffer_size", "budget", "volume", "best"], rows)
    return {"outputs": ["front.csv"]}


def _preset_params(args) -> PhysicalParams:
    if args.preset == MAJORANA:
        raise InputError("the majorana preset needs physical_params from an input file")
    return PRESETS[args.preset or "supercond"]


def cmd_bench_two_level(args) -> dict:
    if not 3 <= args.d_min <= args.d_max:
        raise InputError(f"need 3 <= --d-min <= --d-max, got {args.d_min}, {args.d_max}")
    rows = bench_two_level(args.d_min, args.d_max, _preset_params(args), args.budget_grid, args.ordering, args.jobs)
    write_csv(Path(args.out) / "two_level.csv",
              ["d1", "d2", "dyn_q", "dyn_t_rounds", "dyn_volume", "buffer_size", "seq_volume", "par_volume",
               "red_seq_pct", "red_par_pct"],
              [(r.d1, r.d2, r.dyn_q, r.dyn_t, r.dyn_volume, r.buffer_size, r.seq_volume, r.par_volume,
                100 * r.red_seq, 100 * r.red_par) for r in rows])
    s = summarize(rows)
    write_csv(Path(args.out) / "two_level_summary.csv",
              ["pairs", "mean_red_seq_pct", "mean_red_par_pct", "negative_pairs", "worst_red_pct"],
              [(s.pairs, 100 * s.mean_red_seq, 100 * s.mean_red_par, s.negative_pairs, 100 * s.worst)])
    return {"outputs": ["two_level.csv", "two_level_summary.csv"]}


def cmd_bench_threshold(args) -> dict:
    for t in args.targets:
        if not 0 < t < 1:
            raise InputError(f"--targets values must lie in (0, 1), got {t}")
    rows = bench_threshold(args.targets, _preset_params(args), grid_points=args.budget_grid, jobs=args.jobs)
    write_csv(Path(args.out) / "threshold.csv",
              ["target", "status", "dyn_volume", "dyn_distances", "seq_volume", "seq_distances",
               "par_volume", "par_distances", "candidates"],
              [(r.target, "ok" if r.feasible else "no feasible sequence", r.dyn_volume, r.dyn_distances,
                r.seq_volume, r.seq_distances, r.par_volume, r.par_distances, r.candidates) for r in rows])
    return {"outputs": ["threshold.csv"]}


def cmd_app(args) -> dict:
    params, apps = parse_requirements(Path(args.requirements), args.preset)
    rows = [app_costs(a, params, args.budget_grid) for a in apps]
    write_csv(Path(args.out) / "app.csv",
              ["name", "seq_qubits", "par_qubits", "dyn_qubits", "red_seq_pct", "red_par_pct"],
              [(r.name, r.seq_qubits, r.par_qubits, r.dyn_qubits, 100 * r.red_seq, 100 * r.red_par) for r in rows])
    return {"outputs": ["app.csv"]}


COMMANDS = {
    "simulate": cmd_simulate,
    "pareto": cmd_pareto,
    "bench-two-level": cmd_bench_two_level,
    "bench-threshold": cmd_bench_threshold,
    "app": cmd_app,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=PRESET_NAMES, default=None)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--budget-grid", type=int, default=DEFAULT_GRID, help="budget points per buffer size")
    common.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")

    ap = argparse.ArgumentParser(prog="dynpipe", description="Dynamic magic-state distillation pipelines.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate one pipeline and write its trace")
    p.add_argument("spec")
    p.add_argument("--mc-samples", type=int, default=0, help="also run the Monte Carlo delay oracle")
    p = sub.add_parser("pareto", parents=[common], help="Pareto front of a pipeline spec")
    p.add_argument("spec")
    p = sub.add_parser("bench-two-level", parents=[common], help="two-level distance-pair sweep")
    p.add_argument("--d-min", type=int, default=3)
    p.add_argument("--d-max", type=int, default=21)
    p.add_argument("--ordering", choices=PAIR_ORDERINGS, default="upper")
    p = sub.add_parser("bench-threshold", parents=[common], help="minimum volume per fidelity target")
    p.add_argument("--targets", type=float, nargs="+", default=list(DEFAULT_TARGETS))
    p = sub.add_parser("app", parents=[common], help="distillation cost for applications")
    p.add_argument("requirements")
    return ap


def _manifest(args, argv, extra) -> dict:
    inputs = []
    digest = hashlib.sha256()
    for key in ("spec", "requirements"):
        path = getattr(args, key, None)
        if path:
            data = Path(path).read_bytes()
            inputs.append({"path": path, "sha256": hashlib.sha256(data).hexdigest()})
            digest.update(data)
    return {
        "command": args.command,
        "argv": list(argv),
        "inputs": inputs,
        "preset": args.preset,
        "out": args.out,
        "version": __version__,
        "input_digest": digest.hexdigest(),
        **extra,
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.jobs < 1 or args.budget_grid < 1:
        print("dynpipe: error: --jobs and --budget-grid must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IneffectiveLevelWarning)
            extra = COMMANDS[args.command](args)
    except InputError as e:
        print(f"dynpipe: invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ProtocolError as e:
        print(f"dynpipe: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (PipelineError, ValueError) as e:
        print(f"dynpipe: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AssertionError as e:
        print(f"dynpipe: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_manifest(args, argv, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
