"""Command-line interface: generate / run / sweep / tune / rank / report.

Exit codes: 0 success, 1 usage error, 2 data error (missing files, malformed
records, impossible requests).  All stochastic components honor ``--seed``;
the MPSBENCH_SEED environment variable is the fallback.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, elo, harness, tuner
from .circuits import CLASSES, generate, qubit_grid
from .harness import BenchmarkRecord, HarnessError, Protocol, load, persist, run_benchmark, run_suite
from .mps import MpsConfig
from .qasm import QasmError, parse_qasm, serialize_qasm

__all__ = ["main", "report_tables"]

SLOPE_MIN_POINTS = 3
SLOPE_MIN_QUBITS = 30  # asymptotic fits only use sizes beyond the crossover region


class DataError(Exception):
    """Input data problem; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_jobs() -> int:
    try:
        import psutil

        physical = psutil.cpu_count(logical=False)
        if physical:
            return physical
    except ImportError:
        pass
    return os.cpu_count() or 1


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("MPSBENCH_SEED")
    return int(env) if env else 0


def _config_from_args(args: argparse.Namespace) -> MpsConfig:
    return MpsConfig(
        bond_dimension=args.chi,
        cutoff=args.cutoff,
        fuse=args.fuse,
        permute=args.permute,
        swap_split=args.swap_split,
        rng_seed=_resolve_seed(args.seed),
    )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--chi", type=int, default=64, help="maximum bond dimension")
    p.add_argument("--cutoff", type=float, default=1e-10, help="relative singular-value cutoff")
    p.add_argument("--fuse", action="store_true", help="fuse gate runs into two-qubit blocks")
    p.add_argument("--permute", action="store_true", help="optimize the qubit-to-chain ordering")
    p.add_argument(
        "--swap-split",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="apply non-local gates via lazy swap networks",
    )


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--reps", type=int, default=4, help="timed repetitions (minimum is reported)")
    p.add_argument("--deadline", type=float, default=300.0, help="per-execution timeout in seconds")
    p.add_argument("--fidelity-min", type=float, default=0.99, help="mirror-fidelity acceptance gate")


def _protocol_from_args(args: argparse.Namespace) -> Protocol:
    return Protocol(shots=args.shots, reps=args.reps, deadline=args.deadline, fidelity_min=args.fidelity_min)


def build_parser() -> _Parser:
    parser = _Parser(prog="mpsbench", description="MPS emulator benchmarking toolkit")
    parser.add_argument("--version", action="version", version=f"mpsbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a benchmark circuit as OpenQASM 2.0")
    g.add_argument("--class", dest="class_name", required=True, choices=CLASSES)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--reps", type=int, default=3, help="ansatz layers for realamp/su2rand")
    g.add_argument("--graph-degree", type=int, default=3, help="regular-graph degree for graphstate")
    g.add_argument("-o", "--out", type=Path, default=None, help="output file (stdout when omitted)")

    r = sub.add_parser("run", help="benchmark one circuit instance")
    r.add_argument("qasm", nargs="?", type=Path, help="QASM file (alternative to --class/--n)")
    r.add_argument("--class", dest="class_name", default=None)
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--engine", choices=("mps", "statevector"), default="mps")
    _add_config_flags(r)
    _add_protocol_flags(r)
    r.add_argument("--out", type=Path, default=Path("bench.jsonl"), help="record store to append to")

    s = sub.add_parser("sweep", help="sweep classes over a qubit grid")
    s.add_argument("--classes", required=True, help="comma-separated class names")
    s.add_argument("--n-min", type=int, default=4)
    s.add_argument("--n-max", type=int, default=1024)
    s.add_argument("--sizes", default=None, help="explicit comma-separated sizes (overrides the grid)")
    s.add_argument("--config-table", type=Path, default=None, help="JSON {engine: {class: config}} or {class: config}")
    s.add_argument("--qasm-dir", type=Path, default=None, help="directory with <class>_<n>.qasm files")
    s.add_argument("--continue-past-failure", action="store_true")
    s.add_argument("--jobs", type=int, default=None, help="parallel class sweeps (default: physical cores)")
    s.add_argument("--seed", type=int, default=None)
    _add_config_flags(s)
    _add_protocol_flags(s)
    s.add_argument("--out", type=Path, default=Path("bench.jsonl"))

    t = sub.add_parser("tune", help="CMA-ES hyperparameter search for one class")
    t.add_argument("--class", dest="class_name", required=True)
    t.add_argument("--n", type=int, default=100, help="tuning problem size")
    t.add_argument("--qasm", type=Path, default=None, help="QASM file for external classes")
    t.add_argument("--budget", type=int, default=100, help="objective evaluation budget")
    t.add_argument("--population", type=int, default=10)
    t.add_argument("--seed", type=int, default=None)
    _add_protocol_flags(t)
    t.add_argument("-o", "--out", type=Path, default=None, help="write the best config as JSON")

    k = sub.add_parser("rank", help="Elo tournament over a record store")
    k.add_argument("--records", type=Path, required=True)
    k.add_argument("--trials", type=int, default=200_000)
    k.add_argument("--seed", type=int, default=None)
    k.add_argument("--k-factor", type=float, default=32.0)
    k.add_argument("--out-table", type=Path, default=None, help="write the Elo table as JSON")
    k.add_argument("--out-matrix", type=Path, default=None, help="write the win-rate matrix as CSV")

    p = sub.add_parser("report", help="CSV tables and difficulty matrix from records")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--outdir", type=Path, default=Path("report"))
    return parser


# --- report ------------------------------------------------------------------


def _difficulty_band(rate: float) -> str:
    if rate >= 0.6:
        return "Easy"
    if rate >= 0.3:
        return "Medium"
    if rate >= 0.1:
        return "Hard"
    return "Very Hard"


def report_tables(records: list[BenchmarkRecord]) -> dict[str, str]:
    """Build the four report CSVs: runtimes, max-qubit table, difficulty, slopes."""
    if not records:
        raise DataError("empty record set")
    engines = sorted({r.engine for r in records})
    classes = sorted({r.class_name for r in records})

    lines = ["class,engine,n,run_time_seconds,mirror_fidelity,status"]
    for r in sorted(records, key=lambda x: (x.class_name, x.engine, x.n_qubits)):
        rt = "" if r.run_time_seconds is None else f"{r.run_time_seconds:.6f}"
        mf = "" if r.mirror_fidelity is None else f"{r.mirror_fidelity:.4f}"
        lines.append(f"{r.class_name},{r.engine},{r.n_qubits},{rt},{mf},{r.status}")
    runtimes = "\n".join(lines) + "\n"

    max_lines = ["class," + ",".join(engines)]
    for cls in classes:
        cells = []
        for eng in engines:
            ok_n = [r.n_qubits for r in records if r.class_name == cls and r.engine == eng and r.status == "ok"]
            cells.append(str(max(ok_n)) if ok_n else "-")
        max_lines.append(cls + "," + ",".join(cells))
    max_table = "\n".join(max_lines) + "\n"

    diff_lines = ["class,n,solved,engines,solved_rate,band"]
    sizes = sorted({r.n_qubits for r in records})
    for cls in classes:
        for n in sizes:
            attempted = {r.engine for r in records if r.class_name == cls and r.n_qubits == n}
            if not attempted:
                continue
            solved = {
                r.engine
                for r in records
                if r.class_name == cls and r.n_qubits == n and r.status == "ok"
            }
            rate = len(solved) / len(engines)
            diff_lines.append(f"{cls},{n},{len(solved)},{len(engines)},{rate:.3f},{_difficulty_band(rate)}")
    difficulty = "\n".join(diff_lines) + "\n"

    slope_lines = ["class,engine,points,slope"]
    for cls in classes:
        for eng in engines:
            pts = [
                (r.n_qubits, r.run_time_seconds)
                for r in records
                if r.class_name == cls
                and r.engine == eng
                and r.status == "ok"
                and r.n_qubits >= SLOPE_MIN_QUBITS
                and r.run_time_seconds
            ]
            if len(pts) < SLOPE_MIN_POINTS:
                continue
            xs = np.log([p[0] for p in pts])
            ys = np.log([p[1] for p in pts])
            slope = float(np.polyfit(xs, ys, 1)[0])
            slope_lines.append(f"{cls},{eng},{len(pts)},{slope:.4f}")
    slopes = "\n".join(slope_lines) + "\n"

    return {
        "runtimes.csv": runtimes,
        "max_qubits.csv": max_table,
        "difficulty.csv": difficulty,
        "slopes.csv": slopes,
    }


# --- subcommand handlers -------------------------------------------------------


def _cmd_generate(args: argparse.Namespace) -> int:
    circuit = generate(
        args.class_name,
        args.n,
        _resolve_seed(args.seed),
        reps=args.reps,
        graph_degree=args.graph_degree,
    )
    text = serialize_qasm(circuit)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
        print(f"wrote {args.out} ({circuit.n_qubits} qubits, {len(circuit.gates)} gates)")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    protocol = _protocol_from_args(args)
    seed = _resolve_seed(args.seed)
    if args.qasm is not None:
        if not args.qasm.exists():
            raise DataError(f"no such file: {args.qasm}")
        class_name = args.class_name or args.qasm.stem
        n = args.n
        if not n:
            numbers = re.findall(r"\d+", args.qasm.stem)  # MQTBench names end in the qubit count
            n = int(numbers[-1]) if numbers else parse_qasm(args.qasm.read_text(encoding="utf-8")).n_qubits
        rec = run_benchmark(
            class_name,
            n,
            config,
            protocol,
            qasm_path=args.qasm,
            seed=seed,
            use_statevector=args.engine == "statevector",
        )
    elif args.class_name and args.n:
        rec = run_benchmark(
            args.class_name,
            args.n,
            config,
            protocol,
            seed=seed,
            use_statevector=args.engine == "statevector",
        )
    else:
        raise DataError("provide a QASM file or both --class and --n")
    persist([rec], args.out)
    rt = "-" if rec.run_time_seconds is None else f"{rec.run_time_seconds:.3f}s"
    mf = "-" if rec.mirror_fidelity is None else f"{rec.mirror_fidelity:.3f}"
    print(f"{rec.class_name} n={rec.n_qubits} engine={rec.engine}: {rec.status} time={rt} fidelity={mf}")
    print(json.dumps(rec.to_dict(), sort_keys=True))
    return 0


def _load_config_table(path: Path | None, fallback: MpsConfig) -> dict[str, dict[str, MpsConfig]]:
    if path is None:
        return {}
    if not path.exists():
        raise DataError(f"no such file: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or not raw:
        raise DataError(f"{path}: expected a non-empty JSON object")
    first = next(iter(raw.values()))
    defaults = asdict(fallback)

    def to_config(entry: dict) -> MpsConfig:
        merged = {**defaults, **entry}
        return MpsConfig(**merged)

    if isinstance(first, dict) and first and isinstance(next(iter(first.values())), dict):
        return {eng: {cls: to_config(cfg) for cls, cfg in table.items()} for eng, table in raw.items()}
    # flat {class: config} form: one engine per distinct config, hash-labelled
    table: dict[str, dict[str, MpsConfig]] = {}
    for cls, cfg in raw.items():
        config = to_config(cfg)
        table.setdefault(harness.engine_id(config), {})[cls] = config
    return table


def _sweep_one_class(payload: tuple) -> list[dict]:
    engine_label, class_name, config, grid, protocol, qasm_dir, continue_past, seed = payload
    recs = run_suite(
        [class_name],
        grid,
        {engine_label: {class_name: config}},
        protocol,
        continue_past_failure=continue_past,
        qasm_dir=qasm_dir,
        seed=seed,
    )
    return [r.to_dict() for r in recs]


def _cmd_sweep(args: argparse.Namespace) -> int:
    classes = [c.strip() for c in args.classes.split(",") if c.strip()]
    if not classes:
        raise DataError("no classes given")
    if args.sizes:
        grid = [int(s) for s in args.sizes.split(",")]
    else:
        grid = qubit_grid(args.n_min, args.n_max)
    if not grid:
        raise DataError("empty qubit grid")
    protocol = _protocol_from_args(args)
    seed = _resolve_seed(args.seed)
    fallback = _config_from_args(args)
    table = _load_config_table(args.config_table, fallback)
    if not table:
        table = {harness.engine_id(fallback): {cls: fallback for cls in classes}}

    cells = [
        (eng, cls, cfgs[cls], grid, protocol, args.qasm_dir, args.continue_past_failure, seed)
        for eng, cfgs in sorted(table.items())
        for cls in classes
        if cls in cfgs
    ]
    jobs = args.jobs if args.jobs else _default_jobs()
    records: list[BenchmarkRecord] = []
    if jobs > 1 and len(cells) > 1:
        # one class sweep per worker; repetitions inside a cell stay sequential
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for dicts in pool.map(_sweep_one_class, cells):
                records.extend(BenchmarkRecord.from_dict(d) for d in dicts)
    else:
        for cell in cells:
            records.extend(BenchmarkRecord.from_dict(d) for d in _sweep_one_class(cell))
    persist(records, args.out)
    for rec in records:
        rt = "-" if rec.run_time_seconds is None else f"{rec.run_time_seconds:.3f}s"
        print(f"{rec.class_name} n={rec.n_qubits} engine={rec.engine}: {rec.status} time={rt}")
    print(f"{len(records)} records -> {args.out}")
    return 0


def _cmd_tune(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    protocol = _protocol_from_args(args)
    generations = max(1, math.ceil(args.budget / args.population))
    cmaes = tuner.CmaesConfig(population=args.population, max_generations=generations, seed=seed)
    result = tuner.tune(
        args.class_name,
        n_tune=args.n,
        protocol=protocol,
        cmaes=cmaes,
        seed=seed,
        qasm_path=args.qasm,
    )
    fragment = {
        args.class_name: {
            k: v for k, v in asdict(result.best_config).items() if k != "rng_seed"
        }
    }
    payload = {
        "config_table": fragment,
        "n_tune": result.n_tune,
        "feasible": result.feasible,
        "status": result.record.status,
        "run_time_seconds": result.record.run_time_seconds,
        "mirror_fidelity": result.record.mirror_fidelity,
        "evaluations": result.evaluations,
        "trace": result.trace,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out is not None:
        args.out.write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    print(text)
    return 0


def _cmd_rank(args: argparse.Namespace) -> int:
    if not args.records.exists():
        raise DataError(f"no such file: {args.records}")
    records = load(args.records)
    try:
        table = elo.tournament(records, trials=args.trials, seed=_resolve_seed(args.seed), k=args.k_factor)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    ranked = sorted(zip(table.engines, table.means, table.stds), key=lambda t: -t[1])
    print(f"{'engine':<32} {'elo':>8} {'std':>7}")
    for eng, mean, std in ranked:
        print(f"{eng:<32} {mean:8.1f} {std:7.1f}")
    if args.out_table is not None:
        args.out_table.write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(f"wrote {args.out_table}")
    if args.out_matrix is not None:
        args.out_matrix.write_text(table.winrate_csv(), encoding="utf-8")
        print(f"wrote {args.out_matrix}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    if not args.records.exists():
        raise DataError(f"no such file: {args.records}")
    tables = report_tables(load(args.records))
    args.outdir.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (args.outdir / name).write_text(text, encoding="utf-8")
        print(f"wrote {args.outdir / name}")
    return 0


_HANDLERS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "tune": _cmd_tune,
    "rank": _cmd_rank,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (DataError, HarnessError, QasmError, FileNotFoundError) as exc:
        print(f"mpsbench: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"mpsbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
