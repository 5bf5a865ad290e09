"""Benchmark protocol execution: repetition timing, mirror validation, JSON storage.

One benchmark cell measures a (circuit class, qubit count, emulator config)
triple: the full workflow (circuit acquisition, pre-passes, execution,
sampling) is timed ``reps`` times and the minimum wall time kept, then the
mirror circuit is run separately (untimed) to estimate fidelity as the
probability of sampling the all-zeros state.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import time
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .circuits import CLASSES, generate, mirror
from .mps import MpsConfig, RunResult, amplitude, run
from .qasm import Circuit, parse_qasm, sanitize
from .statevector import sv_run

__all__ = [
    "SCHEMA_VERSION",
    "Protocol",
    "BenchmarkRecord",
    "HarnessError",
    "config_hash",
    "engine_id",
    "run_benchmark",
    "run_suite",
    "persist",
    "load",
]

SCHEMA_VERSION = 1

STATUS_OK = "ok"
STATUS_TIMEOUT = "timeout"
STATUS_LOW_FIDELITY = "low_fidelity"
STATUS_CRASH = "crash"


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class Protocol:
    """Measurement protocol parameters (defaults follow the benchmark recipe)."""

    shots: int = 1000
    reps: int = 4
    deadline: float = 300.0
    fidelity_min: float = 0.99
    # The mirror run is excluded from timing but still bounded; it executes
    # twice the forward gate count, hence the factor-of-two allowance.
    mirror_deadline_factor: float = 2.0


@dataclass
class BenchmarkRecord:
    class_name: str
    n_qubits: int
    engine: str
    config: dict
    status: str
    run_time_seconds: float | None
    per_repetition_times: list[float]
    mirror_fidelity: float | None
    forward_sample_digest: str | None
    shots: int
    repetitions: int
    timestamp: str
    version: str
    host: str
    seed: int = 0
    # diagnostics, never used for status
    truncation_fidelity_forward: float | None = None
    mirror_zero_probability: float | None = None
    peak_bond: int | None = None
    error: str | None = None
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkRecord":
        return cls(**data)


def config_hash(config: MpsConfig) -> str:
    blob = json.dumps(asdict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:10]


def engine_id(config: MpsConfig) -> str:
    return f"mps:{config_hash(config)}"


def _host_descriptor() -> str:
    return f"{platform.system()}-{platform.machine()}-{os.cpu_count()}cpu"


def _sample_digest(samples: list[str]) -> str:
    counts = sorted(Counter(samples).items())
    return hashlib.sha256(json.dumps(counts).encode()).hexdigest()


def _acquire(class_name: str, n: int, seed: int, qasm_path: str | Path | None) -> Circuit:
    if qasm_path is not None:
        text = Path(qasm_path).read_text(encoding="utf-8")
        circuit = sanitize(parse_qasm(text, name=class_name))
        if circuit.n_qubits != n:
            raise HarnessError(f"{qasm_path} declares {circuit.n_qubits} qubits, expected {n}")
        return circuit
    if class_name not in CLASSES:
        raise HarnessError(f"class {class_name!r} has no native generator; provide a QASM file")
    return generate(class_name, n, seed)


def _execute_sv(circuit: Circuit, shots: int, rng_seed: int, deadline: float | None) -> RunResult:
    start = time.perf_counter()
    state = sv_run(circuit)
    probs = state.probabilities()
    probs = probs / probs.sum()
    rng = np.random.default_rng(rng_seed & (2**64 - 1))
    drawn = rng.choice(probs.size, size=shots, p=probs) if shots > 0 else []
    n = circuit.n_qubits
    samples = ["".join("1" if (int(i) >> q) & 1 else "0" for q in range(n)) for i in drawn]
    wall = time.perf_counter() - start
    timed_out = deadline is not None and wall > deadline
    return RunResult(
        samples=samples if not timed_out else [],
        fidelity_estimate=1.0,
        peak_bond=0,
        wall_time=wall,
        gate_count_applied=len(circuit.gates),
        timed_out=timed_out,
    )


def run_benchmark(
    class_name: str,
    n: int,
    config: MpsConfig,
    protocol: Protocol = Protocol(),
    *,
    qasm_path: str | Path | None = None,
    engine: str | None = None,
    seed: int = 0,
    use_statevector: bool = False,
) -> BenchmarkRecord:
    """Measure one benchmark cell and classify it.

    Every failure mode is encoded in the record status with the precedence
    timeout > low_fidelity > ok; engine exceptions become status ``crash``.
    """
    if engine is None:
        engine = "sv" if use_statevector else engine_id(config)
    record = BenchmarkRecord(
        class_name=class_name,
        n_qubits=n,
        engine=engine,
        config=asdict(config),
        status=STATUS_CRASH,
        run_time_seconds=None,
        per_repetition_times=[],
        mirror_fidelity=None,
        forward_sample_digest=None,
        shots=protocol.shots,
        repetitions=protocol.reps,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        version=__version__,
        host=_host_descriptor(),
        seed=seed,
    )

    try:
        rep_times: list[float] = []
        timed_out = False
        forward: RunResult | None = None
        for _ in range(protocol.reps):
            start = time.perf_counter()
            circuit = _acquire(class_name, n, seed, qasm_path)
            remaining = protocol.deadline - (time.perf_counter() - start)
            if remaining <= 0.0:
                timed_out = True
                break
            if use_statevector:
                result = _execute_sv(circuit, protocol.shots, config.rng_seed, remaining)
            else:
                result = run(circuit, config, shots=protocol.shots, deadline=remaining)
            elapsed = time.perf_counter() - start
            if result.timed_out:
                timed_out = True
                break
            rep_times.append(elapsed)
            forward = result
        record.per_repetition_times = rep_times
        record.run_time_seconds = min(rep_times) if rep_times else None
        if timed_out:
            record.status = STATUS_TIMEOUT
            return record
        record.forward_sample_digest = _sample_digest(forward.samples)
        record.truncation_fidelity_forward = forward.fidelity_estimate
        record.peak_bond = forward.peak_bond

        # fidelity estimation via the mirror circuit, excluded from timing
        mirror_circuit = mirror(_acquire(class_name, n, seed, qasm_path))
        mirror_deadline = protocol.deadline * protocol.mirror_deadline_factor
        if use_statevector:
            mres = _execute_sv(mirror_circuit, protocol.shots, config.rng_seed, mirror_deadline)
            record.mirror_zero_probability = float(np.abs(sv_run(mirror_circuit).amplitudes[0]) ** 2)
        else:
            mres = run(mirror_circuit, config, shots=protocol.shots, deadline=mirror_deadline)
            if mres.state is not None:
                zeros = "0" * mirror_circuit.n_qubits
                record.mirror_zero_probability = float(abs(amplitude(mres.state, zeros)) ** 2)
        if mres.timed_out:
            record.mirror_fidelity = 0.0
            record.error = "mirror run exceeded its deadline"
        else:
            zeros = "0" * mirror_circuit.n_qubits
            hits = sum(1 for s in mres.samples if s == zeros)
            record.mirror_fidelity = hits / len(mres.samples) if mres.samples else 0.0
        record.status = STATUS_OK if record.mirror_fidelity >= protocol.fidelity_min else STATUS_LOW_FIDELITY
        return record
    except HarnessError:
        raise
    except Exception as exc:  # engine failure -> crash record, not an exception
        record.status = STATUS_CRASH
        record.error = f"{type(exc).__name__}: {exc}"
        return record


def run_suite(
    classes: Iterable[str],
    n_grid: Iterable[int],
    config_table: Mapping[str, Mapping[str, MpsConfig]],
    protocol: Protocol = Protocol(),
    *,
    out_path: str | Path | None = None,
    continue_past_failure: bool = False,
    qasm_dir: str | Path | None = None,
    seed: int = 0,
) -> list[BenchmarkRecord]:
    """Sweep every (engine, class) cell over the qubit grid in increasing order.

    A class sweep stops at the first non-ok size unless told otherwise, so each
    row reports a maximum achieved scale.  External classes (no native
    generator) are read from ``qasm_dir`` as ``{class}_{n}.qasm`` and sizes
    without a file are skipped.
    """
    grid = sorted(set(int(n) for n in n_grid))
    records: list[BenchmarkRecord] = []
    for engine_label in sorted(config_table):
        class_configs = config_table[engine_label]
        for class_name in classes:
            if class_name not in class_configs:
                continue
            config = class_configs[class_name]
            for n in grid:
                qasm_path = None
                if class_name not in CLASSES:
                    if qasm_dir is None:
                        raise HarnessError(f"class {class_name!r} needs --qasm-dir with {class_name}_<n>.qasm files")
                    candidate = Path(qasm_dir) / f"{class_name}_{n}.qasm"
                    if not candidate.exists():
                        continue
                    qasm_path = candidate
                rec = run_benchmark(
                    class_name,
                    n,
                    config,
                    protocol,
                    qasm_path=qasm_path,
                    engine=engine_label,
                    seed=seed,
                )
                records.append(rec)
                if out_path is not None:
                    persist([rec], out_path)
                if rec.status != STATUS_OK and not continue_past_failure:
                    break
    return records


def persist(records: Iterable[BenchmarkRecord], path: str | Path) -> None:
    """Append records to a newline-delimited JSON store (one object per line)."""
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def load(path: str | Path) -> list[BenchmarkRecord]:
    records: list[BenchmarkRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise HarnessError(f"{path}: line {lineno}: malformed JSON ({exc.msg})") from exc
            version = data.get("schema")
            if version != SCHEMA_VERSION:
                raise HarnessError(
                    f"{path}: line {lineno}: record schema {version!r} not supported (expected {SCHEMA_VERSION})"
                )
            try:
                records.append(BenchmarkRecord.from_dict(data))
            except TypeError as exc:
                raise HarnessError(f"{path}: line {lineno}: bad record fields ({exc})") from exc
    return records
