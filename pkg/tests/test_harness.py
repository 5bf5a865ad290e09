import json
import math

import pytest

from mpsbench import harness, mps
from mpsbench.circuits import generate
from mpsbench.harness import (
    BenchmarkRecord,
    HarnessError,
    Protocol,
    engine_id,
    load,
    persist,
    run_benchmark,
    run_suite,
)
from mpsbench.mps import MpsConfig
from mpsbench.qasm import serialize_qasm

FAST = Protocol(shots=200, reps=2, deadline=60.0)


def test_ghz_cell_is_ok_with_perfect_mirror():
    rec = run_benchmark("ghz", 100, MpsConfig(bond_dimension=4), FAST, seed=1)
    assert rec.status == "ok"
    assert rec.mirror_fidelity == 1.0
    assert rec.run_time_seconds == min(rec.per_repetition_times)
    assert rec.run_time_seconds > 0.0
    assert len(rec.per_repetition_times) == 2
    assert rec.engine == engine_id(MpsConfig(bond_dimension=4))
    assert rec.forward_sample_digest
    assert rec.mirror_zero_probability == pytest.approx(1.0, abs=1e-9)


def test_zero_deadline_is_timeout():
    rec = run_benchmark("ghz", 8, MpsConfig(), Protocol(deadline=0.0), seed=1)
    assert rec.status == "timeout"
    assert rec.per_repetition_times == []
    assert rec.run_time_seconds is None
    assert rec.mirror_fidelity is None


def test_low_fidelity_flagged():
    rec = run_benchmark("random", 8, MpsConfig(bond_dimension=2), FAST, seed=1)
    assert rec.status == "low_fidelity"
    assert rec.mirror_fidelity < 0.99


def test_crash_is_a_status_not_an_exception(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("svd exploded")

    monkeypatch.setattr(harness, "run", boom)
    rec = run_benchmark("ghz", 4, MpsConfig(), FAST, seed=1)
    assert rec.status == "crash"
    assert "svd exploded" in rec.error


def test_status_precedence_timeout_wins():
    # a deadline that lets nothing finish dominates any fidelity outcome
    rec = run_benchmark("qft", 64, MpsConfig(bond_dimension=8), Protocol(deadline=0.01), seed=1)
    assert rec.status == "timeout"


def test_qasm_file_ingestion(tmp_path):
    path = tmp_path / "ghz_6.qasm"
    path.write_text(serialize_qasm(generate("ghz", 6, seed=3)), encoding="utf-8")
    rec = run_benchmark("ghz", 6, MpsConfig(bond_dimension=4), FAST, qasm_path=path, seed=3)
    assert rec.status == "ok"
    assert rec.mirror_fidelity == 1.0


def test_qasm_file_qubit_mismatch(tmp_path):
    path = tmp_path / "ghz_6.qasm"
    path.write_text(serialize_qasm(generate("ghz", 6, seed=3)), encoding="utf-8")
    with pytest.raises(HarnessError):
        run_benchmark("ghz", 8, MpsConfig(), FAST, qasm_path=path)


def test_statevector_engine():
    rec = run_benchmark("ghz", 6, MpsConfig(rng_seed=4), FAST, seed=1, use_statevector=True)
    assert rec.engine == "sv"
    assert rec.status == "ok"
    assert rec.mirror_fidelity == 1.0


def test_persist_load_round_trip(tmp_path):
    recs = [
        run_benchmark("ghz", 4, MpsConfig(bond_dimension=4), FAST, seed=1),
        run_benchmark("ghz", 8, MpsConfig(bond_dimension=4), Protocol(deadline=0.0), seed=1),
    ]
    path = tmp_path / "bench.jsonl"
    persist(recs, path)
    loaded = load(path)
    assert [r.to_dict() for r in loaded] == [r.to_dict() for r in recs]


def test_persist_is_append_safe(tmp_path):
    path = tmp_path / "bench.jsonl"
    a = run_benchmark("ghz", 4, MpsConfig(bond_dimension=4), FAST, seed=1)
    b = run_benchmark("wstate", 4, MpsConfig(bond_dimension=4), FAST, seed=2)
    persist([a], path)
    persist([b], path)
    loaded = load(path)
    assert [r.to_dict() for r in loaded] == [a.to_dict(), b.to_dict()]


def test_load_rejects_future_schema(tmp_path):
    path = tmp_path / "bench.jsonl"
    rec = run_benchmark("ghz", 4, MpsConfig(bond_dimension=4), FAST, seed=1)
    data = rec.to_dict()
    data["schema"] = 99
    path.write_text(json.dumps(data) + "\n", encoding="utf-8")
    with pytest.raises(HarnessError) as err:
        load(path)
    assert "line 1" in str(err.value)
    assert "schema" in str(err.value)


def test_load_reports_malformed_line(tmp_path):
    path = tmp_path / "bench.jsonl"
    path.write_text('{"schema": 1}\nnot json\n', encoding="utf-8")
    with pytest.raises(HarnessError) as err:
        load(path)
    assert "line" in str(err.value)


def test_suite_sweeps_monotone_and_stops_at_failure():
    table = {"demo": {"random": MpsConfig(bond_dimension=2)}}
    recs = run_suite(["random"], [4, 6, 8, 12], table, FAST, seed=5)
    sizes = [r.n_qubits for r in recs]
    assert sizes == sorted(sizes)
    assert all(r.status == "ok" for r in recs[:-1])
    assert recs[-1].status != "ok"
    assert sizes[-1] < 12 or len(recs) == 4


def test_suite_continue_past_failure():
    table = {"demo": {"random": MpsConfig(bond_dimension=2)}}
    stop = run_suite(["random"], [4, 8, 10], table, FAST, seed=5)
    full = run_suite(["random"], [4, 8, 10], table, FAST, seed=5, continue_past_failure=True)
    assert len(full) == 3
    assert len(stop) <= len(full)


def test_suite_empty_classes_gives_no_records():
    assert run_suite([], [4, 8], {"demo": {}}, FAST) == []


def test_suite_external_class_from_qasm_dir(tmp_path):
    # exercises the ae/qwalk/qnn ingestion path with a stand-in file set
    for n in (4, 6):
        text = serialize_qasm(generate("ghz", n, seed=2))
        (tmp_path / f"qnn_{n}.qasm").write_text(text, encoding="utf-8")
    table = {"demo": {"qnn": MpsConfig(bond_dimension=8)}}
    recs = run_suite(["qnn"], [4, 6, 8], table, FAST, qasm_dir=tmp_path, seed=2)
    assert [r.n_qubits for r in recs] == [4, 6]  # grid point without a file is skipped
    assert all(r.status == "ok" for r in recs)
    assert all(r.class_name == "qnn" for r in recs)


def test_suite_external_class_requires_dir():
    with pytest.raises(HarnessError):
        run_suite(["qwalk"], [4], {"demo": {"qwalk": MpsConfig()}}, FAST)


def test_suite_appends_to_store(tmp_path):
    path = tmp_path / "bench.jsonl"
    table = {"demo": {"ghz": MpsConfig(bond_dimension=4)}}
    run_suite(["ghz"], [4, 6], table, FAST, out_path=path, seed=1)
    run_suite(["ghz"], [8], table, FAST, out_path=path, seed=1)
    assert [r.n_qubits for r in load(path)] == [4, 6, 8]
