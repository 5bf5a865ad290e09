import math

import numpy as np
import pytest

from mpsbench.elo import (
    DEFAULT_K,
    INITIAL_RATING,
    EloTable,
    expected_score,
    match_outcome,
    tournament,
    update,
)
from mpsbench.harness import BenchmarkRecord


def make_record(engine, class_name, n, status="ok", run_time=1.0):
    return BenchmarkRecord(
        class_name=class_name,
        n_qubits=n,
        engine=engine,
        config={},
        status=status,
        run_time_seconds=run_time,
        per_repetition_times=[run_time],
        mirror_fidelity=1.0 if status == "ok" else 0.0,
        forward_sample_digest=None,
        shots=1000,
        repetitions=4,
        timestamp="2000-01-01T00:00:00Z",
        version="test",
        host="test",
    )


def test_expected_score_values():
    assert expected_score(1200, 1200) == 0.5
    assert expected_score(1400, 1200) == pytest.approx(0.7597469266, abs=1e-9)
    assert expected_score(1000, 1400) == pytest.approx(1 / 11, abs=1e-12)
    assert expected_score(1200, 1000) + expected_score(1000, 1200) == pytest.approx(1.0, abs=1e-12)


def test_update_win_and_loss():
    assert update(1200, 1200, 1.0, 32) == (1216.0, 1184.0)
    assert update(1200, 1200, 0.0, 32) == (1184.0, 1216.0)


def test_update_is_zero_sum():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        ra, rb = rng.uniform(800, 2200, size=2)
        s = float(rng.integers(0, 2))
        na, nb = update(ra, rb, s)
        assert na + nb == pytest.approx(ra + rb, abs=1e-9)


def test_match_outcome_prefers_higher_n():
    a = [make_record("A", "ae", 1024)]
    b = [make_record("B", "ae", 256, run_time=0.001)]
    assert match_outcome(a, b, "A", "B", "ae").winner == "A"


def test_match_outcome_time_breaks_equal_n():
    a = [make_record("A", "ae", 100, run_time=0.87)]
    b = [make_record("B", "ae", 100, run_time=12.69)]
    assert match_outcome(a, b, "A", "B", "ae").winner == "A"
    assert match_outcome(b, a, "B", "A", "ae").winner == "A"


def test_match_outcome_no_ok_records_uses_best_attempt():
    a = [make_record("A", "random", 16, status="timeout", run_time=5.0)]
    b = [make_record("B", "random", 16, status="timeout", run_time=9.0)]
    assert match_outcome(a, b, "A", "B", "random").winner == "A"


def test_match_outcome_skip_when_neither_attempted():
    assert match_outcome([], [], "A", "B", "qft") is None


def test_tournament_dominance():
    records = []
    for cls in ("qft", "ghz", "wstate"):
        records.append(make_record("A", cls, 1024))
        records.append(make_record("B", cls, 64))
    table = tournament(records, trials=2000, seed=3)
    means = dict(zip(table.engines, table.means))
    assert means["A"] > means["B"]
    i, j = table.engines.index("A"), table.engines.index("B")
    assert table.win_rate[i][j] == 1.0
    assert table.win_rate[j][i] == 0.0


def test_tournament_rating_conservation_and_symmetry():
    records = []
    for cls in ("qft", "ghz"):
        for eng in ("A", "B"):
            records.append(make_record(eng, cls, 128, run_time=1.0 if eng == "A" else 2.0))
    table = tournament(records, trials=20_000, seed=9)
    assert sum(table.means) == pytest.approx(INITIAL_RATING * 2, abs=1e-6)


def test_tournament_clone_symmetry():
    # identical record sets under two names: per-trial coin flips average out
    records = []
    for cls in ("qft", "ghz", "wstate", "ae"):
        records.append(make_record("A", cls, 100, run_time=1.0))
        records.append(make_record("B", cls, 100, run_time=1.0))
    table = tournament(records, trials=20_000, seed=5)
    assert abs(table.means[0] - table.means[1]) < 1.0
    assert sum(table.means) == pytest.approx(INITIAL_RATING * 2, abs=1e-6)
    assert table.win_rate[0][1] == pytest.approx(0.5)


def test_tournament_winrate_rows_sum_to_one():
    rng = np.random.default_rng(0)
    records = []
    for cls in ("a", "b", "c", "d", "e"):
        for eng in ("E1", "E2", "E3"):
            n = int(rng.choice([16, 64, 256, 1024]))
            records.append(make_record(eng, cls, n, run_time=float(rng.uniform(0.1, 10))))
    table = tournament(records, trials=5000, seed=2)
    for i in range(3):
        for j in range(3):
            if i != j and table.win_rate[i][j] is not None:
                assert table.win_rate[i][j] + table.win_rate[j][i] == pytest.approx(1.0)


def test_tournament_deterministic_bit_for_bit():
    records = []
    rng = np.random.default_rng(4)
    for cls in ("a", "b", "c"):
        for eng in ("E1", "E2", "E3", "E4"):
            records.append(make_record(eng, cls, int(rng.choice([8, 32, 128])), run_time=float(rng.uniform(0.1, 5))))
    t1 = tournament(records, trials=12_000, seed=11)
    t2 = tournament(records, trials=12_000, seed=11)
    assert t1.means == t2.means
    assert t1.stds == t2.stds
    t3 = tournament(records, trials=12_000, seed=12)
    assert t1.means != t3.means


def test_tournament_requires_two_engines():
    with pytest.raises(ValueError, match="fewer than 2 engines"):
        tournament([make_record("A", "qft", 8)], trials=10, seed=0)


def test_tournament_engine_without_class_records_sits_out():
    records = [
        make_record("A", "qft", 64),
        make_record("B", "qft", 32),
        make_record("A", "ghz", 64),
        make_record("B", "ghz", 32),
        make_record("C", "ghz", 128),
    ]
    table = tournament(records, trials=1000, seed=1)
    ia, ic = table.engines.index("A"), table.engines.index("C")
    # C never met A on qft; they met only on ghz
    assert table.win_rate[ia][ic] == 0.0  # C beat A on ghz (128 > 64)


def test_winrate_csv_shape():
    records = [make_record("A", "qft", 64), make_record("B", "qft", 32)]
    table = tournament(records, trials=100, seed=0)
    csv = table.winrate_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "engine,A,B"
    assert len(lines) == 3
