"""Elo-based competitive ranking of emulator configurations from benchmark records.

A head-to-head match per benchmark class is decided by the larger maximum
qubit count solved (status ok); ties fall to the lower run time at the shared
maximum, then to the engine id so no draws occur.  Ratings start at 1200 and
move by K times the result surprise; means and standard deviations are
aggregated over many trials with randomized class and pair orderings.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .harness import BenchmarkRecord

__all__ = [
    "INITIAL_RATING",
    "DEFAULT_K",
    "MatchOutcome",
    "EloTable",
    "expected_score",
    "update",
    "match_outcome",
    "tournament",
]

INITIAL_RATING = 1200.0
DEFAULT_K = 32.0

_TRIAL_CHUNK = 8192  # fixed so results are bit-for-bit reproducible


def expected_score(rating_a: float, rating_b: float) -> float:
    """Logistic win expectation: 1 / (1 + 10^((R_B - R_A)/400))."""
    return 1.0 / (1.0 + 10.0 ** ((rating_b - rating_a) / 400.0))


def update(rating_a: float, rating_b: float, score_a: float, k: float = DEFAULT_K) -> tuple[float, float]:
    """One symmetric rating update; the total rating is conserved exactly."""
    delta = k * (score_a - expected_score(rating_a, rating_b))
    return rating_a + delta, rating_b - delta


@dataclass(frozen=True)
class MatchOutcome:
    engine_a: str
    engine_b: str
    class_name: str
    winner: str
    # exact performance ties cannot be ordered; tournaments flip a seeded coin
    # per trial so clones of one engine average to equal ratings
    tied: bool = False


def _best_performance(records: Sequence[BenchmarkRecord]) -> tuple[int, float]:
    """(max ok qubit count, run time there); (0, best attempted time) without any ok."""
    ok = [r for r in records if r.status == "ok" and r.run_time_seconds is not None]
    if ok:
        top = max(r.n_qubits for r in ok)
        return top, min(r.run_time_seconds for r in ok if r.n_qubits == top)
    times = [r.run_time_seconds for r in records if r.run_time_seconds is not None]
    return 0, min(times) if times else math.inf


def match_outcome(
    records_a: Sequence[BenchmarkRecord],
    records_b: Sequence[BenchmarkRecord],
    engine_a: str,
    engine_b: str,
    class_name: str,
) -> MatchOutcome | None:
    """Decide one class matchup, or None when neither engine attempted it."""
    if not records_a and not records_b:
        return None
    n_a, t_a = _best_performance(records_a)
    n_b, t_b = _best_performance(records_b)
    if (n_a, t_a) == (n_b, t_b):
        return MatchOutcome(engine_a, engine_b, class_name, min(engine_a, engine_b), tied=True)
    if n_a != n_b:
        winner = engine_a if n_a > n_b else engine_b
    else:
        winner = engine_a if t_a < t_b else engine_b
    return MatchOutcome(engine_a, engine_b, class_name, winner)


@dataclass
class EloTable:
    engines: list[str]
    means: list[float]
    stds: list[float]
    win_rate: list[list[float | None]]  # None where a pair never met
    trials: int
    seed: int
    k_factor: float
    classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "engines": self.engines,
            "elo_mean": self.means,
            "elo_std": self.stds,
            "win_rate": self.win_rate,
            "trials": self.trials,
            "seed": self.seed,
            "k_factor": self.k_factor,
            "classes": self.classes,
        }

    def winrate_csv(self) -> str:
        lines = ["engine," + ",".join(self.engines)]
        for name, row in zip(self.engines, self.win_rate):
            cells = ["" if v is None else f"{v:.6f}" for v in row]
            lines.append(name + "," + ",".join(cells))
        return "\n".join(lines) + "\n"


def tournament(
    records: Iterable[BenchmarkRecord],
    engines: Sequence[str] | None = None,
    trials: int = 200_000,
    seed: int = 0,
    k: float = DEFAULT_K,
) -> EloTable:
    """Aggregate Elo statistics over randomized-order pairwise competitions.

    Match outcomes are fixed by the records; each trial replays every
    (class, engine pair) match once, with the class order and the pair order
    within each class shuffled under the trial RNG, accumulating the final
    ratings.  The win-rate matrix is order-independent and computed once.
    """
    records = list(records)
    by_engine_class: dict[tuple[str, str], list[BenchmarkRecord]] = defaultdict(list)
    class_set: set[str] = set()
    for rec in records:
        by_engine_class[(rec.engine, rec.class_name)].append(rec)
        class_set.add(rec.class_name)
    if engines is None:
        engines = sorted({rec.engine for rec in records})
    engines = list(engines)
    n_engines = len(engines)
    if n_engines < 2:
        raise ValueError("fewer than 2 engines with benchmark records")
    classes = sorted(class_set)

    match_class: list[int] = []
    match_a: list[int] = []
    match_b: list[int] = []
    match_score_a: list[float] = []
    match_tied: list[bool] = []
    wins = np.zeros((n_engines, n_engines))
    met = np.zeros((n_engines, n_engines))
    for ci, cls in enumerate(classes):
        for i in range(n_engines):
            for j in range(i + 1, n_engines):
                recs_i = by_engine_class.get((engines[i], cls), [])
                recs_j = by_engine_class.get((engines[j], cls), [])
                if not recs_i or not recs_j:
                    continue  # an engine that never attempted the class sits out
                outcome = match_outcome(recs_i, recs_j, engines[i], engines[j], cls)
                s_i = 0.5 if outcome.tied else (1.0 if outcome.winner == engines[i] else 0.0)
                match_class.append(ci)
                match_a.append(i)
                match_b.append(j)
                match_score_a.append(s_i)
                match_tied.append(outcome.tied)
                wins[i, j] += s_i
                wins[j, i] += 1.0 - s_i
                met[i, j] += 1.0
                met[j, i] += 1.0

    n_matches = len(match_class)
    if n_matches == 0:
        raise ValueError("no playable matches in the record set")

    cls_of = np.array(match_class)
    a_of = np.array(match_a)
    b_of = np.array(match_b)
    s_of = np.array(match_score_a)
    tied = np.array(match_tied)
    n_classes = len(classes)

    total = np.zeros(n_engines)
    total_sq = np.zeros(n_engines)
    rng = np.random.default_rng(seed & (2**64 - 1))
    done = 0
    while done < trials:
        chunk = min(_TRIAL_CHUNK, trials - done)
        rows = np.arange(chunk)
        # composite sort key: integer class rank plus a fractional within-class shuffle
        class_rank = np.argsort(np.argsort(rng.random((chunk, n_classes)), axis=1), axis=1)
        key = class_rank[:, cls_of] + rng.random((chunk, n_matches))
        order = np.argsort(key, axis=1)
        scores = np.broadcast_to(s_of, (chunk, n_matches)).copy()
        if tied.any():  # coin-flip exact ties independently per trial
            flips = rng.integers(0, 2, size=(chunk, int(tied.sum()))).astype(float)
            scores[:, tied] = flips
        ratings = np.full((chunk, n_engines), INITIAL_RATING)
        for step in range(n_matches):
            m = order[:, step]
            a = a_of[m]
            b = b_of[m]
            ra = ratings[rows, a]
            rb = ratings[rows, b]
            delta = k * (scores[rows, m] - 1.0 / (1.0 + 10.0 ** ((rb - ra) / 400.0)))
            ratings[rows, a] = ra + delta
            ratings[rows, b] = rb - delta
        total += ratings.sum(axis=0)
        total_sq += (ratings**2).sum(axis=0)
        done += chunk

    means = total / trials
    variance = np.maximum(total_sq / trials - means**2, 0.0)
    stds = np.sqrt(variance)
    win_rate: list[list[float | None]] = [
        [None if met[i, j] == 0 else float(wins[i, j] / met[i, j]) for j in range(n_engines)]
        for i in range(n_engines)
    ]
    return EloTable(
        engines=engines,
        means=[float(v) for v in means],
        stds=[float(v) for v in stds],
        win_rate=win_rate,
        trials=trials,
        seed=seed,
        k_factor=k,
        classes=classes,
    )
