"""CMA-ES hyperparameter optimization over mixed discrete/continuous spaces.

The optimizer runs a standard (mu/mu_w, lambda) evolution strategy in a
continuous latent space, maps every candidate to the nearest valid discrete
configuration before evaluation, and applies a margin correction to the search
covariance so each discrete coordinate keeps a minimum probability of leaving
its current grid cell (preventing premature convergence once the step size
shrinks below the cell width).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .harness import Protocol, run_benchmark
from .mps import MpsConfig

__all__ = [
    "Dim",
    "ParamSpace",
    "CmaesConfig",
    "CmaesResult",
    "cmaes_minimize",
    "discretize",
    "margin_correct",
    "exhaustive_search",
    "default_mps_space",
    "config_from_point",
    "tune",
    "TuneResult",
]

GRID = "grid"
BOOL = "bool"
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Dim:
    """One search dimension.

    Discrete kinds (grid, bool, categorical) are encoded by index in the
    latent space; continuous dimensions pass through, optionally clipped.
    """

    name: str
    kind: str
    values: tuple = ()
    bounds: tuple[float, float] | None = None

    def size(self) -> int:
        return len(self.values)

    def is_discrete(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple[Dim, ...]

    def __post_init__(self) -> None:
        for d in self.dims:
            if d.kind in (GRID, CATEGORICAL) and len(d.values) < 2:
                raise ValueError(f"dimension {d.name!r} needs at least two admissible values")
            if d.kind == GRID and list(d.values) != sorted(d.values):
                raise ValueError(f"grid dimension {d.name!r} must be sorted")
            if d.kind == BOOL and d.values not in ((), (False, True)):
                raise ValueError(f"bool dimension {d.name!r} takes no custom values")
            if d.kind == CONTINUOUS and d.values:
                raise ValueError(f"continuous dimension {d.name!r} takes bounds, not values")

    def __len__(self) -> int:
        return len(self.dims)

    def discrete_count(self) -> int:
        return sum(1 for d in self.dims if d.is_discrete())

    def initial_mean(self) -> np.ndarray:
        out = []
        for d in self.dims:
            if d.kind == BOOL:
                out.append(0.5)
            elif d.is_discrete():
                out.append((len(d.values) - 1) / 2.0)
            else:
                lo, hi = d.bounds if d.bounds else (-1.0, 1.0)
                out.append((lo + hi) / 2.0)
        return np.array(out)

    def default_sigma0(self) -> float:
        spans = []
        for d in self.dims:
            if d.kind == BOOL:
                spans.append(1.0)
            elif d.is_discrete():
                spans.append(len(d.values) - 1.0)
            elif d.bounds:
                spans.append(d.bounds[1] - d.bounds[0])
            else:
                spans.append(1.0)
        return 0.3 * max(spans)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def discretize(latent: Sequence[float], space: ParamSpace) -> dict:
    """Map a latent vector to the nearest valid configuration (half-up ties)."""
    point = {}
    for x, d in zip(latent, space.dims):
        if not math.isfinite(x):
            raise ValueError(f"non-finite latent coordinate for {d.name!r}")
        if d.kind == BOOL:
            point[d.name] = bool(x >= 0.5)
        elif d.is_discrete():
            idx = min(max(_round_half_up(x), 0), len(d.values) - 1)
            point[d.name] = d.values[idx]
        elif d.bounds is not None:
            point[d.name] = float(min(max(x, d.bounds[0]), d.bounds[1]))
        else:
            point[d.name] = float(x)
    return point


def encode(point: dict, space: ParamSpace) -> np.ndarray:
    """Inverse of discretize onto cell centers (used to seed searches)."""
    out = []
    for d in space.dims:
        v = point[d.name]
        if d.kind == BOOL:
            out.append(1.0 if v else 0.0)
        elif d.is_discrete():
            out.append(float(d.values.index(v)))
        else:
            out.append(float(v))
    return np.array(out)


@dataclass(frozen=True)
class CmaesConfig:
    population: int = 10
    max_generations: int = 10
    sigma0: float | None = None  # derived from the space when unset
    seed: int = 0
    margin: float | None = None  # default 1/(2 * discrete_dims * population)

    def __post_init__(self) -> None:
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if self.sigma0 is not None and self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.margin is not None and not 0.0 <= self.margin < 0.5:
            raise ValueError("margin must lie in [0, 0.5)")


@dataclass
class CmaesResult:
    best_point: dict
    best_cost: float
    trace: list[float]  # best-so-far cost after each generation
    evaluations: int


class _CmaesState:
    """Dynamic CMA-ES state with standard strategy-parameter settings."""

    def __init__(self, mean: np.ndarray, sigma: float, population: int):
        n = mean.size
        self.n = n
        self.mean = mean.astype(float)
        self.sigma = float(sigma)
        self.lam = population
        self.mu = population // 2
        raw = np.log((self.lam + 1) / 2.0) - np.log(np.arange(1, self.mu + 1))
        self.weights = raw / raw.sum()
        self.mueff = 1.0 / float(self.weights @ self.weights)
        # cumulation and learning rates (Hansen's defaults)
        self.cc = (4.0 + self.mueff / n) / (n + 4.0 + 2.0 * self.mueff / n)
        self.cs = (self.mueff + 2.0) / (n + self.mueff + 5.0)
        self.c1 = 2.0 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1.0 - self.c1, 2.0 * (self.mueff - 2.0 + 1.0 / self.mueff) / ((n + 2.0) ** 2 + self.mueff))
        self.damps = 1.0 + 2.0 * max(0.0, math.sqrt((self.mueff - 1.0) / (n + 1.0)) - 1.0) + self.cs
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
        self.cov = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_cov = np.zeros(n)
        self.generation = 0

    def _decompose(self) -> tuple[np.ndarray, np.ndarray]:
        self.cov = (self.cov + self.cov.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(self.cov)
        eigvals = np.maximum(eigvals, 1e-30)
        return eigvals, eigvecs

    def ask(self, rng: np.random.Generator) -> np.ndarray:
        eigvals, eigvecs = self._decompose()
        z = rng.standard_normal((self.lam, self.n))
        return self.mean + self.sigma * (z * np.sqrt(eigvals)) @ eigvecs.T

    def tell(self, candidates: np.ndarray, costs: np.ndarray) -> None:
        order = np.argsort(costs, kind="stable")
        selected = candidates[order[: self.mu]]
        old_mean = self.mean
        self.mean = self.weights @ selected
        step = (self.mean - old_mean) / self.sigma

        eigvals, eigvecs = self._decompose()
        inv_sqrt = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
        self.generation += 1
        self.p_sigma = (1.0 - self.cs) * self.p_sigma + math.sqrt(
            self.cs * (2.0 - self.cs) * self.mueff
        ) * (inv_sqrt @ step)
        ps_norm2 = float(self.p_sigma @ self.p_sigma)
        hsig = ps_norm2 / self.n / (1.0 - (1.0 - self.cs) ** (2.0 * self.generation)) < 2.0 + 4.0 / (self.n + 1.0)
        self.p_cov = (1.0 - self.cc) * self.p_cov + hsig * math.sqrt(
            self.cc * (2.0 - self.cc) * self.mueff
        ) * step

        delta_hsig = (1.0 - hsig) * self.cc * (2.0 - self.cc)
        self.cov = (1.0 - self.c1 - self.cmu) * self.cov + self.c1 * (
            np.outer(self.p_cov, self.p_cov) + delta_hsig * self.cov
        )
        diffs = (selected - old_mean) / self.sigma
        self.cov += self.cmu * (diffs.T * self.weights) @ diffs
        self.sigma *= math.exp((self.cs / self.damps) * (math.sqrt(ps_norm2) / self.chi_n - 1.0))


def margin_correct(state: _CmaesState, space: ParamSpace, alpha: float) -> None:
    """Keep every discrete marginal crossing its nearest cell boundary with probability alpha.

    Whenever the current search marginal of a discrete coordinate places less
    than ``alpha`` probability outside its cell, that coordinate's scale row and
    column are inflated (a congruence, so the covariance stays positive
    definite) until the nearest-boundary crossing probability is exactly alpha.
    Means that drifted outside the index range are pulled back to the edge.
    Continuous coordinates are untouched.
    """
    if alpha <= 0.0:
        return
    quantile = norm.ppf(1.0 - alpha)  # > 0 for alpha < 0.5
    for j, d in enumerate(space.dims):
        if not d.is_discrete():
            continue
        top = 1.0 if d.kind == BOOL else len(d.values) - 1.0
        m = float(min(max(state.mean[j], 0.0), top))
        state.mean[j] = m
        scale = state.sigma * math.sqrt(max(state.cov[j, j], 0.0))
        idx = min(max(_round_half_up(m), 0), int(top))
        boundaries = []
        if idx > 0:
            boundaries.append(idx - 0.5)
        if idx < top:
            boundaries.append(idx + 0.5)
        if not boundaries:
            continue
        if scale > 0.0:
            p_out = 0.0
            for b in boundaries:
                tail = (b - m) / scale
                p_out += norm.cdf(tail) if b < m else 1.0 - norm.cdf(tail)
            if p_out >= alpha:
                continue
        dist = min(abs(m - b) for b in boundaries)
        if dist == 0.0:
            continue
        target = dist / quantile
        ratio = target / scale if scale > 0.0 else None
        if ratio is None:
            # degenerate marginal: set the diagonal directly
            state.cov[j, j] = (target / state.sigma) ** 2
        else:
            state.cov[j, :] *= ratio
            state.cov[:, j] *= ratio


def cmaes_minimize(
    objective: Callable[[dict], float],
    space: ParamSpace,
    cfg: CmaesConfig = CmaesConfig(),
    on_generation: Callable[[int, float, list[float]], bool] | None = None,
) -> CmaesResult:
    """Minimize a total objective over the space; returns the best evaluated point.

    The optional ``on_generation(index, best_cost, generation_costs)`` hook can
    abort the search early by returning False; the best point so far is still
    returned.
    """
    rng = np.random.default_rng(cfg.seed & (2**64 - 1))
    sigma0 = cfg.sigma0 if cfg.sigma0 is not None else space.default_sigma0()
    state = _CmaesState(space.initial_mean(), sigma0, cfg.population)
    d_disc = space.discrete_count()
    alpha = cfg.margin if cfg.margin is not None else (1.0 / (2.0 * d_disc * cfg.population) if d_disc else 0.0)

    best_point: dict | None = None
    best_cost = math.inf
    trace: list[float] = []
    evaluations = 0
    for gen in range(cfg.max_generations):
        candidates = state.ask(rng)
        points = [discretize(x, space) for x in candidates]
        costs = np.array([float(objective(p)) for p in points])
        evaluations += len(points)
        gen_best = int(np.argmin(costs))
        if costs[gen_best] < best_cost:
            best_cost = float(costs[gen_best])
            best_point = points[gen_best]
        state.tell(candidates, costs)
        margin_correct(state, space, alpha)
        trace.append(best_cost)
        if on_generation is not None and not on_generation(gen, best_cost, costs.tolist()):
            break
    return CmaesResult(best_point or discretize(state.mean, space), best_cost, trace, evaluations)


def exhaustive_search(objective: Callable[[dict], float], space: ParamSpace) -> tuple[dict, float]:
    """Grid search over every discrete configuration (continuous dims at center)."""
    axes = []
    for d in space.dims:
        if d.kind == BOOL:
            axes.append([False, True])
        elif d.is_discrete():
            axes.append(list(d.values))
        else:
            lo, hi = d.bounds if d.bounds else (0.0, 0.0)
            axes.append([(lo + hi) / 2.0])
    best_point, best_cost = None, math.inf
    for combo in itertools.product(*axes):
        point = {d.name: v for d, v in zip(space.dims, combo)}
        cost = float(objective(point))
        if cost < best_cost:
            best_point, best_cost = point, cost
    return best_point, best_cost


# --- emulator tuning ---------------------------------------------------------

CHI_GRID = (4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 3072)
CUTOFF_GRID = tuple(10.0**-k for k in range(1, 11))  # 1e-1 .. 1e-10


def default_mps_space() -> ParamSpace:
    return ParamSpace(
        (
            Dim("chi", GRID, CHI_GRID),
            Dim("cutoff", GRID, tuple(sorted(CUTOFF_GRID))),
            Dim("fuse", BOOL),
            Dim("permute", BOOL),
            Dim("swap_split", BOOL),
        )
    )


def config_from_point(point: dict, rng_seed: int = 0) -> MpsConfig:
    return MpsConfig(
        bond_dimension=int(point.get("chi", 64)),
        cutoff=float(point.get("cutoff", 1e-10)),
        fuse=bool(point.get("fuse", False)),
        permute=bool(point.get("permute", False)),
        swap_split=bool(point.get("swap_split", True)),
        rng_seed=rng_seed,
    )


FALLBACK_N = 24
FALLBACK_N_RANDOM = 10
_PENALTY_FACTOR = 10.0  # infeasible cost = deadline + 10*deadline*fidelity deficit


@dataclass
class TuneResult:
    best_config: MpsConfig
    record: object  # BenchmarkRecord of the full-protocol revalidation
    n_tune: int
    feasible: bool
    trace: list[float]
    evaluations: int


def _benchmark_cost(rec, protocol: Protocol) -> float:
    if rec.status == "ok":
        return rec.run_time_seconds
    fidelity = rec.mirror_fidelity if rec.mirror_fidelity is not None else 0.0
    deficit = max(protocol.fidelity_min - fidelity, 0.0)
    return protocol.deadline + _PENALTY_FACTOR * protocol.deadline * deficit


def tune(
    class_name: str,
    n_tune: int = 100,
    space: ParamSpace | None = None,
    protocol: Protocol = Protocol(),
    cmaes: CmaesConfig = CmaesConfig(),
    *,
    seed: int = 0,
    qasm_path=None,
) -> TuneResult:
    """Find a fast, fidelity-compliant emulator config for one circuit class.

    Each objective evaluation uses a single timed repetition to keep tuning
    cheap; the winning config is revalidated with the full protocol.  If no
    configuration of the first generation is feasible at ``n_tune``, tuning
    falls back to 24 qubits (10 for the random class) and restarts.
    """
    space = space or default_mps_space()
    probe_protocol = replace(protocol, reps=1)

    def objective_at(n: int) -> Callable[[dict], float]:
        def objective(point: dict) -> float:
            config = config_from_point(point, rng_seed=seed)
            rec = run_benchmark(class_name, n, config, probe_protocol, seed=seed, qasm_path=qasm_path)
            return _benchmark_cost(rec, protocol)

        return objective

    fallback = FALLBACK_N_RANDOM if class_name == "random" else FALLBACK_N
    n_used = n_tune
    aborted = False

    def first_generation_gate(gen: int, _best: float, costs: list[float]) -> bool:
        nonlocal aborted
        if gen == 0 and min(costs) > protocol.deadline:
            aborted = True
            return False
        return True

    hook = first_generation_gate if n_tune > fallback and qasm_path is None else None
    result = cmaes_minimize(objective_at(n_used), space, cmaes, on_generation=hook)
    if aborted:
        n_used = fallback
        result = cmaes_minimize(objective_at(n_used), space, cmaes)

    best_config = config_from_point(result.best_point, rng_seed=seed)
    record = run_benchmark(class_name, n_used, best_config, protocol, seed=seed, qasm_path=qasm_path)
    return TuneResult(
        best_config=best_config,
        record=record,
        n_tune=n_used,
        feasible=record.status == "ok",
        trace=result.trace,
        evaluations=result.evaluations,
    )
