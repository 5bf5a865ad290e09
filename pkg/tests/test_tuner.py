import math

import numpy as np
import pytest

from mpsbench import tuner
from mpsbench.harness import Protocol
from mpsbench.mps import MpsConfig
from mpsbench.tuner import (
    CmaesConfig,
    Dim,
    ParamSpace,
    cmaes_minimize,
    config_from_point,
    default_mps_space,
    discretize,
    encode,
    exhaustive_search,
    margin_correct,
)


def continuous_space(d: int) -> ParamSpace:
    return ParamSpace(tuple(Dim(f"x{i}", "continuous") for i in range(d)))


def test_discretize_chi_grid_rounding():
    space = ParamSpace((Dim("chi", "grid", tuner.CHI_GRID),))
    assert discretize([2.4], space) == {"chi": 16}
    assert discretize([2.5], space) == {"chi": 32}  # half-up tie rule
    assert discretize([-3.0], space) == {"chi": 4}
    assert discretize([99.0], space) == {"chi": 3072}


def test_discretize_bool_and_continuous():
    space = ParamSpace((Dim("flag", "bool"), Dim("x", "continuous", bounds=(-1.0, 1.0))))
    assert discretize([0.49, 5.0], space) == {"flag": False, "x": 1.0}
    assert discretize([0.5, -5.0], space) == {"flag": True, "x": -1.0}
    with pytest.raises(ValueError):
        discretize([math.nan, 0.0], space)


def test_encode_discretize_idempotent():
    space = default_mps_space()
    rng = np.random.default_rng(3)
    for _ in range(50):
        latent = rng.uniform(-2, 12, size=len(space))
        point = discretize(latent, space)
        assert discretize(encode(point, space), space) == point


def test_param_space_validation():
    with pytest.raises(ValueError):
        ParamSpace((Dim("a", "grid", (1,)),))
    with pytest.raises(ValueError):
        ParamSpace((Dim("a", "grid", (3, 1, 2)),))
    with pytest.raises(ValueError):
        CmaesConfig(population=3)
    with pytest.raises(ValueError):
        CmaesConfig(margin=0.7)


def test_two_value_space_solved_in_one_generation():
    space = ParamSpace((Dim("a", "categorical", ("A", "B")),))
    res = cmaes_minimize(
        lambda p: 0.0 if p["a"] == "A" else 1.0,
        space,
        CmaesConfig(population=10, max_generations=1, seed=0),
    )
    assert res.best_point == {"a": "A"}
    assert res.best_cost == 0.0


def test_trace_is_monotone_best_so_far():
    space = continuous_space(3)

    def rosenbrock(p):
        x = list(p.values())
        return sum(100 * (x[i + 1] - x[i] ** 2) ** 2 + (1 - x[i]) ** 2 for i in range(2))

    res = cmaes_minimize(rosenbrock, space, CmaesConfig(population=8, max_generations=30, sigma0=0.3, seed=1))
    assert all(b >= a for a, b in zip(res.trace[1:], res.trace))


def test_sphere_convergence():
    space = continuous_space(5)
    res = cmaes_minimize(
        lambda p: sum(v * v for v in p.values()),
        space,
        CmaesConfig(population=10, max_generations=60, sigma0=0.3, seed=4),
    )
    assert res.best_cost < 1e-8


def test_deterministic_under_seed():
    space = default_mps_space()

    def objective(p):
        return math.log(p["chi"]) + abs(math.log10(p["cutoff"]) + 6) + p["fuse"] + p["permute"]

    a = cmaes_minimize(objective, space, CmaesConfig(population=8, max_generations=6, seed=7))
    b = cmaes_minimize(objective, space, CmaesConfig(population=8, max_generations=6, seed=7))
    assert a.best_point == b.best_point
    assert a.trace == b.trace


def _state_with(mean, diag, sigma=1.0):
    st = tuner._CmaesState(np.asarray(mean, dtype=float), sigma, 10)
    st.cov = np.diag(diag).astype(float)
    return st


def test_margin_sets_nearest_boundary_crossing_exactly_alpha():
    from scipy.stats import norm

    space = ParamSpace((Dim("g", "grid", tuple(range(10))),))
    st = _state_with([4.2], [1e-12])
    alpha = 0.05
    margin_correct(st, space, alpha)
    scale = st.sigma * math.sqrt(st.cov[0, 0])
    nearest = 3.5  # cell of index 4 spans (3.5, 4.5); 4.2 is nearer to 4.5? no: |4.2-4.5|=0.3 < |4.2-3.5|=0.7
    crossing = 1.0 - norm.cdf((4.5 - 4.2) / scale)
    assert crossing == pytest.approx(alpha, abs=1e-9)


def test_margin_leaves_wide_marginals_alone():
    space = ParamSpace((Dim("g", "grid", tuple(range(10))),))
    st = _state_with([4.0], [4.0])
    before = st.cov.copy()
    margin_correct(st, space, 0.05)
    assert np.allclose(st.cov, before)


def test_margin_ignores_continuous_dims():
    space = ParamSpace((Dim("x", "continuous"),))
    st = _state_with([0.0], [1e-20])
    before = st.cov.copy()
    margin_correct(st, space, 0.2)
    assert np.allclose(st.cov, before)


def test_margin_keeps_covariance_positive_definite():
    space = ParamSpace(
        (
            Dim("a", "grid", tuple(range(8))),
            Dim("b", "grid", tuple(range(8))),
            Dim("c", "bool"),
        )
    )
    rng = np.random.default_rng(0)

    def bumpy(p):
        return (p["a"] - 5) ** 2 + (p["b"] - 1) ** 2 + (0.0 if p["c"] else 0.5)

    state = tuner._CmaesState(space.initial_mean(), 0.4, 10)
    alpha = 1.0 / (2 * 3 * 10)
    for _ in range(40):
        xs = state.ask(rng)
        costs = np.array([bumpy(discretize(x, space)) for x in xs])
        state.tell(xs, costs)
        margin_correct(state, space, alpha)
        eigs = np.linalg.eigvalsh((state.cov + state.cov.T) / 2)
        assert eigs.min() > 0.0


def test_margin_rescues_premature_convergence():
    # tiny initial step size strands the search inside one grid cell; the
    # margin correction keeps a crossing probability alive so the quadratic
    # bowl can still be descended cell by cell
    space = ParamSpace(tuple(Dim(c, "grid", tuple(range(10))) for c in "abc"))

    def bowl(p):
        return float(sum((v - 9) ** 2 for v in p.values()))

    def success_count(margin, seeds=40):
        wins = 0
        for seed in range(seeds):
            cfg = CmaesConfig(population=10, max_generations=120, sigma0=0.05, seed=seed, margin=margin)
            stop_when_solved = lambda gen, best, costs: best > 0.0
            res = cmaes_minimize(bowl, space, cfg, on_generation=stop_when_solved)
            wins += res.best_cost == 0.0
        return wins

    on = success_count(None)
    off = success_count(0.0)
    assert on >= 0.9 * 40
    assert off < on


def test_exhaustive_search_finds_optimum():
    space = ParamSpace((Dim("a", "grid", (1, 2, 3)), Dim("b", "bool")))
    best, cost = exhaustive_search(lambda p: abs(p["a"] - 2) + (0 if p["b"] else 1), space)
    assert best == {"a": 2, "b": True}
    assert cost == 0.0


def test_config_from_point_roundtrip():
    cfg = config_from_point({"chi": 64, "cutoff": 1e-6, "fuse": True, "permute": False, "swap_split": True}, 5)
    assert cfg == MpsConfig(64, 1e-6, True, False, True, 5)


def test_benchmark_cost_feasibility_dominance():
    protocol = Protocol()

    class Rec:
        def __init__(self, status, rt, fid):
            self.status = status
            self.run_time_seconds = rt
            self.mirror_fidelity = fid

    feasible_slow = tuner._benchmark_cost(Rec("ok", 299.9, 1.0), protocol)
    infeasible_close = tuner._benchmark_cost(Rec("low_fidelity", 1.0, 0.989), protocol)
    timeout = tuner._benchmark_cost(Rec("timeout", None, None), protocol)
    assert feasible_slow < infeasible_close < timeout


def test_tune_fallback_on_infeasible_probe(monkeypatch):
    calls = []

    class FakeRecord:
        def __init__(self, n, ok):
            self.status = "ok" if ok else "timeout"
            self.run_time_seconds = 1.0 + n / 100 if ok else None
            self.mirror_fidelity = 1.0 if ok else None

    def fake_run_benchmark(class_name, n, config, protocol, **kwargs):
        calls.append(n)
        return FakeRecord(n, ok=n <= 24)

    monkeypatch.setattr(tuner, "run_benchmark", fake_run_benchmark)
    result = tuner.tune("qft", n_tune=100, cmaes=CmaesConfig(population=4, max_generations=2, seed=0))
    assert result.n_tune == 24
    assert result.feasible
    assert 100 in calls and 24 in calls


def test_tune_random_falls_back_to_ten(monkeypatch):
    class FakeRecord:
        def __init__(self, ok, n):
            self.status = "ok" if ok else "timeout"
            self.run_time_seconds = 0.5 if ok else None
            self.mirror_fidelity = 1.0 if ok else None

    def fake_run_benchmark(class_name, n, config, protocol, **kwargs):
        return FakeRecord(n <= 10, n)

    monkeypatch.setattr(tuner, "run_benchmark", fake_run_benchmark)
    result = tuner.tune("random", n_tune=100, cmaes=CmaesConfig(population=4, max_generations=2, seed=0))
    assert result.n_tune == 10
    assert result.feasible


def test_tune_real_small_instance():
    protocol = Protocol(shots=100, reps=1, deadline=30.0)
    result = tuner.tune(
        "ghz",
        n_tune=6,
        protocol=protocol,
        cmaes=CmaesConfig(population=4, max_generations=2, seed=3),
        seed=3,
    )
    assert result.feasible
    assert result.record.status == "ok"
    assert result.evaluations == 8
