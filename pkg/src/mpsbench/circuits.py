"""Native generators for the scalable benchmark circuit families, mirrors and grids.

Each generator is a pure function of (class name, qubit count, seed) and emits
a sanitized u/cx-only circuit with terminal measurements on every qubit.  The
``ae``, ``qwalk`` and ``qnn`` classes are not generated natively; their QASM
files are ingested through the generic parser instead.
"""

from __future__ import annotations

import math

import networkx as nx
import numpy as np

from . import synth
from .qasm import Circuit, Gate, barrier, cx, invert, measure, sanitize, strip_measures, u

__all__ = [
    "CLASSES",
    "EXTERNAL_CLASSES",
    "generate",
    "mirror",
    "qubit_grid",
]

CLASSES = (
    "ghz",
    "wstate",
    "graphstate",
    "qft",
    "qftentangled",
    "qpeexact",
    "qpeinexact",
    "realamp",
    "su2rand",
    "random",
)

# Classes that exist in the benchmark protocol only as external QASM files.
EXTERNAL_CLASSES = ("ae", "qwalk", "qnn")

_DEFAULT_ANGLE_EPS = 1e-10


def _h(q: int) -> Gate:
    return u(math.pi / 2.0, 0.0, math.pi, q)


def _x(q: int) -> Gate:
    return u(math.pi, 0.0, math.pi, q)


def _ry(theta: float, q: int) -> Gate:
    return u(theta, 0.0, 0.0, q)


def _p(lam: float, q: int) -> Gate:
    return u(0.0, 0.0, lam, q)


def _cp(lam: float, control: int, target: int) -> list[Gate]:
    half = lam / 2.0
    return [
        _p(half, target),
        cx(control, target),
        _p(-half, target),
        cx(control, target),
        _p(half, control),
    ]


def _cz(a: int, b: int) -> list[Gate]:
    return [_h(b), cx(a, b), _h(b)]


def _swap(a: int, b: int) -> list[Gate]:
    return [cx(a, b), cx(b, a), cx(a, b)]


def _cry(theta: float, control: int, target: int) -> list[Gate]:
    half = theta / 2.0
    return [_ry(half, target), cx(control, target), _ry(-half, target), cx(control, target)]


def _ccx(a: int, b: int, c: int) -> list[Gate]:
    # textbook six-cx Toffoli; t = p(pi/4)
    t = math.pi / 4.0
    return [
        _h(c),
        cx(b, c),
        _p(-t, c),
        cx(a, c),
        _p(t, c),
        cx(b, c),
        _p(-t, c),
        cx(a, c),
        _p(t, b),
        _p(t, c),
        _h(c),
        cx(a, b),
        _p(t, a),
        _p(-t, b),
        cx(a, b),
    ]


def _ghz_gates(n: int) -> list[Gate]:
    return [_h(0)] + [cx(i, i + 1) for i in range(n - 1)]


def _wstate_gates(n: int) -> list[Gate]:
    # Linear amplitude-spreading chain: after step k the one-hot weight left on
    # qubit k is exactly 1/n, so the final state is uniform over one-hot strings.
    gates = [_x(0)]
    for k in range(n - 1):
        theta = 2.0 * math.acos(1.0 / math.sqrt(n - k))
        gates += _cry(theta, k, k + 1)
        gates.append(cx(k + 1, k))
    return gates


def _graphstate_gates(n: int, rng: np.random.Generator, degree: int) -> list[Gate]:
    d = min(degree, n - 1)
    while d > 0 and (n * d) % 2 == 1:
        d -= 1
    gates = [_h(q) for q in range(n)]
    if d > 0:
        graph = nx.random_regular_graph(d, n, seed=int(rng.integers(0, 2**31)))
        for a, b in sorted(tuple(sorted(e)) for e in graph.edges()):
            gates += _cz(a, b)
    return gates


def _qft_gates(qubits: list[int], angle_eps: float) -> list[Gate]:
    """Standard QFT on the given chain, controlled phases below angle_eps dropped."""
    gates: list[Gate] = []
    m = len(qubits)
    for i in range(m):
        gates.append(_h(qubits[i]))
        for j in range(i + 1, m):
            angle = math.pi / (1 << (j - i))
            if angle <= angle_eps:
                break
            gates += _cp(angle, qubits[j], qubits[i])
    for i in range(m // 2):
        gates += _swap(qubits[i], qubits[m - 1 - i])
    return gates


def _qpe_gates(n: int, rng: np.random.Generator, exact: bool, angle_eps: float) -> list[Gate]:
    # One state qubit (the last) and n-1 counting qubits.  The estimated phase
    # is a seeded binary fraction on n-1 bits; the inexact variant offsets it
    # by 2^-n so it is not representable by the counting register.
    state = n - 1
    counting = list(range(n - 1))
    bits = rng.integers(0, 2, size=n - 1)
    m = 0
    for b in bits:
        m = (m << 1) | int(b)
    if m == 0:
        m = 1
    if exact:
        num, den_bits = m, n - 1
    else:
        num, den_bits = 2 * m + 1, n
    gates = [_x(state)]
    gates += [_h(q) for q in counting]
    for j, q in enumerate(counting):
        # phase of the controlled power-of-two evolution, reduced exactly mod 2*pi
        frac = (num << j) % (1 << den_bits)
        angle = 2.0 * math.pi * frac / (1 << den_bits)
        if angle > angle_eps and (2.0 * math.pi - angle) > angle_eps:
            gates += _cp(angle, q, state)
    # counting qubit j kicks back phase 2^j, so the un-transform runs over the
    # reversed chain; the exact case then reads m off the counting register
    inverse_qft = invert(Circuit(n, gates=_qft_gates(list(reversed(counting)), angle_eps)))
    gates += inverse_qft.gates
    return gates


def _ansatz_gates(n: int, rng: np.random.Generator, reps: int, with_rz: bool) -> list[Gate]:
    gates: list[Gate] = []

    def rotation_layer() -> None:
        for q in range(n):
            gates.append(_ry(rng.uniform(-math.pi, math.pi), q))
            if with_rz:
                gates.append(_p(rng.uniform(-math.pi, math.pi), q))

    for _ in range(reps):
        rotation_layer()
        # reverse-linear cx ladder: unitarily identical to the all-to-all
        # cascade but with n-1 gates and bounded intermediate entanglement
        for i in reversed(range(n - 1)):
            gates.append(cx(i, i + 1))
    rotation_layer()
    return gates


def _haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def _perm_phase_block(qubits: list[int], rng: np.random.Generator) -> list[Gate]:
    """Random permutation-plus-phase block on 3 or 4 qubits, built from
    {x, cx, ccx} generators followed by single and pairwise phase gates."""
    k = len(qubits)
    gates: list[Gate] = []
    for _ in range(2 * k):
        pick = rng.integers(0, 3)
        chosen = [qubits[i] for i in rng.permutation(k)]
        if pick == 0:
            gates.append(_x(chosen[0]))
        elif pick == 1:
            gates.append(cx(chosen[0], chosen[1]))
        else:
            gates += _ccx(chosen[0], chosen[1], chosen[2])
    for q in qubits:
        gates.append(_p(rng.uniform(0.0, 2.0 * math.pi), q))
    for a, b in zip(qubits, qubits[1:]):
        gates += _cp(rng.uniform(0.0, 2.0 * math.pi), a, b)
    return gates


def _random_gates(n: int, rng: np.random.Generator) -> list[Gate]:
    # Random blocks on up to four qubits until the circuit is twice as deep as
    # it is wide.  Depth is counted in block units, the native gate granularity
    # of the circuit; the u/cx decomposition below only deepens it further.
    gates: list[Gate] = []
    level = [0] * n
    while max(level) < 2 * n:
        order = [int(q) for q in rng.permutation(n)]
        pos = 0
        while pos < n:
            k = min(int(rng.integers(1, 5)), n - pos)
            block = order[pos : pos + k]
            pos += k
            if k == 1:
                gates += synth.one_qubit_gates(_haar_unitary(2, rng), block[0])
            elif k == 2:
                gates += synth.two_qubit_gates(_haar_unitary(4, rng), block[0], block[1])
            else:
                gates += _perm_phase_block(block, rng)
            depth = 1 + max(level[q] for q in block)
            for q in block:
                level[q] = depth
    return gates


_MIN_QUBITS = {name: 2 for name in CLASSES}


def generate(
    name: str,
    n: int,
    seed: int,
    *,
    reps: int = 3,
    graph_degree: int = 3,
    angle_eps: float = _DEFAULT_ANGLE_EPS,
) -> Circuit:
    """Build one benchmark circuit instance.

    The result is deterministic in (name, n, seed): identical arguments give a
    byte-identical serialization.  ``reps`` controls the ansatz depth of the
    realamp/su2rand families and ``graph_degree`` the regular-graph degree of
    graphstate.
    """
    if name not in CLASSES:
        raise ValueError(f"unsupported circuit class {name!r} (native classes: {', '.join(CLASSES)})")
    if n < _MIN_QUBITS[name]:
        raise ValueError(f"class {name!r} requires at least {_MIN_QUBITS[name]} qubits")
    rng = np.random.default_rng([CLASSES.index(name), n, seed & (2**64 - 1)])
    if name == "ghz":
        gates = _ghz_gates(n)
    elif name == "wstate":
        gates = _wstate_gates(n)
    elif name == "graphstate":
        gates = _graphstate_gates(n, rng, graph_degree)
    elif name == "qft":
        gates = _qft_gates(list(range(n)), angle_eps)
    elif name == "qftentangled":
        gates = _ghz_gates(n) + _qft_gates(list(range(n)), angle_eps)
    elif name == "qpeexact":
        gates = _qpe_gates(n, rng, True, angle_eps)
    elif name == "qpeinexact":
        gates = _qpe_gates(n, rng, False, angle_eps)
    elif name == "realamp":
        gates = _ansatz_gates(n, rng, reps, with_rz=False)
    elif name == "su2rand":
        gates = _ansatz_gates(n, rng, reps, with_rz=True)
    else:
        gates = _random_gates(n, rng)
    circuit = sanitize(Circuit(n_qubits=n, gates=gates, name=name, seed=seed), angle_eps)
    circuit.n_clbits = n
    circuit.gates.extend(measure(q, q) for q in range(n))
    return circuit


def mirror(circuit: Circuit) -> Circuit:
    """Forward circuit, a full-width barrier, the inverse, then measurements.

    Sampling the all-zeros outcome of the mirror estimates how faithfully an
    emulator executed the forward part; the barrier stops the inverse from
    being compiled away.
    """
    forward = strip_measures(circuit)
    gates = list(forward.gates)
    gates.append(barrier())
    gates.extend(invert(forward).gates)
    gates.extend(measure(q, q) for q in range(circuit.n_qubits))
    name = f"{circuit.name}_mirror" if circuit.name else "mirror"
    return Circuit(circuit.n_qubits, circuit.n_qubits, gates, name=name, seed=circuit.seed)


def qubit_grid(n_min: int, n_max: int) -> list[int]:
    """Quasi-logarithmic qubit sizes within [n_min, n_max].

    The base sequence 4, 6, 8, 12, 16, 24, ... alternates x1.5 and x4/3 steps
    and continues past 1024 with the same alternation.
    """
    if not 2 <= n_min <= n_max:
        raise ValueError("require 2 <= n_min <= n_max")
    sizes = []
    value, grow_half = 4, True
    while value <= n_max:
        if value >= n_min:
            sizes.append(value)
        value = value * 3 // 2 if grow_half else value * 4 // 3
        grow_half = not grow_half
    return sizes
