import math

import numpy as np
import pytest

from mpsbench.circuits import generate, mirror
from mpsbench.qasm import Circuit, cx, strip_measures, u
from mpsbench.statevector import StateVector, sv_fidelity, sv_run, u_matrix


def test_bell_state():
    amps = sv_run(generate("ghz", 2, seed=0)).amplitudes
    assert amps == pytest.approx(np.array([1, 0, 0, 1]) / math.sqrt(2), abs=1e-12)


def test_empty_circuit_is_basis_state():
    amps = sv_run(Circuit(3)).amplitudes
    expected = np.zeros(8)
    expected[0] = 1
    assert amps == pytest.approx(expected)


def test_cx_truth_table():
    # |10> (qubit0=1) -> |11>
    c = Circuit(2, gates=[u(math.pi, 0, math.pi, 0), cx(0, 1)])
    probs = sv_run(c).probabilities()
    assert probs[3] == pytest.approx(1.0, abs=1e-12)


def test_mirror_returns_to_zero(small_corpus):
    for circuit in small_corpus:
        amps = sv_run(mirror(circuit)).amplitudes
        assert abs(amps[0]) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_norm_preserved_per_gate():
    circuit = strip_measures(generate("su2rand", 6, seed=3))
    amps = None
    state = Circuit(6)
    for g in circuit.gates:
        state.gates.append(g)
    sv = sv_run(state)
    assert sv.norm() == pytest.approx(1.0, abs=1e-12)


def test_qubit_cap():
    with pytest.raises(ValueError):
        sv_run(Circuit(23))
    sv_run(Circuit(5), qubit_cap=5)


def test_fidelity_basics():
    x = sv_run(generate("qft", 4, seed=0))
    assert sv_fidelity(x, x) == pytest.approx(1.0)
    e0 = StateVector(2)
    e1 = StateVector(2, np.array([0, 1, 0, 0], dtype=complex))
    assert sv_fidelity(e0, e1) == 0.0
    with pytest.raises(ValueError):
        sv_fidelity(e0, StateVector(3))


def test_amplitude_lookup_uses_leftmost_qubit0():
    # X on qubit 0 of three qubits: state "100"
    c = Circuit(3, gates=[u(math.pi, 0, math.pi, 0)])
    sv = sv_run(c)
    assert abs(sv.amplitude("100")) == pytest.approx(1.0, abs=1e-12)
    assert abs(sv.amplitude("001")) == pytest.approx(0.0, abs=1e-12)


def test_u_matrix_unitary():
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = u_matrix(*rng.uniform(-10, 10, size=3))
        assert np.allclose(m @ m.conj().T, np.eye(2), atol=1e-12)
