"""Dense statevector simulator used as the exactness oracle at small qubit counts.

Convention used throughout the repository: qubit 0 is the least significant
bit of an amplitude index, and bitstrings print qubit 0 leftmost.  So for
``n=3`` the bitstring ``"100"`` denotes qubit0=1, qubit1=0, qubit2=0 and maps
to amplitude index 1.
"""

from __future__ import annotations

import numpy as np

from .qasm import BARRIER, CX, MEASURE, U, Circuit

__all__ = [
    "DEFAULT_QUBIT_CAP",
    "StateVector",
    "sv_run",
    "sv_fidelity",
    "u_matrix",
    "index_to_bits",
    "bits_to_index",
]

DEFAULT_QUBIT_CAP = 22


def u_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """OpenQASM u-gate unitary: rows/cols ordered |0>, |1>."""
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def index_to_bits(index: int, n: int) -> str:
    """Amplitude index -> bitstring with qubit 0 printed leftmost."""
    return "".join("1" if (index >> q) & 1 else "0" for q in range(n))


def bits_to_index(bits: str) -> int:
    return sum(1 << q for q, b in enumerate(bits) if b == "1")


class StateVector:
    """2^n complex amplitudes in little-endian qubit order."""

    def __init__(self, n_qubits: int, amplitudes: np.ndarray | None = None):
        self.n_qubits = n_qubits
        if amplitudes is None:
            amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
            amplitudes[0] = 1.0
        self.amplitudes = amplitudes

    def amplitude(self, bits: str) -> complex:
        if len(bits) != self.n_qubits:
            raise ValueError("bitstring length does not match qubit count")
        return complex(self.amplitudes[bits_to_index(bits)])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _apply_u(amps: np.ndarray, mat: np.ndarray, q: int, n: int) -> np.ndarray:
    # Index i = high * 2^(q+1) + bit * 2^q + low; expose the target bit as axis 1.
    a = amps.reshape(1 << (n - q - 1), 2, 1 << q)
    out = np.einsum("ab,ibj->iaj", mat, a)
    return np.ascontiguousarray(out).reshape(-1)


def sv_run(circuit: Circuit, qubit_cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Simulate a circuit on |0...0>; measurements and barriers are ignored."""
    n = circuit.n_qubits
    if n > qubit_cap:
        raise ValueError(f"{n} qubits exceeds the dense-simulation cap of {qubit_cap}")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    for g in circuit.gates:
        if g.kind == U:
            amps = _apply_u(amps, u_matrix(*g.params), g.qubits[0], n)
        elif g.kind == CX:
            c, t = g.qubits
            # swap amplitude pairs that differ in the target bit, where control=1
            idx = np.arange(amps.size)
            flipped = idx ^ (((idx >> c) & 1) << t)
            amps = amps[flipped]
        elif g.kind in (BARRIER, MEASURE):
            continue
    return StateVector(n, amps)


def sv_fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2, the squared overlap of two pure states."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("statevector size mismatch")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
