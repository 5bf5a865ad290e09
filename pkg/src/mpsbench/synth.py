"""Re-synthesis of one- and two-qubit unitary blocks into u/cx gate sequences.

Matrix convention for a two-qubit block on qubits (qa, qb): row/column index
is ``2 * bit(qa) + bit(qb)``.  All synthesis is exact up to a global phase,
which the circuit-level consumers (fusion, generators) do not care about.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.linalg import cossin, schur

from .qasm import Gate, U, cx, u
from .statevector import u_matrix

__all__ = ["zyz_angles", "one_qubit_gates", "two_qubit_gates", "merge_u_runs", "is_identity_up_to_phase"]

_ID_TOL = 1e-12


def is_identity_up_to_phase(mat: np.ndarray, tol: float = 1e-9) -> bool:
    k = mat.shape[0]
    tr = np.trace(mat)
    if abs(tr) < k * (1.0 - tol):
        return False
    phase = tr / abs(tr)
    return bool(np.max(np.abs(mat - phase * np.eye(k))) <= tol)


def zyz_angles(mat: np.ndarray) -> tuple[float, float, float]:
    """Angles (theta, phi, lam) with ``mat = exp(i*alpha) * u_matrix(theta, phi, lam)``.

    Works for any 2x2 unitary; the global phase alpha is discarded.  Phase
    extraction only trusts entries of non-negligible magnitude: the phases of
    entries near the floating-point noise floor are meaningless and must never
    reach a matrix element of order one in the reconstruction.
    """
    a, b = complex(mat[0, 0]), complex(mat[0, 1])
    c = complex(mat[1, 0])
    d = complex(mat[1, 1])
    theta = 2.0 * math.atan2(abs(c), abs(a))
    if abs(a) >= abs(c):
        alpha = cmath.phase(a)
        if abs(c) <= _ID_TOL:  # effectively diagonal
            return theta, 0.0, cmath.phase(d) - alpha
        phi = cmath.phase(c) - alpha
        # tying lam to the dominant diagonal keeps the (1,1) entry exact even
        # when the antidiagonal magnitudes sit close to the noise floor
        return theta, phi, (cmath.phase(d) - alpha) - phi
    # antidiagonal-dominant: a garbage alpha cancels out of the big entries
    alpha = cmath.phase(a) if abs(a) > _ID_TOL else 0.0
    return theta, cmath.phase(c) - alpha, cmath.phase(-b) - alpha


def one_qubit_gates(mat: np.ndarray, qubit: int) -> list[Gate]:
    """u-gate sequence (empty or singleton) realizing a 2x2 unitary up to phase."""
    if is_identity_up_to_phase(mat, _ID_TOL):
        return []
    return [u(*zyz_angles(mat), qubit)]


def merge_u_runs(gates: list[Gate]) -> list[Gate]:
    """Peephole pass: fold consecutive u gates on the same qubit into one.

    Gates of other kinds flush the pending matrix for every qubit they touch.
    Runs that multiply to the identity (up to phase) are dropped entirely.
    """
    out: list[Gate] = []
    pending: dict[int, np.ndarray] = {}

    def flush(q: int) -> None:
        mat = pending.pop(q, None)
        if mat is not None:
            out.extend(one_qubit_gates(mat, q))

    for g in gates:
        if g.kind == U:
            q = g.qubits[0]
            mat = u_matrix(*g.params)
            pending[q] = mat @ pending[q] if q in pending else mat
        else:
            if g.qubits:
                for q in g.qubits:
                    flush(q)
            else:  # barrier fences everything
                for q in sorted(pending):
                    flush(q)
            out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def _demultiplex(block0: np.ndarray, block1: np.ndarray, select: int, target: int) -> list[Gate]:
    """Circuit for ``|0><0|_select (x) block0 + |1><1|_select (x) block1``.

    Uses the eigendecomposition block0 @ block1^dag = V diag(D^2) V^dag, giving
    (I (x) V) . (D (+) D^dag) . (I (x) W) with W = D^dag V^dag block0; the
    diagonal middle factor costs two cx gates.
    """
    x = block0 @ block1.conj().T
    t_mat, v = schur(x, output="complex")  # unitary v even for degenerate spectra
    delta = np.angle(np.diagonal(t_mat)) / 2.0
    d = np.exp(1j * delta)
    w = (d.conj()[:, None] * v.conj().T) @ block0
    p = (delta[0] + delta[1]) / 2.0
    m = (delta[0] - delta[1]) / 2.0
    gates = one_qubit_gates(w, target)
    gates += [cx(select, target), u(0.0, 0.0, -2.0 * m, target), cx(select, target)]
    gates.append(u(0.0, 0.0, -2.0 * p, select))
    gates += one_qubit_gates(v, target)
    return gates


def two_qubit_gates(mat: np.ndarray, qa: int, qb: int) -> list[Gate]:
    """u/cx sequence realizing a 4x4 unitary on (qa, qb) up to global phase.

    Quantum-Shannon-style synthesis: a cosine-sine decomposition splits the
    block into two single-qubit multiplexors around a multiplexed Y rotation,
    each costing two cx gates (six cx total before peephole cleanup).
    """
    if is_identity_up_to_phase(mat, _ID_TOL):
        return []
    left, cs, right = cossin(mat, p=2, q=2)
    gates = _demultiplex(right[0:2, 0:2], right[2:4, 2:4], qa, qb)
    # cs = [[C, -S], [S, C]] is RY(2*theta_b) on qa selected by the qb value b
    alpha = 2.0 * np.arctan2(np.diagonal(cs[2:4, 0:2]), np.diagonal(cs[0:2, 0:2]))
    gates.append(u((alpha[0] + alpha[1]) / 2.0, 0.0, 0.0, qa))
    gates.append(cx(qb, qa))
    gates.append(u((alpha[0] - alpha[1]) / 2.0, 0.0, 0.0, qa))
    gates.append(cx(qb, qa))
    gates += _demultiplex(left[0:2, 0:2], left[2:4, 2:4], qa, qb)
    return merge_u_runs(gates)
