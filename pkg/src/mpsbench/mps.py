"""Matrix-product-state circuit emulator with bounded bond dimension.

The state is kept in mixed-canonical form with a moving orthogonality center,
so every two-site SVD truncation is locally optimal.  Non-adjacent two-qubit
gates travel through a swap network of truncating two-site operations; with
``swap_split`` enabled the return swaps are elided and the logical-to-chain
mapping (``qubit_order``) is updated instead.

Chain/bit conventions: ``qubit_order[logical] = chain position``.  A two-site
block matrix on chain sites (p, p+1) is indexed ``2*bit(site p) + bit(site p+1)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import synth
from .qasm import BARRIER, CX, MEASURE, U, Circuit, Gate, sanitize
from .statevector import u_matrix

__all__ = [
    "MpsConfig",
    "MpsState",
    "RunResult",
    "TruncationReport",
    "new_zero_state",
    "apply_gate",
    "run",
    "sample",
    "amplitude",
    "to_dense",
    "fuse_ops",
    "fuse_pass",
    "permute_pass",
]

_CX_CT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
_CX_TC = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=np.complex128)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


@dataclass(frozen=True)
class MpsConfig:
    """Convergence and method hyperparameters of the emulator."""

    bond_dimension: int = 64
    cutoff: float = 1e-10  # relative to the largest singular value at the cut
    fuse: bool = False
    permute: bool = False
    swap_split: bool = True
    rng_seed: int = 0

    def validate(self) -> None:
        if self.bond_dimension < 1:
            raise ValueError("bond_dimension must be >= 1")
        if not 0.0 <= self.cutoff < 1.0:
            raise ValueError("cutoff must lie in [0, 1)")


@dataclass(frozen=True)
class TruncationReport:
    discarded_weight: float
    new_bond: int


@dataclass
class RunResult:
    samples: list[str]
    fidelity_estimate: float
    peak_bond: int
    wall_time: float
    gate_count_applied: int
    timed_out: bool
    state: "MpsState | None" = None  # final chain, for amplitude diagnostics


class MpsState:
    """Chain of rank-3 site tensors (left bond, physical, right bond)."""

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        self.n_qubits = n_qubits
        t = np.zeros((1, 2, 1), dtype=np.complex128)
        t[0, 0, 0] = 1.0
        self.tensors: list[np.ndarray] = [t.copy() for _ in range(n_qubits)]
        self.center = 0
        self.fidelity_estimate = 1.0
        self.qubit_order: list[int] = list(range(n_qubits))
        self.peak_bond = 1

    def bond_profile(self) -> list[int]:
        return [self.tensors[i].shape[2] for i in range(self.n_qubits - 1)]

    def norm(self) -> float:
        env = np.ones((1, 1), dtype=np.complex128)
        for t in self.tensors:
            env = np.einsum("ab,asi,bsj->ij", env, t.conj(), t)
        return float(np.sqrt(abs(env[0, 0])))

    def positions(self) -> list[int]:
        """Inverse of qubit_order: logical qubit stored at each chain position."""
        inv = [0] * self.n_qubits
        for logical, pos in enumerate(self.qubit_order):
            inv[pos] = logical
        return inv


def new_zero_state(n: int) -> MpsState:
    """Product state |0...0> with all bonds equal to one."""
    return MpsState(n)


def _svd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # gesdd occasionally fails on ill-conditioned cuts; gesvd is the slow, robust fallback
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _move_center_right(state: MpsState) -> None:
    i = state.center
    t = state.tensors[i]
    dl, _, dr = t.shape
    q, r = np.linalg.qr(t.reshape(dl * 2, dr))
    state.tensors[i] = q.reshape(dl, 2, -1)
    state.tensors[i + 1] = np.tensordot(r, state.tensors[i + 1], axes=(1, 0))
    state.center = i + 1


def _move_center_left(state: MpsState) -> None:
    i = state.center
    t = state.tensors[i]
    dl, _, dr = t.shape
    q, r = np.linalg.qr(t.reshape(dl, 2 * dr).conj().T)
    state.tensors[i] = q.conj().T.reshape(-1, 2, dr)
    state.tensors[i - 1] = np.tensordot(state.tensors[i - 1], r.conj().T, axes=(2, 0))
    state.center = i - 1


def _move_center_to(state: MpsState, pos: int) -> None:
    while state.center < pos:
        _move_center_right(state)
    while state.center > pos:
        _move_center_left(state)


def _apply_one_site(state: MpsState, pos: int, mat: np.ndarray) -> None:
    t = state.tensors[pos]
    state.tensors[pos] = np.tensordot(mat, t, axes=(1, 1)).transpose(1, 0, 2)


def _apply_two_site(
    state: MpsState,
    pos: int,
    mat: np.ndarray,
    chi: int,
    cutoff: float,
    absorb_right: bool,
) -> tuple[float, int]:
    """Apply a 4x4 unitary on chain sites (pos, pos+1) with SVD truncation.

    Returns (retained weight fraction, new bond dimension).  The orthogonality
    center ends on the site indicated by ``absorb_right``.
    """
    if state.center < pos:
        _move_center_to(state, pos)
    elif state.center > pos + 1:
        _move_center_to(state, pos + 1)
    left, right = state.tensors[pos], state.tensors[pos + 1]
    dl, dr = left.shape[0], right.shape[2]
    theta = np.tensordot(left, right, axes=(2, 0))  # (dl, a, b, dr)
    gate = mat.reshape(2, 2, 2, 2)  # (a_out, b_out, a_in, b_in)
    theta = np.tensordot(theta, gate, axes=([1, 2], [2, 3])).transpose(0, 2, 3, 1)
    u_mat, s, vh = _svd(theta.reshape(dl * 2, 2 * dr))
    total = float(s @ s)
    keep = int(np.searchsorted(-s, -cutoff * s[0], side="right")) if cutoff > 0.0 else s.size
    keep = min(keep, chi, int(np.count_nonzero(s)) or 1)
    keep = max(keep, 1)
    kept = s[:keep]
    retained = float(kept @ kept) / total
    state.fidelity_estimate *= retained
    kept = kept / np.sqrt(float(kept @ kept))
    if absorb_right:
        state.tensors[pos] = u_mat[:, :keep].reshape(dl, 2, keep)
        state.tensors[pos + 1] = (kept[:, None] * vh[:keep]).reshape(keep, 2, dr)
        state.center = pos + 1
    else:
        state.tensors[pos] = (u_mat[:, :keep] * kept[None, :]).reshape(dl, 2, keep)
        state.tensors[pos + 1] = vh[:keep].reshape(keep, 2, dr)
        state.center = pos
    assert keep <= chi
    if keep > state.peak_bond:
        state.peak_bond = keep
    return retained, keep


def _swap_sites(state: MpsState, pos: int, chi: int, cutoff: float, absorb_right: bool) -> float:
    retained, _ = _apply_two_site(state, pos, _SWAP, chi, cutoff, absorb_right)
    inv = state.positions()
    la, lb = inv[pos], inv[pos + 1]
    state.qubit_order[la], state.qubit_order[lb] = pos + 1, pos
    return retained


def _apply_block(state: MpsState, qubits: tuple[int, ...], mat: np.ndarray, config: MpsConfig) -> TruncationReport:
    """Apply a 1- or 2-qubit unitary block on logical qubits.

    For non-adjacent chain positions the first qubit is moved next to the
    second through truncating SWAP gates; with ``swap_split`` the moves are
    kept (order bookkeeping only), otherwise they are undone eagerly.
    """
    if len(qubits) == 1:
        _apply_one_site(state, state.qubit_order[qubits[0]], mat)
        return TruncationReport(0.0, 0)

    la, lb = qubits
    chi, cutoff = config.bond_dimension, config.cutoff
    retained_product = 1.0
    pa = state.qubit_order[la]
    pb = state.qubit_order[lb]
    moves: list[tuple[int, bool]] = []
    while abs(pa - pb) > 1:
        if pa < pb:
            retained_product *= _swap_sites(state, pa, chi, cutoff, True)
            moves.append((pa, True))
            pa += 1
        else:
            retained_product *= _swap_sites(state, pa - 1, chi, cutoff, False)
            moves.append((pa - 1, False))
            pa -= 1
    site_mat = mat if pa < pb else _flip_block(mat)
    retained, bond = _apply_two_site(state, min(pa, pb), site_mat, chi, cutoff, pa < pb)
    retained_product *= retained
    if not config.swap_split:
        for pos, went_right in reversed(moves):
            retained_product *= _swap_sites(state, pos, chi, cutoff, not went_right)
    return TruncationReport(1.0 - retained_product, bond)


_FLIP = np.array([0, 2, 1, 3])


def _flip_block(mat: np.ndarray) -> np.ndarray:
    """Reverse the qubit roles of a 4x4 block (conjugation by SWAP)."""
    return mat[np.ix_(_FLIP, _FLIP)]


def apply_gate(state: MpsState, gate: Gate, config: MpsConfig) -> TruncationReport:
    """Apply one circuit gate.  Barriers and measurements are no-ops here."""
    if gate.kind == U:
        return _apply_block(state, gate.qubits, u_matrix(*gate.params), config)
    if gate.kind == CX:
        return _apply_block(state, gate.qubits, _CX_CT, config)
    if gate.kind in (BARRIER, MEASURE):
        return TruncationReport(0.0, 0)
    raise ValueError(f"cannot apply gate kind {gate.kind!r}")


def amplitude(state: MpsState, bits: str) -> complex:
    """Amplitude of one computational basis state, qubit 0 leftmost in ``bits``."""
    if len(bits) != state.n_qubits:
        raise ValueError("bitstring length does not match qubit count")
    inv = state.positions()
    vec = np.ones(1, dtype=np.complex128)
    for pos in range(state.n_qubits):
        b = 1 if bits[inv[pos]] == "1" else 0
        vec = vec @ state.tensors[pos][:, b, :]
    return complex(vec[0])


def to_dense(state: MpsState, cap: int = 22) -> np.ndarray:
    """Full amplitude vector in the repository little-endian convention (tests/oracles)."""
    n = state.n_qubits
    if n > cap:
        raise ValueError("state too large to densify")
    acc = np.ones((1, 1), dtype=np.complex128)
    for t in state.tensors:
        acc = np.tensordot(acc, t, axes=(1, 0)).reshape(acc.shape[0] * 2, t.shape[2])
    arr = acc.reshape([2] * n)
    inv = state.positions()
    order = state.qubit_order
    perm = [order[n - 1 - axis] for axis in range(n)]
    return np.ascontiguousarray(arr.transpose(perm)).reshape(-1)


class _Sampler:
    """Sequential conditional sampler over a right-canonical chain."""

    def __init__(self, state: MpsState):
        _move_center_to(state, 0)
        self.state = state

    def draw(self, count: int, rng: np.random.Generator) -> list[str]:
        state = self.state
        n = state.n_qubits
        vec = np.ones((count, 1), dtype=np.complex128)
        bits = np.empty((count, n), dtype=np.uint8)
        for pos in range(n):
            t = state.tensors[pos]
            v0 = vec @ t[:, 0, :]
            v1 = vec @ t[:, 1, :]
            w0 = np.einsum("ij,ij->i", v0, v0.conj()).real
            w1 = np.einsum("ij,ij->i", v1, v1.conj()).real
            take1 = rng.random(count) * (w0 + w1) < w1
            bits[:, pos] = take1
            vec = np.where(take1[:, None], v1, v0)
            vec /= np.sqrt(np.where(take1, w1, w0))[:, None]
        logical = bits[:, np.asarray(state.qubit_order)]
        data = (logical + ord("0")).tobytes()
        return [data[i * n : (i + 1) * n].decode("ascii") for i in range(count)]


def sample(state: MpsState, shots: int, rng: np.random.Generator) -> list[str]:
    """Draw i.i.d. bitstrings; deterministic under a fixed generator state."""
    if shots <= 0:
        return []
    return _Sampler(state).draw(shots, rng)


_SAMPLE_CHUNK = 64


def run(circuit: Circuit, config: MpsConfig, shots: int = 1000, deadline: float | None = None) -> RunResult:
    """Execute a sanitized circuit and draw measurement samples.

    The deadline is cooperative: it is checked before every gate and between
    64-shot sampling chunks, so overshoot is bounded by one gate application.
    A deadline expiry is reported in the result, not raised.
    """
    config.validate()
    start = time.perf_counter()
    stop_at = None if deadline is None else start + deadline
    state = new_zero_state(circuit.n_qubits)
    if config.permute:
        state.qubit_order = permute_pass(circuit)

    if config.fuse:
        ops: list[tuple[tuple[int, ...], np.ndarray]] = fuse_ops(circuit)
    else:
        ops = []
        for g in circuit.gates:
            if g.kind == U:
                ops.append((g.qubits, u_matrix(*g.params)))
            elif g.kind == CX:
                ops.append((g.qubits, _CX_CT))

    applied = 0
    timed_out = False
    for qubits, mat in ops:
        if stop_at is not None and time.perf_counter() > stop_at:
            timed_out = True
            break
        _apply_block(state, qubits, mat, config)
        applied += 1

    samples: list[str] = []
    if not timed_out and shots > 0:
        rng = np.random.default_rng(config.rng_seed & (2**64 - 1))
        sampler = _Sampler(state)
        remaining = shots
        while remaining > 0:
            if stop_at is not None and time.perf_counter() > stop_at:
                timed_out = True
                break
            take = min(_SAMPLE_CHUNK, remaining)
            samples.extend(sampler.draw(take, rng))
            remaining -= take

    return RunResult(
        samples=samples,
        fidelity_estimate=state.fidelity_estimate,
        peak_bond=state.peak_bond,
        wall_time=time.perf_counter() - start,
        gate_count_applied=applied,
        timed_out=timed_out,
        state=state,
    )


# --- circuit pre-passes ------------------------------------------------------


def _embed_one(mat: np.ndarray, qubit: int, pair: tuple[int, int]) -> np.ndarray:
    eye = np.eye(2, dtype=np.complex128)
    return np.kron(mat, eye) if qubit == pair[0] else np.kron(eye, mat)


def _pair_matrix(gate_qubits: tuple[int, int], pair: tuple[int, int]) -> np.ndarray:
    return _CX_CT if gate_qubits == pair else _CX_TC


def fuse_ops(circuit: Circuit) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """Greedily merge gate runs on shared 1- or 2-qubit supports into unitary blocks.

    A gate joins the most recent block when that block is the last one touching
    every qubit of the gate and the union support stays within two qubits.
    Barriers fence merging; blocks that collapse to the identity are dropped.
    """
    blocks: list[list] = []  # [qubits tuple, matrix]
    last_block: dict[int, int] = {}

    def new_block(qubits: tuple[int, ...], mat: np.ndarray) -> None:
        blocks.append([qubits, mat])
        for q in qubits:
            last_block[q] = len(blocks) - 1

    for g in circuit.gates:
        if g.kind == BARRIER:
            last_block.clear()
            continue
        if g.kind == MEASURE:
            continue
        if g.kind == U:
            gate_qubits, mat = g.qubits, u_matrix(*g.params)
        else:
            gate_qubits, mat = g.qubits, None  # oriented on merge
        owners = {last_block[q] for q in gate_qubits if q in last_block}
        target = owners.pop() if len(owners) == 1 else -1
        if target >= 0:
            support = blocks[target][0]
            union = tuple(sorted(set(support) | set(gate_qubits)))
            if len(union) <= 2:
                if union != support:  # promote a 1q block into the pair
                    blocks[target][1] = _embed_one(blocks[target][1], support[0], union)
                    blocks[target][0] = union
                    for q in union:
                        last_block[q] = target
                if g.kind == CX:
                    gmat = _pair_matrix(gate_qubits, blocks[target][0])
                elif len(blocks[target][0]) == 2:
                    gmat = _embed_one(mat, gate_qubits[0], blocks[target][0])
                else:
                    gmat = mat
                blocks[target][1] = gmat @ blocks[target][1]
                continue
        if g.kind == CX:
            pair = tuple(sorted(gate_qubits))
            new_block(pair, _pair_matrix(gate_qubits, pair))
        else:
            new_block(gate_qubits, mat)

    out = []
    for qubits, mat in blocks:
        if not _is_identity_phase(mat):
            out.append((qubits, mat))
    return out


def _is_identity_phase(mat: np.ndarray, tol: float = 1e-12) -> bool:
    k = mat.shape[0]
    tr = np.trace(mat)
    if abs(tr) < k * (1.0 - tol):
        return False
    return bool(np.max(np.abs(mat - (tr / abs(tr)) * np.eye(k))) <= tol)


def fuse_pass(circuit: Circuit) -> Circuit:
    """Circuit-level gate fusion: merged blocks re-emitted as u/cx sequences.

    Statevector-equivalent to the input up to a global phase.  Barriers and
    measurements keep their relative positions.
    """
    gates: list[Gate] = []
    pending: list[Gate] = []

    def flush() -> None:
        nonlocal pending
        if pending:
            sub = Circuit(circuit.n_qubits, gates=pending)
            for qubits, mat in fuse_ops(sub):
                if len(qubits) == 1:
                    gates.extend(synth.one_qubit_gates(mat, qubits[0]))
                else:
                    gates.extend(synth.two_qubit_gates(mat, qubits[0], qubits[1]))
            pending = []

    for g in circuit.gates:
        if g.kind in (BARRIER, MEASURE):
            flush()
            gates.append(g)
        else:
            pending.append(g)
    flush()
    fused = Circuit(circuit.n_qubits, circuit.n_clbits, gates, name=circuit.name, seed=circuit.seed)
    return sanitize(fused, 0.0)


def permute_pass(circuit: Circuit) -> list[int]:
    """Chain ordering minimizing total cx distance, greedy + adjacent-swap descent.

    Returns ``order`` with ``order[logical] = chain position``.  The identity
    ordering is returned whenever it is at least as good as the heuristic one.
    """
    n = circuit.n_qubits
    weights: dict[tuple[int, int], int] = {}
    for g in circuit.gates:
        if g.kind == CX:
            a, b = sorted(g.qubits)
            weights[(a, b)] = weights.get((a, b), 0) + 1
    identity = list(range(n))
    if not weights:
        return identity

    adjacency: dict[int, dict[int, int]] = {q: {} for q in range(n)}
    for (a, b), w in weights.items():
        adjacency[a][b] = adjacency[a].get(b, 0) + w
        adjacency[b][a] = adjacency[b].get(a, 0) + w

    def cost(order: list[int]) -> int:
        return sum(w * abs(order[a] - order[b]) for (a, b), w in weights.items())

    # greedy chain growth from the heaviest edge, extending at whichever end
    # has the strongest connection to an unplaced qubit
    (a0, b0), _ = max(weights.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))
    chain = [a0, b0]
    placed = {a0, b0}
    while len(chain) < n:
        best = None  # (weight, -qubit, end)
        for end_idx, end in ((0, chain[0]), (1, chain[-1])):
            for q, w in adjacency[end].items():
                if q in placed:
                    continue
                key = (w, -q, end_idx)
                if best is None or key > best[0]:
                    best = (key, q, end_idx)
        if best is None:
            rest = [q for q in range(n) if q not in placed]
            chain.extend(rest)
            placed.update(rest)
            break
        _, q, end_idx = best
        if end_idx == 0:
            chain.insert(0, q)
        else:
            chain.append(q)
        placed.add(q)

    order = [0] * n
    for pos, q in enumerate(chain):
        order[q] = pos

    # adjacent-transposition descent
    for _ in range(2 * n):
        improved = False
        for pos in range(n - 1):
            qa, qb = chain[pos], chain[pos + 1]
            delta = 0
            for q, w in adjacency[qa].items():
                if q != qb:
                    delta += w * (abs(order[q] - (pos + 1)) - abs(order[q] - pos))
            for q, w in adjacency[qb].items():
                if q != qa:
                    delta += w * (abs(order[q] - pos) - abs(order[q] - (pos + 1)))
            if delta < 0:
                chain[pos], chain[pos + 1] = qb, qa
                order[qa], order[qb] = pos + 1, pos
                improved = True
        if not improved:
            break

    return identity if cost(identity) <= cost(order) else order
