import numpy as np
import pytest

from mpsbench.circuits import CLASSES, generate


def close_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """True when two vectors/matrices agree after removing one global phase."""
    a = np.asarray(a)
    b = np.asarray(b)
    k = np.argmax(np.abs(b))
    if abs(b.flat[k]) < 1e-300:
        return bool(np.max(np.abs(a)) <= tol)
    phase = a.flat[k] / b.flat[k]
    return bool(np.max(np.abs(a - phase * b)) <= tol)


@pytest.fixture(scope="session")
def small_corpus():
    """One small instance of every native class, reused across test modules."""
    return [generate(name, 6, seed=11) for name in CLASSES]


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def test_bit_conventions_are_shared():
    """Qubit 0 is the least significant bit everywhere; bitstrings print it leftmost."""
    from mpsbench.statevector import bits_to_index, index_to_bits

    assert index_to_bits(1, 3) == "100"
    assert index_to_bits(4, 3) == "001"
    assert bits_to_index("100") == 1
    assert bits_to_index("011") == 6
