"""Shared oracles: dense matrix simulation of gates and circuits.

These rebuild every unitary as an explicit 2^n x 2^n matrix (Kronecker
products and permutations) so the production simulator's sparse application
path can be checked elementwise against brute force.
"""

import numpy as np
import pytest


def dense_gate_matrix(kind: str, angle: float = 0.0) -> np.ndarray:
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    if kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "RY":
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "CNOT":
        m = np.eye(4, dtype=complex)
        m[[1, 3]] = m[[3, 1]]  # bit0 = control, bit1 = target
        return m
    if kind == "CSWAP":
        m = np.eye(8, dtype=complex)
        m[[3, 5]] = m[[5, 3]]  # bit0 = control, bits 1,2 swapped
        return m
    raise ValueError(kind)


def dense_full_unitary(kind: str, qubits, n: int, angle: float = 0.0) -> np.ndarray:
    """Embed a gate acting on ``qubits`` (little-endian) into n qubits."""
    g = dense_gate_matrix(kind, angle)
    k = len(qubits)
    dim = 2**n
    U = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        local_in = 0
        for pos, q in enumerate(qubits):
            local_in |= ((col >> q) & 1) << pos
        rest = col
        for q in qubits:
            rest &= ~(1 << q)
        for local_out in range(2**k):
            amp = g[local_out, local_in]
            if amp == 0:
                continue
            row = rest
            for pos, q in enumerate(qubits):
                row |= ((local_out >> pos) & 1) << q
            U[row, col] += amp
    return U


def dense_apply(amps: np.ndarray, kind: str, qubits, angle: float = 0.0) -> np.ndarray:
    n = int(np.log2(amps.size))
    return dense_full_unitary(kind, qubits, n, angle) @ amps


def dense_embed(values: np.ndarray, target_qubits, n: int) -> np.ndarray:
    """State with ``values`` on target_qubits (little-endian) and |0> elsewhere."""
    amps = np.zeros(2**n, dtype=complex)
    for local, v in enumerate(values):
        if v == 0:
            continue
        idx = 0
        for pos, q in enumerate(target_qubits):
            idx |= ((local >> pos) & 1) << q
        amps[idx] = v
    return amps


def dense_p0(amps: np.ndarray, qubit: int) -> float:
    mask = 1 << qubit
    return float(sum(abs(a) ** 2 for i, a in enumerate(amps) if not i & mask))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
