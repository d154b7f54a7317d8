"""Minimal statevector simulator.

Supports amplitude encoding, the gate set {H, X, RY, CNOT, CSWAP}, exact
marginal probabilities and seeded shot sampling.  Qubit ordering is
little-endian: qubit 0 is the least-significant bit of the basis index.
States are immutable values; every operation returns a new state.

Shot sampling uses ``numpy.random.Generator`` seeded with PCG64, so
shot-mode results are bit-reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NORM_ATOL = 1e-9

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])

_GATE_ARITY = {"H": 1, "X": 1, "RY": 1, "CNOT": 2, "CSWAP": 3}


class SimulatorError(ValueError):
    """Raised for invalid states, gates or qubit indices."""


@dataclass(frozen=True)
class QuantumState:
    """Complex amplitude vector over ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise SimulatorError("num_qubits must be positive")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.num_qubits,):
            raise SimulatorError(
                f"expected {2**self.num_qubits} amplitudes, got {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise SimulatorError(f"state norm {norm} deviates from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, num_qubits: int) -> "QuantumState":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)


@dataclass(frozen=True)
class Gate:
    """A gate application: kind, optional RY angle, target qubit indices.

    ``qubits`` is ordered; for CNOT it is (control, target) and for CSWAP
    (control, swap-a, swap-b).
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in _GATE_ARITY:
            raise SimulatorError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        if len(qubits) != _GATE_ARITY[self.kind]:
            raise SimulatorError(
                f"{self.kind} expects {_GATE_ARITY[self.kind]} qubits, got {len(qubits)}"
            )
        if len(set(qubits)) != len(qubits):
            raise SimulatorError("gate qubit indices must be distinct")
        object.__setattr__(self, "qubits", qubits)

    def matrix(self) -> np.ndarray:
        """Dense unitary on the gate's own qubits (little-endian within the gate)."""
        if self.kind == "H":
            return _H.astype(complex)
        if self.kind == "X":
            return _X.astype(complex)
        if self.kind == "RY":
            c, s = np.cos(self.angle / 2.0), np.sin(self.angle / 2.0)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if self.kind == "CNOT":
            # qubits = (control, target)
            m = np.eye(4, dtype=complex)
            # basis index bit0 = control, bit1 = target
            m[[1, 3]] = m[[3, 1]]
            return m
        # CSWAP: qubits = (control, a, b); bit0=control, bit1=a, bit2=b
        m = np.eye(8, dtype=complex)
        m[[3, 5]] = m[[5, 3]]
        return m


@dataclass(frozen=True)
class MeasurementResult:
    """Z-basis measurement of one qubit; shots=0 denotes analytic mode."""

    p0: float
    p1: float
    shots: int
    seed: int

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1.0) > 1e-12:
            raise SimulatorError("p0 + p1 must equal 1")


def _check_qubits(state: QuantumState, qubits) -> None:
    for q in qubits:
        if not 0 <= q < state.num_qubits:
            raise SimulatorError(
                f"qubit index {q} out of range for {state.num_qubits}-qubit state"
            )


def init_amplitudes(values, target_qubits, state: QuantumState) -> QuantumState:
    """Encode a real unit vector onto ``target_qubits`` (currently in |0...0>).

    ``target_qubits[0]`` is the least-significant bit of the encoded index.
    Other qubits are untouched.
    """
    values = np.asarray(values, dtype=float)
    target_qubits = list(target_qubits)
    _check_qubits(state, target_qubits)
    if len(set(target_qubits)) != len(target_qubits):
        raise SimulatorError("target qubits must be distinct")
    if values.shape != (2 ** len(target_qubits),):
        raise SimulatorError(
            f"need {2 ** len(target_qubits)} values for {len(target_qubits)} qubits, "
            f"got {values.shape}"
        )
    if abs(np.linalg.norm(values) - 1.0) > NORM_ATOL:
        raise SimulatorError("values must have unit L2 norm")

    n = state.num_qubits
    tensor = state.amplitudes.reshape([2] * n)
    # numpy axis n-1-q corresponds to qubit q (little-endian)
    axes = [n - 1 - q for q in target_qubits]
    # verify the targets are in |0...0>: any amplitude with a target bit set must be 0
    for ax in axes:
        sel = np.take(tensor, 1, axis=ax)
        if np.any(np.abs(sel) > NORM_ATOL):
            raise SimulatorError("target qubits are not in the |0...0> state")

    new = np.zeros_like(tensor)
    rest = tensor
    for ax in sorted(axes, reverse=True):  # descending keeps indices valid
        rest = np.take(rest, 0, axis=ax)
    # rest is the amplitude block over the untouched qubits
    enc = values.reshape([2] * len(target_qubits))  # index order q_{k-1}...q_0
    # place enc onto the target axes of the new tensor
    it = np.ndindex(*([2] * len(target_qubits)))
    for bits in it:
        # bits follow enc's axis order: (q_last, ..., q_first)
        idx = [slice(None)] * n
        for bit, q in zip(bits[::-1], target_qubits):
            idx[n - 1 - q] = bit
        amp = enc[tuple(bits)]
        if amp != 0:
            new[tuple(idx)] = amp * rest
    return QuantumState(n, new.reshape(-1))


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    """Apply ``gate``'s unitary; norm is preserved."""
    _check_qubits(state, gate.qubits)
    n = state.num_qubits
    k = len(gate.qubits)
    tensor = state.amplitudes.reshape([2] * n)
    axes = [n - 1 - q for q in gate.qubits]
    moved = np.moveaxis(tensor, axes, range(k))
    # after moveaxis, axis i corresponds to gate qubit i; flatten so that
    # gate qubit 0 is the least-significant bit of the local index
    flat = moved.reshape(2**k, -1, order="F") if k > 1 else moved.reshape(2, -1)
    if k > 1:
        # build local index with qubit 0 as bit 0: axis order is (q0, q1, ...)
        # reshape with C order treats axis 0 as most significant, so permute
        local = moved.reshape([2] * k + [-1])
        perm = list(range(k))[::-1] + [k]
        flat = np.transpose(local, perm).reshape(2**k, -1)
    out = gate.matrix() @ flat
    if k > 1:
        local = out.reshape([2] * k + [-1])
        perm = list(range(k))[::-1] + [k]
        local = np.transpose(local, perm)
        moved_out = local.reshape(moved.shape)
    else:
        moved_out = out.reshape(moved.shape)
    result = np.moveaxis(moved_out, range(k), axes)
    return QuantumState(n, result.reshape(-1))


def apply_circuit(state: QuantumState, gates) -> QuantumState:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def marginal_p0(state: QuantumState, qubit: int) -> float:
    """Exact probability of measuring 0 on ``qubit``."""
    _check_qubits(state, [qubit])
    n = state.num_qubits
    tensor = np.abs(state.amplitudes.reshape([2] * n)) ** 2
    p0 = float(np.take(tensor, 0, axis=n - 1 - qubit).sum())
    return min(max(p0, 0.0), 1.0)


def measure_qubit(
    state: QuantumState, qubit: int, shots: int = 0, seed: int = 0
) -> MeasurementResult:
    """Measure one qubit in the Z basis.

    Analytic mode (shots=0) returns the exact marginal; shot mode returns
    empirical frequencies from seeded binomial sampling of that marginal.
    """
    if shots < 0:
        raise SimulatorError("shots must be nonnegative")
    p0 = marginal_p0(state, qubit)
    if shots == 0:
        return MeasurementResult(p0=p0, p1=1.0 - p0, shots=0, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    hits = int(rng.binomial(shots, p0))
    p0_hat = hits / shots
    return MeasurementResult(p0=p0_hat, p1=1.0 - p0_hat, shots=shots, seed=seed)


def expectation_z(state: QuantumState, qubit: int) -> float:
    """<Z> of one qubit: p0 - p1 of its exact marginal."""
    p0 = marginal_p0(state, qubit)
    return 2.0 * p0 - 1.0
