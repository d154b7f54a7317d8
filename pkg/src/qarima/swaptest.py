"""Swap-test primitives.

State preparation for the compact two-register encoding, cosine estimation
via a register swap test, a scaled dot product from the compact circuit,
phase-corrected cosine blending, and binary entropy.  These feed every
quantum-augmented loss in the fitting stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qsim import Gate, QuantumState, apply_circuit, init_amplitudes, measure_qubit

_EPS_NORM = 1e-12


class SwapTestError(ValueError):
    pass


@dataclass(frozen=True)
class PreparedPair:
    """Norm-ratio register phi, interleaved register psi, and source norms.

    phi = [|x|/sqrt(Z), -|theta|/sqrt(Z)] with Z = |x|^2 + |theta|^2.
    psi interleaves x_i/(|x| sqrt(2)) and theta_i/(|theta| sqrt(2)).
    Zero-norm inputs collapse to the default states [1,0], [1,0].
    """

    phi: np.ndarray
    psi: np.ndarray
    source_norms: tuple[float, float]


@dataclass(frozen=True)
class SwapEstimate:
    cosine: float
    p0: float
    entropy: float
    mode: str  # "analytic" or "shots(S,seed)"
    degenerate: bool = False


def _validate_pair(x, theta):
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.ndim != 1 or theta.ndim != 1:
        raise SwapTestError("inputs must be 1-D vectors")
    if x.shape != theta.shape:
        raise SwapTestError(f"length mismatch: {x.shape[0]} vs {theta.shape[0]}")
    if x.size < 1:
        raise SwapTestError("vectors must have length >= 1")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(theta))):
        raise SwapTestError("inputs must be finite")
    return x, theta


def prep_swaptest(x, theta) -> PreparedPair:
    """Build the compact-encoding registers for a vector pair."""
    x, theta = _validate_pair(x, theta)
    nx = float(np.linalg.norm(x))
    nt = float(np.linalg.norm(theta))
    if nx < _EPS_NORM or nt < _EPS_NORM:
        return PreparedPair(
            phi=np.array([1.0, 0.0]),
            psi=np.array([1.0, 0.0]),
            source_norms=(nx, nt),
        )
    z = nx * nx + nt * nt
    phi = np.array([nx, -nt]) / math.sqrt(z)
    psi = np.empty(2 * x.size)
    psi[0::2] = x / (nx * math.sqrt(2.0))
    psi[1::2] = theta / (nt * math.sqrt(2.0))
    return PreparedPair(phi=phi, psi=psi, source_norms=(nx, nt))


def _pad_pow2(v: np.ndarray) -> np.ndarray:
    """Zero-pad to the next power of two (at least one qubit's worth)."""
    n = v.size
    m = max(2, 1 << max(0, (n - 1).bit_length()))
    if m == n:
        return v
    out = np.zeros(m)
    out[:n] = v
    return out


def _register_swap_circuit(a: np.ndarray, b: np.ndarray) -> float:
    """p0 of the control qubit for a swap test between unit vectors a and b.

    Layout: qubit 0 is the control, qubits 1..k hold a, qubits k+1..2k hold b.
    One CSWAP per qubit pair between H gates on the control.
    """
    a = _pad_pow2(a)
    b = _pad_pow2(b)
    if a.size < b.size:
        a = np.pad(a, (0, b.size - a.size))
    elif b.size < a.size:
        b = np.pad(b, (0, a.size - b.size))
    k = max(1, int(math.log2(a.size)))
    n = 1 + 2 * k
    state = QuantumState.zero(n)
    state = init_amplitudes(a, list(range(1, 1 + k)), state)
    state = init_amplitudes(b, list(range(1 + k, 1 + 2 * k)), state)
    gates = [Gate("H", (0,))]
    gates += [Gate("CSWAP", (0, 1 + i, 1 + k + i)) for i in range(k)]
    gates.append(Gate("H", (0,)))
    state = apply_circuit(state, gates)
    return state


def cosine_projection(x, theta, shots: int = 0, seed: int = 0) -> SwapEstimate:
    """Swap-test estimate of |cos(x, theta)|.

    Runs a register swap test between the two unit-normalized inputs; the
    control qubit's p0 is (1 + cos^2)/2, so cosine = sqrt(max(2 p0 - 1, 0)).
    Analytic mode equals the classical cosine magnitude to 1e-9.  Zero-norm
    inputs return cosine 0 with the degenerate flag set.
    """
    x, theta = _validate_pair(x, theta)
    nx = float(np.linalg.norm(x))
    nt = float(np.linalg.norm(theta))
    mode = "analytic" if shots == 0 else f"shots({shots},{seed})"
    if nx < _EPS_NORM or nt < _EPS_NORM:
        return SwapEstimate(
            cosine=0.0, p0=1.0, entropy=0.0, mode=mode, degenerate=True
        )
    state = _register_swap_circuit(x / nx, theta / nt)
    res = measure_qubit(state, 0, shots=shots, seed=seed)
    cosine = math.sqrt(max(2.0 * res.p0 - 1.0, 0.0))
    return SwapEstimate(
        cosine=cosine,
        p0=res.p0,
        entropy=binary_entropy(res.p0),
        mode=mode,
    )


def analytic_swap_cosine(x, theta) -> float:
    """Closed form of cosine_projection in analytic mode: |cos(x, theta)|.

    The register swap test's exact p0 is (1 + cos^2)/2, so the analytic
    estimate is the plain cosine magnitude.  Tests pin this identity against
    the circuit; the fitting loops use this form for speed.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    nx = np.linalg.norm(x)
    nt = np.linalg.norm(theta)
    if nx < _EPS_NORM or nt < _EPS_NORM:
        return 0.0
    return float(abs(np.dot(x, theta) / (nx * nt)))


def scaled_dot(x, theta, shots: int = 0, seed: int = 0, variant: str = "compact") -> float:
    """Norm-scaled dot-product magnitude from a swap-test circuit.

    The default ``compact`` variant prepares the phi/psi registers, applies
    X then H to the control, one controlled swap between the control's
    companion registers, and evaluates P_swap = 1 - 2 p0 + p1, returning
    |x| |theta| sqrt(max(P_swap, 0)).  The ``standard`` variant instead runs
    the register swap test on the unit vectors and uses P = 2 p0 - 1, which
    recovers |x.theta| exactly in analytic mode.
    """
    x, theta = _validate_pair(x, theta)
    nx = float(np.linalg.norm(x))
    nt = float(np.linalg.norm(theta))
    if nx < _EPS_NORM or nt < _EPS_NORM:
        return 0.0
    if variant == "standard":
        est = cosine_projection(x, theta, shots=shots, seed=seed)
        return nx * nt * est.cosine
    if variant != "compact":
        raise SwapTestError(f"unknown scaled_dot variant {variant!r}")

    pair = prep_swaptest(x, theta)
    psi = _pad_pow2(pair.psi)
    k = max(1, int(math.log2(psi.size)))
    n = 1 + 1 + k  # control, phi qubit, psi register
    state = QuantumState.zero(n)
    state = init_amplitudes(pair.phi, [1], state)
    state = init_amplitudes(psi, list(range(2, 2 + k)), state)
    gates = [
        Gate("X", (0,)),
        Gate("H", (0,)),
        Gate("CSWAP", (0, 1, 2)),
        Gate("H", (0,)),
    ]
    state = apply_circuit(state, gates)
    res = measure_qubit(state, 0, shots=shots, seed=seed)
    p_swap = 1.0 - 2.0 * res.p0 + res.p1
    return nx * nt * math.sqrt(max(p_swap, 0.0))


def phase_corrected_cosine(cos_dot: float, cos_swap: float, omega: float):
    """Blend classical and swap-test angles: cos(th_swap + w (th_dot - th_swap)).

    Returns (cos_corr, theta_dot, theta_swap, delta, theta_corr).  Inputs are
    clipped to [-1, 1] first, so the function is total.
    """
    if not math.isfinite(omega):
        raise SwapTestError("omega must be finite")
    cd = min(max(float(cos_dot), -1.0), 1.0)
    cs = min(max(float(cos_swap), -1.0), 1.0)
    theta_dot = math.acos(cd)
    theta_swap = math.acos(cs)
    delta = theta_dot - theta_swap
    theta_corr = theta_swap + omega * delta
    return math.cos(theta_corr), theta_dot, theta_swap, delta, theta_corr


def binary_entropy(p: float) -> float:
    """H(p) = -p log2 p - (1-p) log2(1-p), with 0 log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise SwapTestError(f"p={p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def binary_entropy_vec(p: np.ndarray) -> np.ndarray:
    """Elementwise binary entropy for arrays, same conventions as the scalar."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise SwapTestError("entries outside [0, 1]")
    out = np.zeros_like(p)
    inner = (p > 0) & (p < 1)
    q = p[inner]
    out[inner] = -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q)
    return out
