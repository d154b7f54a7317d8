"""Quantum-augmented AR estimation.

The AR loss blends a squared prediction error built from phase-corrected
cosines with a cosine-misalignment penalty and a binary-entropy term.  Order
and coefficients are selected by derivative-free refinement from an OLS warm
start, then optionally extended with weak lags whose coefficients are
refined under adaptive deviation/magnitude penalties while the anchor block
stays frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import optimizer as opt
from .series import DelayMatrix, TimeSeries, build_delay_matrix, generate_differences
from .swaptest import binary_entropy_vec, cosine_projection

_DEGENERATE_NORM = 1e-10


class ARModelError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Penalty weights shared by the quantum-augmented losses.

    lambda_dev / lambda_mag default to the adaptive rule 1e-3 * L_base and
    5e-4 * L_base when left as None.  tau_norm None means sqrt(q) at the
    point of use.
    """

    lambda_cos: float = 0.0
    lambda_ent: float = 0.0
    lambda_l2: float = 0.0
    omega: float = 1.0
    lambda_dev: float | None = None
    lambda_mag: float | None = None
    tau_norm: float | None = None

    def adaptive(self, l_base: float) -> tuple[float, float]:
        dev = self.lambda_dev if self.lambda_dev is not None else 1e-3 * l_base
        mag = self.lambda_mag if self.lambda_mag is not None else 5e-4 * l_base
        return dev, mag


@dataclass(frozen=True)
class VqcConfig:
    reps: int = 2
    qubits: int = 0
    coeff_map: str = "identity"
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise ARModelError("reps must be >= 1")
        if self.coeff_map not in {"identity", "bloch_angle"}:
            raise ARModelError(f"unknown coeff_map {self.coeff_map!r}")


@dataclass(frozen=True)
class ARFit:
    p: int
    b: np.ndarray
    loss: float
    residual_mean: float
    residual_std: float
    residuals: np.ndarray


@dataclass(frozen=True)
class OlsInit:
    b: np.ndarray
    ridge_fallback: bool


def _swap_cosines(X: np.ndarray, b: np.ndarray, cos_dot: np.ndarray,
                  shots: int, seed: int) -> np.ndarray:
    """Signed swap-test cosine per row.

    Analytic mode: the register swap test returns |cos| exactly and the
    classical sign is attached, so the result equals cos_dot.  Shot mode
    runs the circuit per row with a derived seed.
    """
    if shots == 0:
        return cos_dot
    out = np.empty(X.shape[0])
    for t in range(X.shape[0]):
        est = cosine_projection(X[t], b, shots=shots, seed=seed + t)
        out[t] = math.copysign(est.cosine, cos_dot[t]) if cos_dot[t] != 0 else est.cosine
    return out


def ar_loss(X: DelayMatrix | np.ndarray, y, b, w: LossWeights,
            cfg: VqcConfig = VqcConfig()) -> float:
    """Total AR loss: squared error + cosine misalignment + entropy terms.

    With omega = 1 and zero penalties in analytic mode this is exactly the
    classical sum of squared errors, because the signed swap cosine equals
    the dot cosine and the phase blend becomes the identity.
    """
    Xm = X.regressors if isinstance(X, DelayMatrix) else np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    if Xm.shape[1] != b.size or Xm.shape[0] != y.size:
        raise ARModelError("dimension mismatch between design, targets and b")

    nb = float(np.linalg.norm(b))
    nx = np.linalg.norm(Xm, axis=1)
    if nb < _DEGENERATE_NORM:
        # zero-direction coefficients: prediction collapses to 0
        sse = float(np.sum(y * y))
        return sse

    denom = nx * nb
    cos_dot = np.zeros(y.size)
    ok = denom > _DEGENERATE_NORM
    cos_dot[ok] = (Xm[ok] @ b) / denom[ok]
    cos_dot = np.clip(cos_dot, -1.0, 1.0)

    cos_swap = np.clip(
        _swap_cosines(Xm, b, cos_dot, cfg.shots, cfg.seed), -1.0, 1.0
    )
    if w.omega == 1.0:
        cos_corr = cos_dot
    elif cfg.shots == 0:
        cos_corr = cos_dot  # blend of identical angles
    else:
        th_dot = np.arccos(cos_dot)
        th_swap = np.arccos(cos_swap)
        cos_corr = np.cos(th_swap + w.omega * (th_dot - th_swap))

    pred = nx * nb * cos_corr
    loss = float(np.sum((y - pred) ** 2))
    if w.lambda_cos != 0.0:
        loss += w.lambda_cos * float(np.sum((cos_dot - cos_swap) ** 2))
    if w.lambda_ent != 0.0:
        p0 = np.clip(1.0 - cos_swap**2, 0.0, 1.0)
        loss += w.lambda_ent * float(np.sum(binary_entropy_vec(p0)))
    return loss


def ols_init(X: DelayMatrix | np.ndarray, y=None) -> OlsInit:
    """Least-squares warm start, falling back to a tiny ridge on rank loss."""
    if isinstance(X, DelayMatrix):
        Xm, y = X.regressors, X.targets
    else:
        Xm = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
    p = Xm.shape[1]
    if np.linalg.matrix_rank(Xm) < p:
        b = np.linalg.solve(Xm.T @ Xm + 1e-8 * np.eye(p), Xm.T @ y)
        return OlsInit(b=b, ridge_fallback=True)
    b, *_ = np.linalg.lstsq(Xm, y, rcond=None)
    return OlsInit(b=b, ridge_fallback=False)


def _fit_order(y_diff: np.ndarray, p: int, cfg: VqcConfig, w: LossWeights,
               t_max: int, seed: int) -> ARFit:
    dm = build_delay_matrix(y_diff, p)
    init = ols_init(dm)
    if t_max <= 0:
        b_star = init.b
    else:
        problem = opt.OptProblem(
            objective=lambda b: ar_loss(dm, dm.targets, b, w, cfg),
            x0=init.b,
            max_evals=max(t_max, p + 2),
        )
        b_star = opt.minimize(problem, seed=seed).x_star
    loss = ar_loss(dm, dm.targets, b_star, w, cfg)
    resid = dm.targets - dm.regressors @ b_star
    return ARFit(
        p=p,
        b=np.asarray(b_star, dtype=float),
        loss=loss,
        residual_mean=float(resid.mean()),
        residual_std=float(resid.std()),
        residuals=resid,
    )


@dataclass(frozen=True)
class ARSelection:
    p_star: int
    fits: dict[int, ARFit] = field(repr=False)

    @property
    def best(self) -> ARFit:
        return self.fits[self.p_star]

    def summary_rows(self):
        return [
            (p, fit.loss, fit.b, fit.residual_mean, fit.residual_std)
            for p, fit in sorted(self.fits.items())
        ]


def vqc_ar_estimate(y_diff, candidates, cfg: VqcConfig = VqcConfig(),
                    w: LossWeights = LossWeights(), t_max: int = 200,
                    seed: int = 0) -> ARSelection:
    """Fit each candidate order from an OLS warm start; lowest loss wins.

    Ties break toward the smaller order.  t_max <= 0 returns the warm start
    unchanged.
    """
    candidates = sorted(set(int(p) for p in candidates))
    if not candidates:
        raise ARModelError("candidate order set is empty")
    vals = y_diff.values if isinstance(y_diff, TimeSeries) else np.asarray(y_diff, dtype=float)
    for p in candidates:
        if p < 1 or p >= vals.size:
            raise ARModelError(f"order {p} invalid for series of length {vals.size}")
    fits = {p: _fit_order(vals, p, cfg, w, t_max, seed + p) for p in candidates}
    p_star = min(fits, key=lambda p: (fits[p].loss, p))
    return ARSelection(p_star=p_star, fits=fits)


def pool_weak_inits(selection: ARSelection, k: int) -> tuple[np.ndarray, bool]:
    """Candidate weak-lag magnitudes: pooled from non-winning orders,
    excluding magnitudes already among the winner's, k smallest kept.

    Returns (inits, reduced) where reduced flags an insufficient pool.
    """
    anchor_mags = np.abs(selection.best.b)
    pool = []
    for p, fit in selection.fits.items():
        if p == selection.p_star:
            continue
        for m in np.abs(fit.b):
            if not np.any(np.isclose(m, anchor_mags, atol=1e-12)):
                pool.append(float(m))
    pool = sorted(set(pool))
    reduced = len(pool) < k
    return np.array(pool[:k]), reduced


@dataclass(frozen=True)
class WeakRefineResult:
    p_prime: int
    b_full: np.ndarray
    loss: float
    lambda_dev: float
    lambda_mag: float
    k_used: int
    k_reduced: bool


def _weak_objective(dm: DelayMatrix, b_anchor: np.ndarray, w_init: np.ndarray,
                    lw: LossWeights, cfg: VqcConfig,
                    lam_dev: float, lam_mag: float):
    def objective(b_weak):
        b_weak = np.asarray(b_weak, dtype=float)
        b_full = np.concatenate([b_anchor, b_weak])
        return (
            ar_loss(dm, dm.targets, b_full, lw, cfg)
            + lam_dev * float(np.sum((b_weak - w_init) ** 2))
            + lam_mag * float(np.sum(np.abs(b_weak)))
        )

    return objective


def weak_lag_refine(y, d_star: int, selection: ARSelection, k: int,
                    cfg: VqcConfig = VqcConfig(), lw: LossWeights = LossWeights(),
                    t_max: int = 200, seed: int = 0) -> WeakRefineResult:
    """Extend the winning AR model by k weak lags and refine only those.

    The anchor coefficients are frozen; the weak block starts at the pooled
    candidate magnitudes and is penalized for drifting from them (L2) and
    for growing (L1), with weights scaled from the baseline loss.
    """
    if k < 1:
        raise ARModelError("weak count k must be >= 1")
    w_init, reduced = pool_weak_inits(selection, k)
    k_used = w_init.size
    if k_used == 0:
        raise ARModelError("no candidate weak-lag magnitudes available")
    b_anchor = selection.best.b
    p_prime = selection.p_star + k_used

    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    z = generate_differences(vals, d_star).levels[d_star] if d_star > 0 else vals
    dm = build_delay_matrix(z, p_prime)

    l_base = min(fit.loss for fit in selection.fits.values())
    lam_dev, lam_mag = lw.adaptive(l_base)
    objective = _weak_objective(dm, b_anchor, w_init, lw, cfg, lam_dev, lam_mag)
    problem = opt.OptProblem(
        objective=objective, x0=w_init.copy(), max_evals=max(t_max, k_used + 2)
    )
    res = opt.minimize(problem, seed=seed)
    b_full = np.concatenate([b_anchor, res.x_star])
    return WeakRefineResult(
        p_prime=p_prime,
        b_full=b_full,
        loss=float(objective(res.x_star)),
        lambda_dev=lam_dev,
        lambda_mag=lam_mag,
        k_used=k_used,
        k_reduced=reduced,
    )


def progressive_weak_refine(y, d_star: int, p_star: int, b_anchor,
                            w_inits, cfg: VqcConfig = VqcConfig(),
                            lw: LossWeights = LossWeights(), t_max: int = 200,
                            tau_stop: float = math.inf, seed: int = 0):
    """Add weak lags one at a time, refining each extended weak block.

    ``w_inits`` must already be ordered by decreasing absolute magnitude.
    Stops as soon as the step loss exceeds the anchor baseline by more than
    tau_stop.  Returns the recorded (p, b, loss) sequence.
    """
    b_anchor = np.asarray(b_anchor, dtype=float)
    w_inits = np.asarray(w_inits, dtype=float)
    if w_inits.size == 0:
        raise ARModelError("weak init list is empty")
    vals = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    z = generate_differences(vals, d_star).levels[d_star] if d_star > 0 else vals

    dm_base = build_delay_matrix(z, p_star)
    l_base = ar_loss(dm_base, dm_base.targets, b_anchor, lw, cfg)
    lam_dev, lam_mag = lw.adaptive(l_base)

    steps = []
    for j in range(1, w_inits.size + 1):
        p = p_star + j
        w_j = w_inits[:j]
        dm = build_delay_matrix(z, p)
        objective = _weak_objective(dm, b_anchor, w_j, lw, cfg, lam_dev, lam_mag)
        problem = opt.OptProblem(
            objective=objective, x0=w_j.copy(), max_evals=max(t_max, j + 2)
        )
        res = opt.minimize(problem, seed=seed + j)
        loss = float(objective(res.x_star))
        steps.append((p, np.concatenate([b_anchor, res.x_star]), loss))
        if loss - l_base > tau_stop:
            break
    return steps


def residual_eval(y_diff, fits) -> list[ARFit]:
    """Recompute residual statistics via the classical cosine prediction.

    The per-step prediction |b| |x_t| cos(theta_t) with the dot-product
    cosine reduces to x_t . b; a zero-direction b predicts 0.
    """
    vals = y_diff.values if isinstance(y_diff, TimeSeries) else np.asarray(y_diff, dtype=float)
    out = []
    for fit in fits:
        dm = build_delay_matrix(vals, fit.p)
        nb = float(np.linalg.norm(fit.b))
        pred = dm.regressors @ fit.b if nb >= _DEGENERATE_NORM else np.zeros(dm.targets.size)
        resid = dm.targets - pred
        out.append(
            replace(
                fit,
                residual_mean=float(resid.mean()),
                residual_std=float(resid.std()),
                residuals=resid,
            )
        )
    return out
