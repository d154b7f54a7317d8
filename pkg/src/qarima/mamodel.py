"""Quantum-augmented MA estimation and ARMA finalization.

The MA stage models the serial structure left in AR residuals: a
conditional-least-squares warm start (long-AR prewhitening for innovation
estimates), norm-constrained refinement of the quantum MA loss, order
selection with a parsimony penalty, and forecast generation on the original
scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import optimizer as opt
from .armodel import ARFit, LossWeights, VqcConfig, _DEGENERATE_NORM
from .series import (
    TimeSeries,
    build_delay_matrix,
    difference_anchors,
    generate_differences,
    invert_difference,
)
from .swaptest import binary_entropy_vec, cosine_projection


class MAModelError(ValueError):
    pass


@dataclass(frozen=True)
class MAFit:
    q: int
    theta: np.ndarray
    loss: float
    sigma_ma: float
    init_fallback: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class ArmaModel:
    """Final model row: orders, coefficient vectors, residual spreads."""

    p: int
    d: int
    q: int
    b: np.ndarray
    theta: np.ndarray
    sigma_ar: float
    sigma_ma: float


def _swap_cosines_ma(E: np.ndarray, theta: np.ndarray, cos_dot: np.ndarray,
                     shots: int, seed: int) -> np.ndarray:
    if shots == 0:
        return cos_dot
    out = np.empty(E.shape[0])
    for t in range(E.shape[0]):
        est = cosine_projection(E[t], theta, shots=shots, seed=seed + t)
        out[t] = math.copysign(est.cosine, cos_dot[t]) if cos_dot[t] != 0 else est.cosine
    return out


def ma_loss(theta, E, y, w: LossWeights, cfg: VqcConfig = VqcConfig()) -> float:
    """Squared error + cosine misalignment + entropy + L2 on theta.

    Predictions are |theta| |eps_t| cos(phi_corrected); the entropy term
    uses p0 = cos^2(phi_swap).  With omega = 1 and zero penalties in
    analytic mode this equals the classical conditional SSE.
    """
    theta = np.asarray(theta, dtype=float)
    E = np.asarray(E, dtype=float)
    y = np.asarray(y, dtype=float)
    if E.ndim != 2 or E.shape[1] != theta.size or E.shape[0] != y.size:
        raise MAModelError("dimension mismatch between E, targets and theta")

    nt = float(np.linalg.norm(theta))
    l2 = w.lambda_l2 * float(np.dot(theta, theta))
    if nt < _DEGENERATE_NORM:
        return float(np.sum(y * y)) + l2

    ne = np.linalg.norm(E, axis=1)
    denom = ne * nt
    cos_dot = np.zeros(y.size)
    ok = denom > _DEGENERATE_NORM
    cos_dot[ok] = (E[ok] @ theta) / denom[ok]
    cos_dot = np.clip(cos_dot, -1.0, 1.0)

    cos_swap = np.clip(
        _swap_cosines_ma(E, theta, cos_dot, cfg.shots, cfg.seed), -1.0, 1.0
    )
    if w.omega == 1.0 or cfg.shots == 0:
        cos_corr = cos_dot
    else:
        th_dot = np.arccos(cos_dot)
        th_swap = np.arccos(cos_swap)
        cos_corr = np.cos(th_swap + w.omega * (th_dot - th_swap))

    pred = ne * nt * cos_corr
    loss = float(np.sum((y - pred) ** 2)) + l2
    if w.lambda_cos != 0.0:
        loss += w.lambda_cos * float(np.sum((cos_dot - cos_swap) ** 2))
    if w.lambda_ent != 0.0:
        p0 = np.clip(cos_swap**2, 0.0, 1.0)
        loss += w.lambda_ent * float(np.sum(binary_entropy_vec(p0)))
    return loss


def innovation_design(residuals, q: int):
    """Delayed innovation matrix E and aligned residual targets.

    Innovations are estimated by prewhitening the residual stream with a
    long AR (two-stage conditional least squares); E holds their q lags
    aligned with the residual stream as target.
    """
    eps = residuals if isinstance(residuals, np.ndarray) else np.asarray(residuals, dtype=float)
    n = eps.size
    if n <= q + 2:
        raise MAModelError("too few residuals for requested q")
    L = min(max(10, 2 * q), max(1, n // 4))
    if n > L + 4 and np.std(eps) > 1e-12:
        dm = build_delay_matrix(eps, L)
        phi, *_ = np.linalg.lstsq(dm.regressors, dm.targets, rcond=None)
        innov = np.zeros(n)
        innov[L:] = dm.targets - dm.regressors @ phi
    else:
        innov = eps.copy()
    E = np.column_stack([innov[q - k : n - k] for k in range(1, q + 1)])
    return E, eps[q:]


def cls_init(residuals, q: int, seed: int = 0):
    """Conditional-least-squares warm start, clipped to [-1, 1].

    Falls back to U(-1, 1) draws when the design is ill-conditioned or
    degenerate.
    """
    E, target = innovation_design(residuals, q)
    fallback = False
    if np.linalg.matrix_rank(E) < q or not np.all(np.isfinite(E)):
        theta0 = np.random.default_rng(seed).uniform(-1.0, 1.0, size=q)
        fallback = True
    else:
        theta0, *_ = np.linalg.lstsq(E, target, rcond=None)
        if not np.all(np.isfinite(theta0)):
            theta0 = np.random.default_rng(seed).uniform(-1.0, 1.0, size=q)
            fallback = True
    return np.clip(theta0, -1.0, 1.0), E, target, fallback


def ma_order_estimate(residuals, q_range, w: LossWeights = LossWeights(),
                      cfg: VqcConfig = VqcConfig(), t_max: int = 60,
                      seed: int = 0):
    """Score candidate MA orders; lowest penalized fit wins.

    Each q gets a Gaussian-initialized theta refined on a short budget; the
    selection adds a parsimony penalty n ln(SSE/n) + 2q so that nested
    candidates do not trivially favor the largest order.  Ties break to the
    smaller q.  Returns (q_star, summary rows (q, loss)).
    """
    qs = sorted(set(int(q) for q in np.atleast_1d(np.arange(q_range[0], q_range[1] + 1))))
    if not qs or qs[0] < 1:
        raise MAModelError("q_range must cover orders >= 1")
    summary = []
    scores = {}
    for q in qs:
        E, target = innovation_design(residuals, q)
        rng = np.random.default_rng(seed + q)
        theta0 = rng.standard_normal(q)
        if t_max > 0:
            problem = opt.OptProblem(
                objective=lambda th: ma_loss(th, E, target, w, cfg),
                x0=theta0,
                max_evals=max(t_max, q + 2),
            )
            theta_star = opt.minimize(problem, seed=seed + q).x_star
        else:
            theta_star = theta0
        loss = ma_loss(theta_star, E, target, w, cfg)
        summary.append((q, loss))
        n = target.size
        sse = max(float(np.sum((target - E @ theta_star) ** 2)), 1e-300)
        scores[q] = n * math.log(sse / n) + 2 * q
    q_star = min(qs, key=lambda q: (scores[q], q))
    return q_star, summary


def vqc_ma_train(residuals, q_star: int, cfg: VqcConfig = VqcConfig(),
                 w: LossWeights = LossWeights(), t_max: int = 200,
                 seed: int = 0) -> MAFit:
    """Norm-constrained refinement of the MA loss from a CLS warm start."""
    tau = w.tau_norm if w.tau_norm is not None else math.sqrt(q_star)
    eps = np.asarray(residuals, dtype=float)
    theta0, E, target, fallback = cls_init(eps, q_star, seed=seed)
    if np.all(np.abs(E) < 1e-14):
        rms = float(np.sqrt(np.mean(target**2)))
        return MAFit(
            q=q_star, theta=np.zeros(q_star), loss=ma_loss(np.zeros(q_star), E, target, w, cfg),
            sigma_ma=rms, init_fallback=fallback, degenerate=True,
        )
    # keep the start strictly feasible for the norm ball
    n0 = float(np.linalg.norm(theta0))
    if n0 > tau:
        theta0 = theta0 * (0.95 * tau / n0)
    problem = opt.OptProblem(
        objective=lambda th: ma_loss(th, E, target, w, cfg),
        x0=theta0,
        constraints=[opt.norm_ball_constraint(tau)],
        max_evals=max(t_max, q_star + 2),
    )
    res = opt.minimize(problem, seed=seed)
    theta_star = np.asarray(res.x_star, dtype=float)
    pred = E @ theta_star
    sigma_ma = float(np.sqrt(np.mean((target - pred) ** 2)))
    return MAFit(
        q=q_star,
        theta=theta_star,
        loss=ma_loss(theta_star, E, target, w, cfg),
        sigma_ma=sigma_ma,
        init_fallback=fallback,
    )


def arma_finalize(d: int, ar_fits, q_range=(1, 3), w: LossWeights = LossWeights(),
                  cfg: VqcConfig = VqcConfig(), t_max: int = 200,
                  seed: int = 0) -> list[ArmaModel]:
    """One finalized ARMA row per AR fit: independent q selection and
    MA training on that fit's residual stream."""
    rows = []
    for fit in ar_fits:
        if not isinstance(fit, ARFit):
            raise MAModelError("ar_fits must contain AR fit records")
        try:
            q_star, _ = ma_order_estimate(
                fit.residuals, q_range, w, cfg, t_max=min(t_max, 60), seed=seed + fit.p
            )
            ma_fit = vqc_ma_train(
                fit.residuals, q_star, cfg, w, t_max=t_max, seed=seed + fit.p
            )
        except MAModelError:
            continue  # skip orders whose residual streams are too short
        rows.append(
            ArmaModel(
                p=fit.p,
                d=d,
                q=ma_fit.q,
                b=fit.b,
                theta=ma_fit.theta,
                sigma_ar=fit.residual_std,
                sigma_ma=ma_fit.sigma_ma,
            )
        )
    return rows


def _one_step_residuals(model: ArmaModel, z: np.ndarray) -> np.ndarray:
    """In-sample one-step errors on the differenced scale, seeded at 0."""
    p, q = model.p, model.q
    eps = np.zeros(z.size)
    for t in range(p, z.size):
        pred = float(np.dot(model.b, z[t - p : t][::-1])) if p else 0.0
        for j in range(1, q + 1):
            if t - j >= 0:
                pred += model.theta[j - 1] * eps[t - j]
        eps[t] = z[t] - pred
    return eps


def forecast(model: ArmaModel, history, horizon: int,
             mode: str = "rolling_one_step") -> np.ndarray:
    """Forecast ``horizon`` original-scale values beyond ``history``.

    Works on the differenced scale, with innovations seeded at 0, then
    integrates back with the history's anchors.  Without interleaved
    observations the two modes coincide; rolling evaluation feeds new
    observations by calling again with extended history.
    """
    if horizon <= 0:
        raise MAModelError("horizon must be positive")
    if mode not in {"recursive", "rolling_one_step"}:
        raise MAModelError(f"unknown forecast mode {mode!r}")
    vals = history.values if isinstance(history, TimeSeries) else np.asarray(history, dtype=float)
    if vals.size <= model.p + model.d:
        raise MAModelError("history too short for model orders")
    d = model.d
    z = generate_differences(vals, d).levels[d] if d > 0 else vals.astype(float)
    eps = _one_step_residuals(model, z)

    zx = list(z)
    ex = list(eps)
    preds = []
    for _ in range(horizon):
        pred = 0.0
        for i in range(1, model.p + 1):
            pred += model.b[i - 1] * zx[-i]
        for j in range(1, model.q + 1):
            pred += model.theta[j - 1] * ex[-j]
        preds.append(pred)
        zx.append(pred)
        ex.append(0.0)  # forecasted steps carry zero innovation
    anchors = difference_anchors(vals, d)
    return invert_difference(np.array(preds), anchors, d)
