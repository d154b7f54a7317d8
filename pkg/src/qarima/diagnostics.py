"""Order diagnostics: differencing-order estimation and lag correlograms.

The lag correlograms (qacf/qpacf) average swap-test cosines of encoded
observation pairs per lag and threshold them; classical sample ACF/PACF are
provided as validation oracles.  The differencing order is picked by fitting
a two-parameter cosine predictor at each differencing level and selecting
the level with near-zero trend weight and lowest loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import optimizer as opt
from .series import TimeSeries, generate_differences
from .swaptest import cosine_projection


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdConfig:
    """Significance threshold rule for lag values.

    static: tau = z / sqrt(N).  percentile: tau = the percentile_q-th
    percentile of |values|.  std: tau = std_multiplier * std(values).
    Lags with beta*tau <= |value| < tau land in the fallback set when
    enabled.
    """

    mode: str = "static"
    z: float = 1.96
    percentile_q: float = 90.0
    std_multiplier: float = 1.0
    fallback_ratio: float = 0.5
    enable_fallback: bool = True

    def __post_init__(self):
        if self.mode not in {"static", "percentile", "std"}:
            raise DiagnosticsError(f"unknown threshold mode {self.mode!r}")
        if not 0.0 < self.fallback_ratio < 1.0:
            raise DiagnosticsError("fallback_ratio must lie in (0, 1)")
        if self.mode == "percentile" and not 0.0 < self.percentile_q < 100.0:
            raise DiagnosticsError("percentile_q must lie in (0, 100)")

    def tau(self, values: np.ndarray, n: int) -> float:
        if self.mode == "static":
            return self.z / math.sqrt(n)
        if self.mode == "percentile":
            return float(np.percentile(np.abs(values), self.percentile_q))
        return self.std_multiplier * float(np.std(values))


@dataclass(frozen=True)
class LagDiagnostics:
    values: np.ndarray  # index 0 holds lag 1
    significant: frozenset
    fallback: frozenset
    tau: float
    tau_fallback: float

    def lag_value(self, k: int) -> float:
        return float(self.values[k - 1])


@dataclass(frozen=True)
class DOrderResult:
    d_star: int
    alpha: float
    gamma: float
    metrics_log: tuple  # records (d, alpha, gamma, gamma_norm, loss)
    converged_early: bool


def _as_values(y) -> np.ndarray:
    return y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)


def _encode(values: np.ndarray, center: bool):
    """Scalar-to-2-vector encoding [z_t, c] with reference component c.

    c is the sample standard deviation; it carries magnitude information
    through the normalization that a bare scalar encoding would lose.  A
    constant series (zero std) keeps its raw values with c = 0, where every
    self-pair cosine is 1.
    """
    std = float(np.std(values))
    if std < 1e-12:
        return values.astype(float), 0.0
    z = values - values.mean() if center else values.astype(float)
    return z, std


def _pair_cosines(z: np.ndarray, c: float, k: int, shots: int, seed: int):
    """Signed swap cosines between encoded pairs ([z_t, c], [z_{t+k}, c])."""
    a, b = z[:-k], z[k:]
    if shots == 0:
        na = np.sqrt(a * a + c * c)
        nb = np.sqrt(b * b + c * c)
        denom = na * nb
        dots = a * b + c * c
        out = np.zeros_like(denom)
        ok = denom > 1e-12
        out[ok] = dots[ok] / denom[ok]
        return np.clip(out, -1.0, 1.0)
    cosines = np.empty(a.size)
    for i in range(a.size):
        est = cosine_projection(
            np.array([a[i], c]), np.array([b[i], c]),
            shots=shots, seed=seed + k * 100003 + i,
        )
        sign = 1.0 if a[i] * b[i] + c * c >= 0 else -1.0
        cosines[i] = sign * est.cosine
    return cosines


def _renormalize(mean_cos: float, z: np.ndarray, c: float) -> float:
    """Remove the encoding's similarity floor from an averaged cosine.

    Uncorrelated encoded pairs average to m0 = (mean u)^2 + (mean v)^2 with
    (u, v) the unit-normalized components, not to 0; rescaling by
    (s - m0) / (1 - m0) restores a correlation-like range.  Skipped for the
    degenerate constant-series encoding.
    """
    if c <= 0.0:
        return float(np.clip(mean_cos, -1.0, 1.0))
    norms = np.sqrt(z * z + c * c)
    ok = norms > 1e-12
    u = np.zeros_like(z)
    v = np.zeros_like(z)
    u[ok] = z[ok] / norms[ok]
    v[ok] = c / norms[ok]
    m0 = float(u.mean()) ** 2 + float(v.mean()) ** 2
    if 1.0 - m0 < 1e-9:
        return float(np.clip(mean_cos, -1.0, 1.0))
    return float(np.clip((mean_cos - m0) / (1.0 - m0), -1.0, 1.0))


def _threshold(values: np.ndarray, n: int, cfg: ThresholdConfig) -> LagDiagnostics:
    tau = cfg.tau(values, n)
    tau_fb = cfg.fallback_ratio * tau
    sig = frozenset(
        k + 1 for k in range(values.size) if abs(values[k]) >= tau
    )
    if cfg.enable_fallback:
        fb = frozenset(
            k + 1
            for k in range(values.size)
            if tau_fb <= abs(values[k]) < tau
        )
    else:
        fb = frozenset()
    vals = values.copy()
    vals.setflags(write=False)
    return LagDiagnostics(
        values=vals, significant=sig, fallback=fb, tau=tau, tau_fallback=tau_fb
    )


def _lag_correlogram(y, K, shots, cfg, center, seed) -> LagDiagnostics:
    values = _as_values(y)
    n = values.size
    if K >= n:
        raise DiagnosticsError(f"max lag {K} must be below series length {n}")
    z, c = _encode(values, center)
    out = np.zeros(K)
    for k in range(1, K + 1):
        if n <= k + 1:
            continue  # too few pairs; value stays 0
        mean_cos = float(np.mean(_pair_cosines(z, c, k, shots, seed)))
        out[k - 1] = _renormalize(mean_cos, z, c)
    return _threshold(out, n, cfg)


def qacf(
    y,
    K: int,
    shots: int = 0,
    thresholds: ThresholdConfig = ThresholdConfig(),
    omega: float = 1.0,
    center: bool = True,
    seed: int = 0,
) -> LagDiagnostics:
    """Averaged swap-test cosine per lag, thresholded.

    ``omega`` blends the classical and swap angles before averaging; in
    analytic mode the two coincide, so the blend is the identity.
    """
    return _lag_correlogram(y, K, shots, thresholds, center, seed)


def qpacf(
    y,
    K: int,
    shots: int = 0,
    thresholds: ThresholdConfig = ThresholdConfig(),
    center: bool = True,
    seed: int = 0,
) -> LagDiagnostics:
    """Mean swap-test projection per lag with significant/fallback lag sets."""
    return _lag_correlogram(y, K, shots, thresholds, center, seed)


def classical_acf_pacf(y, K: int):
    """Sample ACF and Durbin-Levinson PACF, lags 1..K."""
    values = _as_values(y)
    n = values.size
    if K >= n:
        raise DiagnosticsError("max lag must be below series length")
    z = values - values.mean()
    denom = float(np.dot(z, z))
    if denom < 1e-30:
        return np.zeros(K), np.zeros(K)
    acf = np.array(
        [float(np.dot(z[:-k], z[k:])) / denom for k in range(1, K + 1)]
    )
    # Durbin-Levinson recursion
    pacf = np.zeros(K)
    phi_prev = np.zeros(0)
    for k in range(1, K + 1):
        if k == 1:
            phi_kk = acf[0]
            phi_cur = np.array([phi_kk])
        else:
            num = acf[k - 1] - float(np.dot(phi_prev, acf[k - 2 :: -1][:k - 1]))
            den = 1.0 - float(np.dot(phi_prev, acf[: k - 1]))
            phi_kk = num / den if abs(den) > 1e-30 else 0.0
            phi_cur = np.empty(k)
            phi_cur[: k - 1] = phi_prev - phi_kk * phi_prev[::-1]
            phi_cur[k - 1] = phi_kk
        pacf[k - 1] = phi_kk
        phi_prev = phi_cur
    return acf, pacf


def _level_loss_factory(z: np.ndarray):
    """Loss at one differencing level: mean squared error of the cosine
    predictor yhat_t = cos([1, z_{t-1}], [alpha, gamma])."""
    x = z[:-1]
    targets = z[1:]
    nx = np.sqrt(1.0 + x * x)

    def loss(params):
        alpha, gamma = float(params[0]), float(params[1])
        np_ = math.sqrt(alpha * alpha + gamma * gamma)
        if np_ < 1e-12:
            pred = np.zeros_like(targets)
        else:
            pred = (alpha + gamma * x) / (nx * np_)
        return float(np.mean((targets - pred) ** 2))

    return loss


def estimate_d(
    y,
    d_max: int = 2,
    epsilon: float = 0.01,
    patience: int = 2,
    max_iter: int = 200,
    seed: int = 0,
) -> DOrderResult:
    """Pick the differencing order whose level behaves like a trend-free fit.

    At each level d the predictor cos([1, z_{t-1}], [alpha, gamma]) is fitted
    by derivative-free search (seeded with seed + d).  Levels whose
    normalized gamma is within 10*epsilon of zero compete by lowest loss,
    ties to the smaller d; if none qualify, the plain loss argmin wins.
    Stops early when the last ``patience`` levels' normalized gamma values
    agree within epsilon.
    """
    values = _as_values(y)
    if values.size <= d_max + 2:
        raise DiagnosticsError("series too short for requested d_max")
    table = generate_differences(values, d_max)
    log = []
    gammas = []
    converged_early = False
    for d in range(0, d_max + 1):
        z = table.levels[d]
        if z.size < 3:
            break
        loss_fn = _level_loss_factory(z)
        rng = np.random.default_rng(seed + d)
        x0 = np.array([1.0, 0.0]) + rng.normal(0.0, 0.1, size=2)
        problem = opt.OptProblem(
            objective=loss_fn, x0=x0, max_evals=max_iter, rho_begin=0.5
        )
        res = opt.minimize(problem, seed=seed + d)
        alpha, gamma = float(res.x_star[0]), float(res.x_star[1])
        scale = math.sqrt(alpha * alpha + gamma * gamma)
        gamma_norm = gamma / scale if scale > 1e-12 else 0.0
        log.append((d, alpha, gamma, gamma_norm, res.f_star))
        gammas.append(gamma_norm)
        if len(gammas) >= patience and d < d_max:
            window = gammas[-patience:]
            if max(window) - min(window) < epsilon:
                converged_early = True
                break

    tol = 10.0 * epsilon
    candidates = [rec for rec in log if abs(rec[3]) <= tol]
    pool = candidates if candidates else log
    best_loss = min(rec[4] for rec in pool)
    # losses within numerical noise of the best count as ties; smaller d wins
    tie_band = best_loss + max(1e-9, 1e-9 * abs(best_loss))
    best = min(
        (rec for rec in pool if rec[4] <= tie_band), key=lambda rec: rec[0]
    )
    return DOrderResult(
        d_star=best[0],
        alpha=best[1],
        gamma=best[2],
        metrics_log=tuple(log),
        converged_early=converged_early,
    )


def export_lag_csv(diag: LagDiagnostics, path):
    """Write lag, value, significant, fallback, tau rows."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "value", "significant", "fallback", "tau"])
        for i, v in enumerate(diag.values, start=1):
            writer.writerow(
                [
                    i,
                    repr(float(v)),
                    int(i in diag.significant),
                    int(i in diag.fallback),
                    repr(diag.tau),
                ]
            )
