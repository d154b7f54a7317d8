import math

import numpy as np
import pytest

from qarima.armodel import (
    ARModelError,
    LossWeights,
    VqcConfig,
    ar_loss,
    ols_init,
    pool_weak_inits,
    progressive_weak_refine,
    residual_eval,
    vqc_ar_estimate,
    weak_lag_refine,
)
from qarima.series import build_delay_matrix, synth_ar1
from qarima.swaptest import binary_entropy


def scalar_ar_loss_oracle(X, y, b, lam_cos, lam_ent, omega):
    """Per-term re-implementation of the analytic-mode AR loss."""
    b = np.asarray(b, float)
    nb = np.linalg.norm(b)
    total = 0.0
    for t in range(len(y)):
        x = np.asarray(X[t], float)
        nx = np.linalg.norm(x)
        if nx * nb > 1e-10:
            cos_dot = float(np.clip(np.dot(x, b) / (nx * nb), -1, 1))
        else:
            cos_dot = 0.0
        cos_swap = cos_dot  # analytic swap estimate with sign attached
        th_dot, th_swap = math.acos(cos_dot), math.acos(cos_swap)
        cos_corr = math.cos(th_swap + omega * (th_dot - th_swap))
        pred = nx * nb * cos_corr
        total += (y[t] - pred) ** 2
        total += lam_cos * (cos_dot - cos_swap) ** 2
        total += lam_ent * binary_entropy(min(max(1 - cos_swap**2, 0.0), 1.0))
    return total


def make_ar2(n=600, seed=13):
    rng = np.random.default_rng(seed)
    y = np.zeros(n + 100)
    eps = rng.normal(0, 1, size=n + 100)
    for t in range(2, n + 100):
        y[t] = 0.5 * y[t - 1] - 0.3 * y[t - 2] + eps[t]
    return y[100:]


class TestLossWeights:
    def test_adaptive_example(self):
        assert LossWeights().adaptive(200.0) == (0.2, 0.1)

    def test_explicit_overrides_adaptive(self):
        w = LossWeights(lambda_dev=7.0, lambda_mag=3.0)
        assert w.adaptive(200.0) == (7.0, 3.0)


class TestVqcConfig:
    def test_validation(self):
        with pytest.raises(ARModelError):
            VqcConfig(reps=0)
        with pytest.raises(ARModelError):
            VqcConfig(coeff_map="polar")


class TestArLoss:
    def test_omega_one_equals_sse(self, rng):
        y = synth_ar1(0.6, 200, 1.0, seed=1).values
        dm = build_delay_matrix(y, 2)
        b = rng.normal(size=2)
        got = ar_loss(dm, dm.targets, b, LossWeights(omega=1.0))
        want = float(np.sum((dm.targets - dm.regressors @ b) ** 2))
        assert got == pytest.approx(want, abs=1e-9 * max(1.0, want))

    def test_degenerate_b_finite(self):
        dm = build_delay_matrix(np.arange(1.0, 8.0), 2)
        loss = ar_loss(dm, dm.targets, np.full(2, 1e-12), LossWeights(lambda_ent=1.0))
        assert np.isfinite(loss)
        assert loss == pytest.approx(float(np.sum(dm.targets**2)))

    def test_matches_scalar_oracle(self, rng):
        X = rng.normal(size=(5, 3))
        y = rng.normal(size=5)
        b = rng.normal(size=3)
        w = LossWeights(lambda_cos=0.7, lambda_ent=0.4, omega=0.5)
        got = ar_loss(X, y, b, w)
        want = scalar_ar_loss_oracle(X, y, b, 0.7, 0.4, 0.5)
        assert got == pytest.approx(want, rel=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ARModelError):
            ar_loss(np.ones((4, 2)), np.ones(4), np.ones(3), LossWeights())
        with pytest.raises(ARModelError):
            ar_loss(np.ones((4, 2)), np.ones(5), np.ones(2), LossWeights())

    def test_shot_mode_runs_and_differs(self, rng):
        X = rng.normal(size=(4, 2))
        y = rng.normal(size=4)
        b = rng.normal(size=2)
        analytic = ar_loss(X, y, b, LossWeights(omega=0.5))
        shot = ar_loss(X, y, b, LossWeights(omega=0.5), VqcConfig(shots=128, seed=1))
        assert np.isfinite(shot)
        assert shot != analytic  # sampling noise perturbs the swap cosines


class TestOlsInit:
    def test_exact_recurrence(self):
        y = 2.0 * 0.5 ** np.arange(12)
        dm = build_delay_matrix(y, 1)
        init = ols_init(dm)
        assert not init.ridge_fallback
        assert init.b[0] == pytest.approx(0.5, abs=1e-12)

    def test_ar2_consistency(self):
        dm = build_delay_matrix(make_ar2(2000), 2)
        init = ols_init(dm)
        assert abs(init.b[0] - 0.5) < 0.05
        assert abs(init.b[1] + 0.3) < 0.05

    def test_rank_deficient_ridge(self):
        init = ols_init(np.zeros((6, 2)), np.ones(6))
        assert init.ridge_fallback
        assert np.allclose(init.b, 0.0)


class TestVqcArEstimate:
    def test_refinds_ols_on_ar1(self):
        y = synth_ar1(0.7, 400, 1.0, seed=3).values
        sel = vqc_ar_estimate(y, [1], t_max=300, seed=0)
        ols = ols_init(build_delay_matrix(y, 1)).b
        assert abs(sel.best.b[0] - ols[0]) < 1e-3

    def test_capacity_ordering_on_ar2(self):
        y = make_ar2(800)
        sel = vqc_ar_estimate(y, [1, 2, 3], t_max=200, seed=0)
        assert sel.p_star in {2, 3}
        assert sel.fits[2].loss < sel.fits[1].loss

    def test_zero_budget_passthrough(self):
        y = synth_ar1(0.5, 100, 1.0, seed=4).values
        sel = vqc_ar_estimate(y, [1], t_max=0)
        ols = ols_init(build_delay_matrix(y, 1)).b
        assert np.array_equal(sel.best.b, ols)

    def test_empty_candidates(self):
        with pytest.raises(ARModelError):
            vqc_ar_estimate(np.arange(10.0), [])

    def test_invalid_order(self):
        with pytest.raises(ARModelError):
            vqc_ar_estimate(np.arange(5.0), [7])

    def test_loss_reevaluates_identically(self):
        y = make_ar2(300)
        sel = vqc_ar_estimate(y, [1, 2], t_max=120, seed=2)
        for p, fit in sel.fits.items():
            dm = build_delay_matrix(y, p)
            again = ar_loss(dm, dm.targets, fit.b, LossWeights())
            assert again == pytest.approx(fit.loss, rel=1e-9)


@pytest.fixture(scope="module")
def selection():
    return vqc_ar_estimate(make_ar2(500, seed=21), [1, 2, 3], t_max=150, seed=0)


class TestWeakLagRefine:

    def test_anchors_bitwise_frozen(self, selection):
        res = weak_lag_refine(make_ar2(500, seed=21), 0, selection, k=1, t_max=100)
        p = selection.p_star
        assert np.array_equal(res.b_full[:p], selection.best.b)
        assert res.p_prime == p + res.k_used

    def test_adaptive_weights_recorded(self, selection):
        res = weak_lag_refine(make_ar2(500, seed=21), 0, selection, k=1, t_max=60)
        l_base = min(fit.loss for fit in selection.fits.values())
        assert res.lambda_dev == 1e-3 * l_base
        assert res.lambda_mag == 5e-4 * l_base

    def test_magnitude_penalty_dominance(self, selection):
        y = make_ar2(500, seed=21)
        lw = LossWeights(lambda_mag=1e9, lambda_dev=0.0)
        res = weak_lag_refine(y, 0, selection, k=1, cfg=VqcConfig(), lw=lw, t_max=200)
        assert abs(res.b_full[-1]) < 1e-3

    def test_deviation_penalty_dominance(self, selection):
        y = make_ar2(500, seed=21)
        w_init, _ = pool_weak_inits(selection, 1)
        lw = LossWeights(lambda_dev=1e9, lambda_mag=0.0)
        res = weak_lag_refine(y, 0, selection, k=1, lw=lw, t_max=200)
        assert abs(res.b_full[-1] - w_init[0]) < 1e-3

    def test_monotone_l1_response(self, selection):
        y = make_ar2(500, seed=21)
        norms = []
        for lam in (0.0, 10.0, 1e4):
            lw = LossWeights(lambda_mag=lam, lambda_dev=0.0)
            res = weak_lag_refine(y, 0, selection, k=1, lw=lw, t_max=200, seed=1)
            norms.append(float(np.sum(np.abs(res.b_full[selection.p_star:]))))
        assert norms[0] + 1e-9 >= norms[1] >= norms[2] - 1e-9

    def test_pool_excludes_anchor_magnitudes(self, selection):
        w_init, reduced = pool_weak_inits(selection, 2)
        anchor_mags = np.abs(selection.best.b)
        for m in w_init:
            assert not np.any(np.isclose(m, anchor_mags, atol=1e-12))

    def test_invalid_k(self, selection):
        with pytest.raises(ARModelError):
            weak_lag_refine(make_ar2(500, seed=21), 0, selection, k=0)


class TestProgressiveWeakRefine:
    def setup_method(self):
        self.y = make_ar2(400, seed=33)
        sel = vqc_ar_estimate(self.y, [2], t_max=150, seed=0)
        self.b_anchor = sel.best.b

    def test_stop_immediately(self):
        steps = progressive_weak_refine(
            self.y, 0, 2, self.b_anchor, [0.2, 0.1], tau_stop=-math.inf, t_max=40
        )
        assert len(steps) == 1

    def test_run_all_steps(self):
        steps = progressive_weak_refine(
            self.y, 0, 2, self.b_anchor, [0.2, 0.1], tau_stop=math.inf, t_max=40
        )
        assert len(steps) == 2
        assert [s[0] for s in steps] == [3, 4]

    def test_anchor_frozen_each_step(self):
        steps = progressive_weak_refine(
            self.y, 0, 2, self.b_anchor, [0.15, 0.05], tau_stop=math.inf, t_max=60
        )
        for p, b, loss in steps:
            assert np.array_equal(b[:2], self.b_anchor)
            assert b.size == p

    def test_true_extra_lag_improves_loss(self):
        # AR(3) data fitted with a 2-lag anchor: the third lag carries signal
        rng = np.random.default_rng(5)
        n = 800
        y = np.zeros(n + 100)
        eps = rng.normal(0, 1, size=n + 100)
        for t in range(3, n + 100):
            y[t] = 0.4 * y[t - 1] - 0.2 * y[t - 2] + 0.3 * y[t - 3] + eps[t]
        y = y[100:]
        sel = vqc_ar_estimate(y, [2], t_max=150, seed=0)
        dm2 = build_delay_matrix(y, 2)
        l_anchor = ar_loss(dm2, dm2.targets, sel.best.b, LossWeights())
        steps = progressive_weak_refine(
            y, 0, 2, sel.best.b, [0.3], tau_stop=math.inf, t_max=200
        )
        assert steps[0][2] < l_anchor

    def test_empty_inits(self):
        with pytest.raises(ARModelError):
            progressive_weak_refine(self.y, 0, 2, self.b_anchor, [])


class TestResidualEval:
    def test_noise_free_fixture(self):
        y = 3.0 * 0.5 ** np.arange(30)
        sel = vqc_ar_estimate(y, [1], t_max=0)
        out = residual_eval(y, [sel.best])
        assert out[0].residual_std < 1e-9

    def test_zero_direction_b(self):
        y = synth_ar1(0.5, 50, 1.0, seed=1).values
        sel = vqc_ar_estimate(y, [1], t_max=0)
        fit = sel.best
        zero_fit = type(fit)(
            p=1, b=np.zeros(1), loss=0.0, residual_mean=0.0,
            residual_std=0.0, residuals=np.zeros(1),
        )
        out = residual_eval(y, [zero_fit])
        dm = build_delay_matrix(y, 1)
        assert np.array_equal(out[0].residuals, dm.targets)

    def test_innovation_scale_recovery(self):
        y = synth_ar1(0.8, 2000, 1.0, seed=17)
        sel = vqc_ar_estimate(y.values, [1], t_max=150, seed=0)
        out = residual_eval(y.values, [sel.best])
        assert abs(out[0].residual_std - 1.0) < 0.1
