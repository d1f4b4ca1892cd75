"""Truth oracles, Hudson identity, Jensen gap, decomposition and bounds."""

import numpy as np
import pytest
from scipy import stats

from poisson_cb.algorithms import Constant, Identity, LinearShrinkage, Threshold
from poisson_cb.estimators import cb_infinite_exact
from poisson_cb.oracles import (
    bias_variance_decomp,
    bound_rhs,
    enum_truth,
    hudson_check,
    ivar_exact,
    jensen_gap,
    mc_truth,
    poisson_support,
)

HARD_HALF = Threshold(0.5, "hard")


def brute_force_err(mu, g, K=60):
    """Double sum over (training count, test count) for n = 1, squared loss."""
    ks = np.arange(K)
    w = stats.poisson.pmf(ks, mu)
    fits = np.array([g.fit(np.array([float(k)]))[0] for k in ks])
    return float(np.sum(w[:, None] * w[None, :] * (ks[None, :] - fits[:, None]) ** 2))


class TestTruth:
    def test_identity_mc(self):
        mu = np.array([0.5, 2.0, 4.0])
        for p in (0.0, 0.3):
            t = mc_truth(mu, Identity(), "squared", p, R=20_000, seed=3)
            assert abs(t.value - 2 * (1 - p) * mu.sum()) < 4 * t.std_error

    def test_zero_means(self):
        t = mc_truth(np.zeros(4), Identity(), "squared", R=50, seed=0)
        assert t.value == 0.0

    def test_conditional_same_target(self):
        mu = np.array([1.0, 3.0])
        g = LinearShrinkage()
        exact = enum_truth(mu, g, "deviance").value
        for cond in (False, True):
            t = mc_truth(mu, g, "deviance", R=40_000, seed=1, conditional=cond)
            assert abs(t.value - exact) < 4 * t.std_error

    def test_enum_identity(self):
        assert enum_truth([1.0], Identity(), "squared").value == pytest.approx(2.0, abs=1e-8)

    def test_enum_hard_threshold_golden(self):
        got = enum_truth([1.0], HARD_HALF, "squared").value
        assert got == pytest.approx(brute_force_err(1.0, HARD_HALF), abs=1e-9)

    def test_enum_continuity_in_p(self):
        a = enum_truth([1.0], HARD_HALF, "squared", 0.0).value
        b = enum_truth([1.0], HARD_HALF, "squared", 1e-4).value
        assert abs(a - b) < 1e-3

    def test_support_truncation(self):
        ks, pmf, tail = poisson_support(3.0)
        assert tail <= 1e-12 and pmf.sum() == pytest.approx(1 - tail)
        ks, _, tail = poisson_support(3.0, cap=4)
        assert ks[-1] == 4 and tail > 0.1


class TestHudson:
    def test_identity_factorial_moment(self):
        r = hudson_check([2.0], Identity())
        assert r.lhs[0] == pytest.approx(4.0) and r.rhs[0] == pytest.approx(4.0)

    def test_constant(self):
        r = hudson_check([1.5, 0.5], Constant(2.0))
        np.testing.assert_allclose(r.lhs, [3.0, 1.0])
        assert r.passed

    @pytest.mark.parametrize("g", [Threshold(1.0, "hard"), LinearShrinkage(), Threshold(0.7, "soft")])
    def test_nonsmooth(self, g):
        assert hudson_check([1.0, 2.0], g).residual < 1e-8


class TestJensen:
    def test_squared(self):
        assert jensen_gap([1.0, 2.0], "squared") == pytest.approx(3.0)

    def test_zero(self):
        assert jensen_gap([0.0, 0.0], "deviance") == 0.0

    def test_deviance_positive_and_mc_agrees(self):
        ks = np.arange(80)
        w = stats.poisson.pmf(ks, 1.0)
        manual = 2 * np.sum(w * np.where(ks > 0, ks * (np.log(np.maximum(ks, 1)) - 1), 0)) + 2.0
        exact = jensen_gap([1.0], "deviance")
        assert exact > 0 and exact == pytest.approx(manual, rel=1e-10)
        assert jensen_gap([1.0], "deviance", method="mc", R=400_000, seed=2) == pytest.approx(
            exact, rel=0.02)


class TestDecomposition:
    def test_reducible_halves_with_B(self):
        mu = np.full(10, 3.0)
        g = LinearShrinkage()
        a = bias_variance_decomp(mu, g, "squared", 0.2, 20, 40, 20, seed=1)
        b = bias_variance_decomp(mu, g, "squared", 0.2, 40, 40, 20, seed=1)
        assert b.reducible_var / a.reducible_var == pytest.approx(0.5, rel=0.15)

    def test_large_B_leaves_irreducible(self):
        mu = np.array([1.0, 2.0])
        g = LinearShrinkage()
        truth = enum_truth(mu, g, "squared").value
        rep = bias_variance_decomp(mu, g, "squared", 0.3, 10_000, 30, 4, seed=2, truth=truth)
        exact = ivar_exact(mu, g, "squared", 0.3)
        assert rep.reducible_var < 0.01 * exact
        assert rep.irreducible_var == pytest.approx(exact, rel=0.5)

    def test_constant_fit_ivar_closed_form(self):
        # for a constant fit E[CB | Y] is a quadratic in Y with known coefficients
        mu, c, p = np.array([2.0]), 1.5, 0.3
        val = ivar_exact(mu, Constant(c), "squared", p)
        ks = np.arange(80.0)
        w = stats.poisson.pmf(ks, mu[0])
        h = (1 - p) ** 2 * ks ** 2 + p * (1 - p) * ks - 2 * c * (1 - p) * ks
        assert val == pytest.approx(np.sum(w * h ** 2) - np.sum(w * h) ** 2, rel=1e-8)
        # cross-check the conditional mean itself
        assert cb_infinite_exact([3.0], Constant(c), "squared", p) == pytest.approx(
            (1 - p) ** 2 * 9 + p * (1 - p) * 3 - 2 * c * (1 - p) * 3 + c * c)


class TestBounds:
    def test_bias_zero_at_p0(self):
        assert bound_rhs("bias", [1.0, 2.0], LinearShrinkage(), "squared", 0.0).value == 0.0

    def test_rvar_scales_with_B(self):
        a = bound_rhs("rvar", np.full(5, 2.0), LinearShrinkage(), "squared", 0.1, B=32, R=5000)
        b = bound_rhs("rvar", np.full(5, 2.0), LinearShrinkage(), "squared", 0.1, B=64, R=5000)
        assert b.value == pytest.approx(a.value / 2, rel=1e-12)

    def test_ivar_bound_dominates(self):
        mu = np.array([1.0, 2.0])
        for loss in ("squared", "deviance"):
            b = bound_rhs("ivar", mu, LinearShrinkage(), loss, 0.1)
            assert ivar_exact(mu, LinearShrinkage(), loss, 0.1) <= b.value

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            bound_rhs("total", [1.0], Identity(), "squared", 0.1)
