import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revlogit.model import (
    IndividualRealization,
    category_bounds,
    decay,
    decay_exponent,
    individual_alpha,
    individual_reversion,
    linear_predictor,
    log_ordered_prob,
    ordered_logit_terms,
    ordered_probs,
    workshop_indicators,
    workshop_multiplier,
)

mp.mp.dps = 40


def mp_decay(delta, alpha, horizon):
    if delta >= horizon:
        return mp.mpf(1)
    x = mp.mpf(alpha) * (mp.mpf(1) / horizon - mp.mpf(1) / (mp.mpf(horizon) - delta))
    return 1 - mp.e ** x


def mp_logistic(x):
    return 1 / (1 + mp.e ** (-mp.mpf(x)))


class TestDecay:
    def test_endpoints(self):
        assert decay(0, 3.0, 17) == 0.0
        assert decay(17, 3.0, 17) == 1.0
        assert decay(40, 0.5, 17) == 1.0

    @pytest.mark.parametrize("delta,alpha,horizon", [(8, 119.17, 17), (1, 5.0, 17), (16, 0.3, 17),
                                                      (7, 2.0, 14), (13, 40.0, 17)])
    def test_against_arbitrary_precision(self, delta, alpha, horizon):
        assert decay(delta, alpha, horizon) == pytest.approx(float(mp_decay(delta, alpha, horizon)), abs=1e-14)

    def test_nonpositive_alpha_gives_no_reversion_before_horizon(self):
        assert np.all(decay(np.arange(0, 17), -2.0, 17) == 0)
        assert np.all(decay(np.arange(0, 17), 0.0, 17) == 0)

    def test_faster_rate_reverts_more(self):
        assert decay(5, 10.0, 17) > decay(5, 2.0, 17)

    @given(alpha=st.floats(1e-3, 500), horizon=st.integers(1, 60))
    @settings(max_examples=50, deadline=None)
    def test_monotone_in_delta(self, alpha, horizon):
        d = decay(np.linspace(0, horizon * 1.2, 200), alpha, horizon)
        assert np.all(np.diff(d) >= 0)
        assert np.all((0 <= d) & (d <= 1))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            decay(-1, 1.0, 17)
        with pytest.raises(ValueError):
            decay_exponent(1, 0)


def test_heterogeneous_rates():
    rho = individual_reversion(0.33, [0.35, -0.39], np.array([[1, 1], [0, 0], [1, 0]]), 0.0, 0.0)
    np.testing.assert_allclose(rho, [0.29, 0.33, 0.68])
    assert individual_alpha(5.0, [], np.zeros(0), 2.0, 0.5) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        individual_reversion(0.0, [1.0, 2.0], np.ones((2, 3)), 0.0, 0.0)


def test_workshop_indicators():
    assert workshop_indicators(1).tolist() == [0, 0, 0, 0, 0]
    assert workshop_indicators(2).tolist() == [1, 0, 0, 0, 0]
    assert workshop_indicators(7).tolist() == [1, 1, 1, 0, 0]
    assert workshop_indicators(10).tolist() == [1, 1, 1, 1, 1]
    with pytest.raises(ValueError):
        workshop_indicators(11)


def test_multiplier_bounds():
    m = workshop_multiplier(np.ones(5), np.linspace(0, 1, 5), np.array(0.4))
    assert np.all((m >= 0.6 - 1e-15) & (m <= 1))


def test_linear_predictor_loop_oracle(rng):
    beta = rng.normal(size=(5, 5))
    delta = rng.integers(0, 20, size=5).astype(float)
    ind = workshop_indicators(8)
    real = IndividualRealization(rho=0.4, alpha=3.0, stakeholder=rng.normal(size=5), common=0.7)
    offset = rng.normal(size=5)
    v = linear_predictor(ind, delta, 17, beta, real, offset)
    for s in range(5):
        expected = offset[s] + real.stakeholder[s] + real.common
        for w in range(5):
            if ind[w]:
                expected += beta[s, w] * (1 - 0.4 * float(mp_decay(delta[w], 3.0, 17)))
        assert v[s] == pytest.approx(expected, abs=1e-12)


class TestOrderedLogit:
    tau = np.linspace(-3, 3, 10)

    def test_normalization(self, rng):
        v = rng.normal(scale=5, size=1000)
        p = ordered_probs(v, self.tau)
        assert p.shape == (1000, 11)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-12)

    def test_against_arbitrary_precision(self):
        for v in (-40.0, -2.5, 0.0, 1.3, 35.0):
            for y in range(11):
                lo = -mp.inf if y == 0 else self.tau[y - 1]
                hi = mp.inf if y == 10 else self.tau[y]
                p = (1 if hi == mp.inf else mp_logistic(hi - v)) - (0 if lo == -mp.inf else mp_logistic(lo - v))
                assert log_ordered_prob(y, v, self.tau) == pytest.approx(float(mp.log(p)), rel=1e-11, abs=1e-13)

    def test_derivatives_match_arbitrary_precision(self):
        v, lo, hi = 0.3, -0.7, 1.1

        def f(vv, a, b):
            return mp.log(mp_logistic(b - vv) - mp_logistic(a - vv))

        _, dv, dlo, dhi = ordered_logit_terms(np.array(v), np.array(lo), np.array(hi))
        assert dv == pytest.approx(float(mp.diff(lambda x: f(x, lo, hi), v)), rel=1e-12)
        assert dlo == pytest.approx(float(mp.diff(lambda x: f(v, x, hi), lo)), rel=1e-12)
        assert dhi == pytest.approx(float(mp.diff(lambda x: f(v, lo, x), hi)), rel=1e-12)

    def test_extreme_tails_are_finite(self):
        logp, dv, _, _ = ordered_logit_terms(np.array([500.0, -500.0]), np.array([-np.inf, 1.0]),
                                             np.array([-2.0, 2.0]))
        assert np.all(np.isfinite(logp))
        assert np.all(np.isfinite(dv))

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            ordered_probs(0.0, np.zeros(10))
        with pytest.raises(ValueError):
            ordered_probs(0.0, np.arange(9.0))

    def test_category_bounds(self):
        lo, hi = category_bounds(self.tau, np.array([0, 5, 10]))
        assert lo[0] == -np.inf and hi[2] == np.inf
        assert lo[1] == self.tau[4] and hi[1] == self.tau[5]
