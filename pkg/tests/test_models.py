import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from refprior.errors import DomainError, UnsupportedOperationError
from refprior.models import (BUILTINS, UniformPair, get_model, iid_replicate, loglik_product,
                             logpdf, sample, sufficient_stat)
from refprior.numerics import QuadratureSettings, integrate
from refprior.streams import substream

CONTINUOUS = {
    "normal-location": [-3.0, -0.5, 0.0, 1.7, 10.0],
    "expshift-location": [-3.0, -0.5, 0.0, 1.7, 10.0],
    "logtail-location": [-3.0, -0.5, 0.0, 1.7, 10.0],
    "exponential-scale": [0.1, 0.5, 1.0, 2.0, 30.0],
    "uniform-scale": [0.1, 0.5, 1.0, 2.0, 30.0],
    "uniform-pair": [1.1, 1.5, 2.0, 4.0, 8.0],
    "triangular": [0.05, 0.3, 0.5, 0.7, 0.95],
    "normal-mixture": [-3.0, -0.5, 0.0, 1.7, 10.0],
}
TIGHT = QuadratureSettings(rel_tol=1e-10, abs_tol=1e-13)


def total_mass(model, theta):
    lo, hi = model.obs_support(theta)
    if model.name == "logtail-location":
        # 1/(t log^2 t) keeps mass 1/s_max beyond t = e^s_max, past the double
        # range; integrate in s = log t up to 700 and add that tail exactly
        f = lambda s: np.exp(s + model.logpdf(theta + np.exp(s), theta))
        return integrate(f, 1.0, 700.0, TIGHT, breakpoints=(2.0, 10.0, 50.0)) + 1.0 / 700.0
    f = lambda x: np.exp(model.logpdf(x, theta))
    return integrate(f, lo, hi, TIGHT, breakpoints=model.obs_breakpoints(theta))


class TestLogpdf:
    def test_triangular_example(self):
        assert logpdf(get_model("triangular"), 0.3, 0.5) == pytest.approx(math.log(1.2), abs=1e-15)

    def test_uniform_pair_example(self):
        assert logpdf(get_model("uniform-pair"), 3.0, 2.0) == pytest.approx(-math.log(2.0), abs=1e-15)

    def test_fmn_example(self):
        assert logpdf(get_model("fmn-discrete"), 5, 2) == pytest.approx(-math.log(3.0), abs=1e-15)

    def test_off_support_is_neg_inf(self):
        assert logpdf(get_model("uniform-pair"), 4.0, 2.0) == -math.inf
        assert logpdf(get_model("uniform-scale"), 3.0, 2.0) == -math.inf
        assert logpdf(get_model("expshift-location"), 0.0, 0.0) == -math.inf
        assert logpdf(get_model("logtail-location"), math.e, 0.0) == -math.inf

    @pytest.mark.parametrize("name", sorted(CONTINUOUS))
    def test_never_nan(self, name):
        model = get_model(name)
        theta = CONTINUOUS[name][2]
        x = np.concatenate([np.linspace(-50, 50, 1001), [-np.inf, np.inf]])
        assert not np.any(np.isnan(model.logpdf(x, theta)))

    @pytest.mark.parametrize("name, theta", [("uniform-pair", 1.0), ("triangular", 1.0),
                                             ("exponential-scale", -1.0), ("fmn-discrete", 1.5)])
    def test_domain_error(self, name, theta):
        with pytest.raises(DomainError):
            get_model(name).logpdf(0.5, theta)


class TestNormalization:
    @pytest.mark.parametrize("name", sorted(CONTINUOUS))
    def test_integrates_to_one(self, name):
        model = get_model(name)
        for theta in CONTINUOUS[name]:
            assert abs(total_mass(model, theta) - 1.0) <= 1e-6, theta

    def test_fmn_sums_to_one(self):
        model = get_model("fmn-discrete")
        for theta in range(1, 51):
            pts = np.unique(model.support_points(theta))
            assert math.fsum(np.exp(model.logpdf(pts, theta))) == pytest.approx(1.0, abs=1e-15)

    def test_fmn_low_outcome(self):
        model = get_model("fmn-discrete")
        assert sorted(set(model.support_points(1))) == [1, 2, 3]
        assert sorted(set(model.support_points(7))) == [3, 14, 15]


class TestLoglikProduct:
    def test_normal_pair(self):
        val = loglik_product(get_model("normal-location"), [0.0, 0.0], 0.0)
        assert val == pytest.approx(-math.log(2 * math.pi), abs=1e-15)

    def test_support_violation(self):
        assert loglik_product(get_model("uniform-scale"), [1.0, 3.0], 2.0) == -math.inf

    def test_uniform_pair_constant_density(self):
        model = get_model("uniform-pair")
        x = sample(model, 2.5, substream(3, "diagnostic", 0), 40)
        assert loglik_product(model, x, 2.5) == pytest.approx(-40 * math.log(2.5 ** 2 - 2.5), rel=1e-14)

    def test_empty_sample(self):
        with pytest.raises(ValueError):
            loglik_product(get_model("normal-location"), [], 0.0)


class TestSampler:
    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_deterministic(self, name):
        model = get_model(name)
        theta = 2.0 if name in ("uniform-pair", "fmn-discrete") else 0.5
        a = model.sample(theta, substream(7, "diagnostic", 1), 100)
        b = model.sample(theta, substream(7, "diagnostic", 1), 100)
        np.testing.assert_array_equal(a, b)

    def test_triangular_mass_below_mode(self):
        n = 100_000
        x = sample(get_model("triangular"), 0.5, substream(1, "diagnostic", 0), n)
        frac = np.mean(x <= 0.5)
        assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_uniform_pair_mean(self):
        n = 100_000
        x = sample(get_model("uniform-pair"), 2.0, substream(1, "diagnostic", 1), n)
        assert abs(x.mean() - 3.0) <= 3 * math.sqrt(4 / 12 / n)
        assert np.all((x > 2.0) & (x < 4.0))

    @pytest.mark.parametrize("name", sorted(CONTINUOUS))
    def test_ks_against_cdf(self, name):
        model = get_model(name)
        theta = CONTINUOUS[name][2]
        x = model.sample(theta, substream(2024, "diagnostic", 2), 100_000)
        result = stats.kstest(x, lambda v: model.cdf(v, theta))
        assert result.pvalue > 0.001

    def test_fmn_frequencies(self):
        x = sample(get_model("fmn-discrete"), 6, substream(5, "diagnostic", 0), 30_000)
        vals, counts = np.unique(x, return_counts=True)
        np.testing.assert_array_equal(vals, [3, 12, 13])
        assert stats.chisquare(counts).pvalue > 0.001


class TestSufficientStat:
    def test_min_max(self):
        r = sufficient_stat(get_model("uniform-pair"), [2.5, 3.9, 3.0])
        np.testing.assert_array_equal(r.t, [2.5, 3.9])
        assert r.k == 3

    def test_order_statistic_density(self):
        r = sufficient_stat(get_model("uniform-pair"), [2.5, 3.9, 3.0])
        expected = math.log(3 * 2 * 1.4) - 3 * math.log(2.0)
        assert r.logpdf(2.0) == pytest.approx(expected, abs=1e-14)

    def test_unsupported(self):
        with pytest.raises(UnsupportedOperationError):
            sufficient_stat(get_model("triangular"), [0.2, 0.4])

    @pytest.mark.parametrize("name", ["uniform-pair", "normal-location", "expshift-location",
                                      "exponential-scale", "uniform-scale"])
    def test_likelihood_ratio_identity(self, name):
        model = get_model(name)
        rng = np.random.default_rng(99)
        lo, hi = CONTINUOUS[name][1], CONTINUOUS[name][3]
        checked = 0
        for j in range(100):
            theta = rng.uniform(lo, hi)
            k = int(rng.integers(2, 30))
            x = model.sample(theta, substream(11, "diagnostic", j), k)
            r = sufficient_stat(model, x)
            # theta' drawn where the sample keeps positive likelihood
            a, b = model.theta_range(x)
            a, b = max(a, lo), min(b, hi + 5)
            theta2 = rng.uniform(a, b) if a < b else theta
            raw = model.loglik_product(x, theta) - model.loglik_product(x, theta2)
            red = r.logpdf(theta) - r.logpdf(theta2)
            assert abs(raw - red) <= 1e-10 * max(1.0, abs(raw)), (theta, theta2, k)
            checked += 1
        assert checked == 100

    def test_from_uniform_matches_reduce_in_law(self):
        model = get_model("uniform-pair")
        rng = np.random.default_rng(5)
        direct = np.array([model.suffstat.from_uniform(rng.random(2), 2.0, 10) for _ in range(20_000)])
        raw = np.array([sufficient_stat(model, model.sample(2.0, substream(5, "diagnostic", j), 10)).t
                        for j in range(20_000)])
        for c in range(2):
            assert stats.ks_2samp(direct[:, c], raw[:, c]).pvalue > 0.001

    def test_exponential_coordinates_agree(self):
        model = get_model("uniform-pair")
        stat = model.suffstat
        for v1, v2 in [(0.3, 1.1), (2.0, 0.01), (5.0, 7.0)]:
            q = np.array([-math.expm1(-v1), math.exp(-v2)])
            np.testing.assert_allclose(stat.from_exponential(np.array([v1, v2]), 3.0, 50),
                                       stat.from_uniform(q, 3.0, 50), rtol=1e-13)


class TestIIDVector:
    def test_flattened_likelihood(self):
        base = get_model("normal-location")
        vec = iid_replicate(base, 3)
        x = vec.sample(0.3, substream(1, "diagnostic", 0), 4)
        assert x.shape == (4, 3)
        np.testing.assert_array_equal(x.reshape(-1), base.sample(0.3, substream(1, "diagnostic", 0), 12))
        assert vec.loglik_product(x, 0.1) == pytest.approx(base.loglik_product(x.reshape(-1), 0.1))

    @given(st.floats(-5, 5), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
    def test_logpdf_is_sum(self, theta, obs):
        base = get_model("normal-location")
        vec = iid_replicate(base, 3)
        assert vec.logpdf(np.array(obs), theta) == pytest.approx(
            float(np.sum(base.logpdf(np.array(obs), theta))), rel=1e-14, abs=1e-14)


class TestUniformPairSpec:
    def test_conditions_enforced(self):
        spec = UniformPair().spec
        with pytest.raises(DomainError):
            spec.check(1.0)
        assert spec.b(2.0) == (3.0, 0.75)
