import math

import numpy as np
import pytest
from scipy import special, stats

from refprior.information import (expected_information, information_additivity_check, mmi_gap,
                                  standard_model_check)
from refprior.errors import DomainError
from refprior.models import LocationModel, get_model
from refprior.priors import CompactSet, beta_bump_prior, flat_prior, reciprocal_prior


class ThetaFree(LocationModel):
    """N(x | 0, 1) whatever theta is."""

    def __init__(self):
        super().__init__("theta-free", get_model("normal-location").base)

    def _logpdf(self, x, theta):
        x, _ = np.broadcast_arrays(x, theta)
        return stats.norm.logpdf(x)

    def obs_support(self, theta):
        return -math.inf, math.inf

    def _draw(self, theta, u):
        return special.ndtri(u)

    def theta_range(self, sample):
        return -math.inf, math.inf


def fmn_information_oracle(n_max):
    """Direct double sum over theta in {1..n_max} and the reachable x."""
    model = get_model("fmn-discrete")
    thetas = range(1, n_max + 1)
    m = {}
    for th in thetas:
        for x in model.support_points(th):
            m[int(x)] = m.get(int(x), 0.0) + 1.0 / (3 * n_max)
    total = 0.0
    for th in thetas:
        for x in model.support_points(th):
            total += 1.0 / n_max * (1.0 / 3) * math.log((1.0 / 3) / m[int(x)])
    return total


def normal_uniform_grid_oracle(n=4000):
    """I = int int q(theta) p(x|theta) log[p(x|theta)/m(x)] on a midpoint grid."""
    th = (np.arange(n) + 0.5) / n
    x = np.linspace(-8.0, 9.0, 6801)
    dx = x[1] - x[0]
    logp = stats.norm.logpdf(x[:, None] - th[None, :])
    m = np.exp(logp).mean(axis=1)
    inner = (np.exp(logp) * (logp - np.log(m)[:, None])).mean(axis=1)
    return float(np.sum(inner) * dx)


class TestExpectedInformation:
    def test_theta_free_quadrature(self):
        est = expected_information(ThetaFree(), flat_prior(), CompactSet(0, 1))
        assert est.value == pytest.approx(0.0, abs=1e-8)

    def test_theta_free_monte_carlo(self):
        est = expected_information(ThetaFree(), flat_prior(), CompactSet(0, 1), k=3,
                                   estimator="monte-carlo", draws=64)
        assert est.value == pytest.approx(0.0, abs=1e-8)

    def test_fmn_exact(self):
        est = expected_information(get_model("fmn-discrete"), flat_prior(),
                                   CompactSet(1, 10, discrete=True))
        assert est.value == pytest.approx(fmn_information_oracle(10), abs=1e-12)
        assert 0.0 < est.value <= math.log(10)

    def test_normal_grid_oracle(self):
        est = expected_information(get_model("normal-location"), flat_prior(), CompactSet(0, 1))
        assert est.value > 0
        assert abs(est.value - normal_uniform_grid_oracle()) < 1e-3

    def test_normal_monte_carlo(self):
        model = get_model("normal-location")
        mc = expected_information(model, flat_prior(), CompactSet(0, 1), estimator="monte-carlo",
                                  seed=808, draws=3200)
        quad = expected_information(model, flat_prior(), CompactSet(0, 1))
        assert abs(mc.value - quad.value) <= 3 * mc.stderr

    def test_suffstat_compatibility(self):
        model = get_model("uniform-pair")
        region = CompactSet(1.5, 2.0)
        raw = expected_information(model, flat_prior(), region, k=5, estimator="monte-carlo",
                                   seed=909, draws=640)
        red = expected_information(model, flat_prior(), region, k=5, estimator="monte-carlo",
                                   seed=910, draws=640, use_suffstat=True)
        assert abs(raw.value - red.value) <= 2 * math.hypot(raw.stderr, red.stderr)

    def test_bad_k(self):
        with pytest.raises(DomainError):
            expected_information(get_model("normal-location"), flat_prior(), CompactSet(0, 1), k=0)


class TestAdditivity:
    def test_n_one_identical(self):
        chk = information_additivity_check(get_model("normal-location"), flat_prior(),
                                           CompactSet(0, 1), n=1)
        assert chk.joint.value == chk.scaled.value == chk.nested.value

    def test_fmn_exact(self):
        chk = information_additivity_check(get_model("fmn-discrete"), flat_prior(),
                                           CompactSet(1, 10, discrete=True), n=2)
        assert abs(chk.joint.value - chk.nested.value) <= 1e-10
        assert chk.joint.value < chk.scaled.value

    def test_normal_monte_carlo_seeds(self):
        model = get_model("normal-location")
        for seed in range(1000, 1010):
            chk = information_additivity_check(model, flat_prior(), CompactSet(0, 1), n=2,
                                               seed=seed, estimator="monte-carlo", draws=320)
            se = math.hypot(chk.joint.stderr, chk.nested.stderr)
            assert abs(chk.joint.value - chk.nested.value) <= 2 * se, seed
            assert chk.joint.value <= chk.scaled.value + 2 * math.hypot(chk.joint.stderr,
                                                                        chk.scaled.stderr)


class TestMMIGap:
    def test_same_prior(self):
        for row in mmi_gap(get_model("exponential-scale"), reciprocal_prior(), reciprocal_prior(),
                           CompactSet(0.5, 2), [1, 2], draws=64):
            assert row["gap"] == 0.0

    def test_exponential_scale(self):
        rows = mmi_gap(get_model("exponential-scale"), reciprocal_prior(), flat_prior(),
                       CompactSet(0.5, 2), [1, 2, 4], seed=515, draws=640)
        assert all(r["gap"] >= -2 * r["stderr"] for r in rows)

    def test_normal_against_bump(self):
        rows = mmi_gap(get_model("normal-location"), flat_prior(), beta_bump_prior(),
                       CompactSet(0, 1), [1, 2, 4], seed=616, draws=640)
        assert all(r["gap"] >= -2 * r["stderr"] for r in rows)


class TestStandardModel:
    def test_normal_lemma1(self):
        chk = standard_model_check(get_model("normal-location"), CompactSet(-1, 1))
        assert chk.satisfied
        assert chk.worst == pytest.approx(2.0, rel=1e-6)
        assert sorted(chk.witness) == [-1.0, 1.0]

    def test_uniform_pair(self):
        model = get_model("uniform-pair")
        assert not standard_model_check(model, CompactSet(1.5, 2.0), k=2, mode="lemma1").satisfied
        assert standard_model_check(model, CompactSet(1.5, 2.0), k=2, mode="lemma2", seed=3).satisfied

    def test_single_point(self):
        chk = standard_model_check(get_model("uniform-pair"), CompactSet(1.5, 2.0), grid=1)
        assert chk.satisfied and chk.worst == 0.0
