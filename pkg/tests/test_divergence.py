import math

import numpy as np
import pytest
from scipy import special, stats

from refprior.divergence import (CompactSequence, closed_form_location_discrepancy,
                                 discrepancy_monotonicity, expected_discrepancy,
                                 fmn_discrepancy_exact, kl_divergence, log_transform_base,
                                 permissibility_verdict, posterior_logpdf, propriety_check,
                                 tail_condition_check, truncation_kl_identity)
from refprior.errors import DomainError, ImproperPosteriorError, InvariantViolation
from refprior.divergence import DiscrepancyEstimate
from refprior.models import get_model
from refprior.numerics import integrate
from refprior.priors import CompactSet, flat_prior, reciprocal_prior

LOG3 = math.log(3.0)


def normal_logpdf(mu):
    return lambda t: stats.norm.logpdf(t, mu)


class TestKL:
    def test_identical(self):
        assert kl_divergence(normal_logpdf(0), normal_logpdf(0), -math.inf, math.inf) == pytest.approx(0, abs=1e-8)
        p = np.log([0.2, 0.5, 0.3])
        assert kl_divergence(p, p) == 0.0

    def test_gaussian_shift(self):
        val = kl_divergence(normal_logpdf(0), normal_logpdf(1), -math.inf, math.inf)
        assert val == pytest.approx(0.5, abs=1e-9)

    def test_zero_of_q_signals_inf(self):
        p = np.log([1 / 3, 1 / 3, 1 / 3])
        with np.errstate(divide="ignore"):
            q = np.log([1.0, 0.0, 0.0])
        assert kl_divergence(p, q) == math.inf

    def test_budget(self):
        assert kl_divergence(normal_logpdf(0), normal_logpdf(20), -math.inf, math.inf) == math.inf

    def test_limits_required(self):
        with pytest.raises(DomainError):
            kl_divergence(normal_logpdf(0), normal_logpdf(1))

    def test_random_posterior_pairs_nonnegative(self):
        rng = np.random.default_rng(2718)
        cases = [("normal-location", flat_prior(), (-3, 3)),
                 ("exponential-scale", reciprocal_prior(), (0.3, 3)),
                 ("uniform-scale", reciprocal_prior(), (0.3, 3)),
                 ("expshift-location", flat_prior(), (-3, 3))]
        count = 0
        for j in range(200):
            name, prior, (lo, hi) = cases[j % len(cases)]
            model = get_model(name)
            theta = rng.uniform(lo, hi)
            x1 = model.sample(theta, rng, int(rng.integers(1, 4)))
            x2 = model.sample(rng.uniform(lo, hi), rng, x1.size)
            # the truncation region contains the simulating theta
            region = CompactSet(rng.uniform(lo, theta), rng.uniform(theta, hi + 1))
            p = posterior_logpdf(model, prior, x1, region)
            q = posterior_logpdf(model, prior, x2 if j % 2 else x1)
            val = kl_divergence(p, q, p.lo, p.hi, breakpoints=p.breakpoints())
            assert val >= 0.0
            count += 1
        assert count == 200


class TestPosterior:
    def test_normal_conjugate(self):
        post = posterior_logpdf(get_model("normal-location"), flat_prior(), [0.0])
        t = np.linspace(-4, 4, 17)
        np.testing.assert_allclose(post(t), stats.norm.logpdf(t), atol=1e-12)

    def test_normalized(self):
        post = posterior_logpdf(get_model("exponential-scale"), reciprocal_prior(), [1.0, 2.5])
        mass = integrate(lambda t: np.exp(post(t)), post.lo, post.hi, breakpoints=post.breakpoints())
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_uniform_pair_reduced_form(self):
        model = get_model("uniform-pair")
        x = model.sample(2.0, np.random.default_rng(4), 12)
        t1, t2 = x.min(), x.max()
        work = CompactSet(1.05, 12.0)
        post = posterior_logpdf(model, flat_prior(), x, work)
        lo, hi = math.sqrt(t2), t1
        assert (post.lo, post.hi) == pytest.approx((lo, hi), rel=1e-14)
        th = np.linspace(lo, hi, 9)[1:-1]
        m_k = integrate(lambda s: (s * s - s) ** -12.0, lo, hi)
        np.testing.assert_allclose(np.exp(post(th)), (th * th - th) ** -12.0 / m_k, rtol=1e-8)
        mass = integrate(lambda s: np.exp(post(s)), lo, hi)
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_normal_mixture_improper(self):
        with pytest.raises(ImproperPosteriorError):
            posterior_logpdf(get_model("normal-mixture"), flat_prior(), [0.3])


class TestTruncationIdentity:
    def test_full_mass(self):
        lhs, rhs = truncation_kl_identity(get_model("normal-location"), flat_prior(), [0.0],
                                          CompactSet(-40, 40))
        assert lhs == pytest.approx(0.0, abs=1e-9) and rhs == pytest.approx(0.0, abs=1e-9)

    def test_normal_interval(self):
        lhs, rhs = truncation_kl_identity(get_model("normal-location"), flat_prior(), [0.0],
                                          CompactSet(-1, 1))
        expected = -math.log(special.ndtr(1) - special.ndtr(-1))
        assert lhs == pytest.approx(expected, abs=1e-6)
        assert rhs == pytest.approx(expected, abs=1e-6)

    def test_fmn(self):
        # preimages of 4 are {2, 8, 9}; {1, 2} keeps one of three
        lhs, rhs = truncation_kl_identity(get_model("fmn-discrete"), flat_prior(), [4],
                                          CompactSet(1, 2, discrete=True))
        assert lhs == pytest.approx(LOG3, abs=1e-12) and rhs == pytest.approx(LOG3, abs=1e-12)

    def test_random_cases(self):
        rng = np.random.default_rng(31415)
        cases = [("normal-location", flat_prior(), (-3, 3)),
                 ("exponential-scale", reciprocal_prior(), (0.3, 3)),
                 ("uniform-scale", reciprocal_prior(), (0.3, 3)),
                 ("expshift-location", flat_prior(), (-3, 3)),
                 ("fmn-discrete", flat_prior(), (1, 40))]
        for j in range(50):
            name, prior, (lo, hi) = cases[j % len(cases)]
            model = get_model(name)
            if name == "fmn-discrete":
                theta = int(rng.integers(lo, hi))
                region = CompactSet(1, int(rng.integers(theta, hi + 1)), discrete=True)
            else:
                theta = rng.uniform(lo, hi)
                a = rng.uniform(lo, theta)
                region = CompactSet(a, rng.uniform(theta, hi + 1))
            x = model.sample(theta, rng, int(rng.integers(1, 3)))
            lhs, rhs = truncation_kl_identity(model, prior, x, region)
            assert abs(lhs - rhs) <= 1e-6, (name, x, region)


class TestPropriety:
    def test_mixture_improper(self):
        for x in ([0.3], [-1.0, 2.0, 0.5]):
            assert propriety_check(get_model("normal-mixture"), flat_prior(), x).status == "improper"

    def test_exponential_scale_reciprocal(self):
        check = propriety_check(get_model("exponential-scale"), reciprocal_prior(), [1.0])
        assert check.status == "proper"
        assert check.log_normalizer == pytest.approx(0.0, abs=1e-8)

    def test_normal_flat(self):
        check = propriety_check(get_model("normal-location"), flat_prior(), [0.0])
        assert check.status == "proper" and check.log_normalizer == pytest.approx(0.0, abs=1e-12)

    def test_normal_two_points(self):
        check = propriety_check(get_model("normal-location"), flat_prior(), [0.0, 1.0])
        expected = -0.5 * 0.5 - math.log(2 * math.pi) + 0.5 * math.log(math.pi)
        assert check.status == "proper" and check.log_normalizer == pytest.approx(expected, abs=1e-8)


class TestExpectedDiscrepancy:
    @pytest.mark.parametrize("i", [1, 2, 4])
    def test_normal_closed_form(self, i):
        est = expected_discrepancy(get_model("normal-location"), flat_prior(), CompactSet(-i, i))
        ref = closed_form_location_discrepancy(get_model("normal-location").base, i)
        assert abs(est.value - ref) < 1e-4 and est.verdict == "converging"

    def test_expshift_closed_form(self):
        model = get_model("expshift-location")
        est = expected_discrepancy(model, flat_prior(), CompactSet(-1, 1))
        assert est.value == pytest.approx(closed_form_location_discrepancy(model.base, 1), abs=1e-6)

    def test_monte_carlo_agrees(self):
        model = get_model("normal-location")
        mc = expected_discrepancy(model, flat_prior(), CompactSet(-1, 1), estimator="monte-carlo",
                                  seed=404, draws=640)
        quad = expected_discrepancy(model, flat_prior(), CompactSet(-1, 1))
        assert abs(mc.value - quad.value) <= 3 * mc.stderr

    def test_fmn_is_exact(self):
        est = expected_discrepancy(get_model("fmn-discrete"), flat_prior(), CompactSet(1, 10, discrete=True))
        assert est.value == fmn_discrepancy_exact(10) and est.stderr == 0.0

    def test_value_must_be_nonnegative(self):
        with pytest.raises(InvariantViolation):
            DiscrepancyEstimate(-0.1)


class TestFMN:
    def test_single_set(self):
        assert fmn_discrepancy_exact(1) >= 0.0

    def test_uniform_bounded_and_deterministic(self):
        for i in (1, 2, 5, 10, 100, 1000):
            v = fmn_discrepancy_exact(i)
            assert 0.0 <= v <= LOG3
            assert v == fmn_discrepancy_exact(i)

    def test_uniform_limit(self):
        # x near the top of the reachable range loses one of three candidates
        assert fmn_discrepancy_exact(1000) == pytest.approx(0.5 * LOG3, abs=1e-3)

    def test_reciprocal_decreases(self):
        vals = [fmn_discrepancy_exact(i, "reciprocal") for i in (10, 100, 1000)]
        assert np.all(np.diff(vals) < 0)
        assert vals[-1] < fmn_discrepancy_exact(1000, "uniform")

    def test_domain(self):
        with pytest.raises(DomainError):
            fmn_discrepancy_exact(0)


class TestTailCondition:
    @pytest.mark.parametrize("name", ["exponential-scale", "uniform-scale"])
    def test_scale_models_pass(self, name):
        assert tail_condition_check(get_model(name), "scale", eps=1.0).satisfied

    @pytest.mark.parametrize("name", ["normal-location", "expshift-location"])
    def test_light_location_tails_pass(self, name):
        assert tail_condition_check(get_model(name), "location", eps=1.0).satisfied

    @pytest.mark.parametrize("eps", [0.01, 0.5, 1.0])
    def test_logtail_fails(self, eps):
        check = tail_condition_check(get_model("logtail-location"), "location", eps=eps)
        assert not check.satisfied
        assert np.all(np.diff(check.log_witness["+"][-10:]) > 0)

    @pytest.mark.parametrize("name", ["exponential-scale", "uniform-scale"])
    def test_log_transform_route(self, name):
        base = get_model(name).base
        direct = tail_condition_check(base, "scale", eps=1.0)
        probes = np.log(np.geomspace(1.0, 700.0, 60))
        via_log = tail_condition_check(log_transform_base(base), "location", eps=1.0, probes=probes)
        assert direct.satisfied == via_log.satisfied

    def test_bad_eps(self):
        with pytest.raises(DomainError):
            tail_condition_check(get_model("normal-location"), eps=0.0)


class TestMonotonicity:
    def test_degenerate_sizes(self):
        a, b = discrepancy_monotonicity(get_model("normal-location"), flat_prior(), CompactSet(-3, 3),
                                        (1, 1), seed=5, draws=64)
        assert a.value == b.value and a.stderr == b.stderr

    def test_exponential_scale(self):
        a, b = discrepancy_monotonicity(get_model("exponential-scale"), reciprocal_prior(),
                                        CompactSet(0.5, 2), (1, 2), seed=6, draws=320)
        assert b.value <= a.value + 2 * a.meta["paired_stderr"]


class TestCompactSequence:
    @pytest.mark.parametrize("kind", ["symmetric", "log-symmetric", "discrete"])
    def test_nested(self, kind):
        seq = CompactSequence.from_kind(kind)
        seq.validate([1, 2, 3, 5, 8, 13])
        sets = [seq(i) for i in (1, 10, 100)]
        assert sets[0].lo >= sets[1].lo >= sets[2].lo and sets[0].hi <= sets[1].hi <= sets[2].hi

    def test_unknown(self):
        with pytest.raises(KeyError):
            CompactSequence.from_kind("spiral")


class TestVerdict:
    def test_normal_permissible(self):
        v = permissibility_verdict(get_model("normal-location"), flat_prior(),
                                   CompactSequence.symmetric(), [1, 2, 4, 8])
        assert v.status == "permissible-evidence"
        assert v.propriety.status == "proper"

    def test_fmn_not_permissible(self):
        v = permissibility_verdict(get_model("fmn-discrete"), flat_prior(),
                                   CompactSequence.discrete(), [10, 100, 1000])
        assert v.status == "not-permissible-evidence"

    def test_fmn_reciprocal_permissible(self):
        v = permissibility_verdict(get_model("fmn-discrete"), reciprocal_prior(),
                                   CompactSequence.discrete(), [10, 100, 1000])
        assert v.status == "permissible-evidence"

    def test_mixture_improper(self):
        v = permissibility_verdict(get_model("normal-mixture"), flat_prior(),
                                   CompactSequence.symmetric(), [1, 2])
        assert v.status == "not-permissible-evidence" and v.propriety.status == "improper"
