"""Expected information, missing-information gaps and standard-model probes.

The expected information from k replicates under a proper prior q on a
compact set is

    I{q | M^k} = E[ log q(theta | x) - log q(theta) ]
               = E[ log p(x | theta) - log m(x) ],

with theta ~ q, x ~ p(. | theta)^k and m the prior predictive density.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .divergence import KL_BUDGET, _log_norm, _log_scaled_integral, _obs_domain, kl_divergence
from .errors import DomainError, UnsupportedOperationError
from .models import IIDVector, Model
from .numerics import QuadratureSettings, integrate
from .priors import CompactSet, PriorFn, as_prior, log_prior_mass, sample_prior
from .streams import substream

__all__ = [
    "InformationEstimate", "AdditivityCheck", "StandardModelCheck", "expected_information",
    "information_additivity_check", "mmi_gap", "standard_model_check",
]

INFO_SETTINGS = QuadratureSettings(rel_tol=1e-8, abs_tol=1e-11)
_INNER = QuadratureSettings(rel_tol=1e-11, abs_tol_log=1e-13)
CLIP_TOL = 1e-8


@dataclass(frozen=True)
class InformationEstimate:
    value: float
    stderr: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def budget_exceeded(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class AdditivityCheck:
    """I{q | M^{nk}}, n I{q | M^k} and I{q | (M^n)^k} with their stderrs."""

    joint: InformationEstimate
    scaled: InformationEstimate
    nested: InformationEstimate


@dataclass(frozen=True)
class StandardModelCheck:
    satisfied: bool
    worst: float
    witness: tuple
    values: np.ndarray


def _clip(v: float) -> float:
    return 0.0 if -CLIP_TOL <= v < 0 else v


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _outcomes(model: Model, theta: int):
    """(outcome vector, log probability) pairs of one observation."""
    if isinstance(model, IIDVector):
        single = _outcomes(model.base, theta)
        for combo in itertools.product(single, repeat=model.n):
            yield (tuple(v for o, _ in combo for v in o), math.fsum(lp for _, lp in combo))
        return
    for x in model.support_points(theta):
        yield ((float(x),), float(model.logpdf(x, theta)))


def _exact_information(model: Model, q: PriorFn, region: CompactSet, k: int) -> InformationEstimate:
    thetas = region.points()
    log_q = q(thetas) - log_prior_mass(q, region)
    # distinct samples with their log probabilities, keyed by theta
    cache: dict[tuple, float] = {}
    terms = []
    for theta, lq in zip(thetas, log_q):
        single = list(_outcomes(model, int(theta)))
        for combo in itertools.product(single, repeat=k):
            data = tuple(v for o, _ in combo for v in o)
            lp = math.fsum(p for _, p in combo)
            if data not in cache:
                like = model.likelihood(np.array(data))
                cache[data] = _log_norm(model, q, like, region.lo, region.hi, None) \
                    - log_prior_mass(q, region)
            terms.append(math.exp(lq + lp) * (lp - cache[data]))
    return InformationEstimate(_clip(math.fsum(terms)), 0.0,
                               {"estimator": "exact", "samples": len(cache)})


def _quadrature_information(model: Model, q: PriorFn, region: CompactSet,
                            settings: QuadratureSettings) -> InformationEstimate:
    """One observation: integral over x of A(x) - m(x) log m(x), where
    A(x) = integral over theta of q(theta) p(x|theta) log p(x|theta)."""
    log_mass = log_prior_mass(q, region)

    def f(xs):
        out = np.empty(np.size(xs))
        for j, x in enumerate(np.ravel(xs)):
            like = model.likelihood(np.array([x]))
            log_m = _log_norm(model, q, like, region.lo, region.hi, _INNER) - log_mass
            if not math.isfinite(log_m):
                out[j] = 0.0
                continue
            lo, hi = like.restrict(region.lo, region.hi)

            def g(th):
                ll = like.fn(th)
                w = np.exp(ll + q.log_value(th) - log_mass)
                return np.where(w > 0, w * ll, 0.0)

            a = integrate(g, lo, hi, _INNER.with_(abs_tol=1e-14),
                          breakpoints=like.breakpoints(lo, hi, extra=q.log_value))
            out[j] = a - math.exp(log_m) * log_m
        return out

    x_lo, x_hi = _obs_domain(model, region)
    if math.isfinite(x_lo) and not math.isfinite(x_hi):
        value = _log_scaled_integral(f, x_lo, x_hi, settings)
    else:
        marks = [region.lo, region.hi] + [c + s * d for c in (region.lo, region.hi)
                                          for s in (-1, 1) for d in (1.0, 3.0, 8.0)]
        value = integrate(f, x_lo, x_hi, settings, breakpoints=marks)
    return InformationEstimate(_clip(value), 0.0, {"estimator": "quadrature"})


def _mc_values(model: Model, q: PriorFn, region: CompactSet, k: int, seed: int, draws: int,
               use_suffstat: bool, u_theta=None) -> np.ndarray:
    log_mass = log_prior_mass(q, region)
    vals = np.empty(draws)
    for j in range(draws):
        rng = substream(seed, "information", j)
        u = rng.random(1) if u_theta is None else u_theta[j:j + 1]
        theta = float(sample_prior(q, region, u)[0])
        x = model.sample(theta, rng, k)
        if use_suffstat:
            t = model.suffstat.reduce(np.asarray(x).reshape(-1))
            like = model.suffstat.likelihood(t, k)
        else:
            like = model.likelihood(x)
        log_m = _log_norm(model, q, like, region.lo, region.hi, _INNER) - log_mass
        vals[j] = like(theta) - log_m
    return vals


def _batch(vals: np.ndarray, batches: int) -> tuple[float, float, np.ndarray]:
    means = vals.reshape(batches, -1).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(batches)), means


def expected_information(model: Model, q, region: CompactSet, k: int = 1,
                         settings: QuadratureSettings | None = None,
                         estimator: str = "auto", seed: int = 0, draws: int = 3200,
                         batches: int = 32, use_suffstat: bool = False) -> InformationEstimate:
    """Expected information I{q | M^k} for the prior q restricted to ``region``.

    Parameters
    ----------
    estimator : {"auto", "exact", "quadrature", "monte-carlo"}
        ``auto`` enumerates discrete models exactly, integrates one
        continuous observation by quadrature and otherwise simulates.
    use_suffstat : bool
        Monte Carlo only: evaluate the posterior from the model's sufficient
        statistic instead of the raw sample.

    Returns
    -------
    InformationEstimate
        Value in nats, ``inf`` when it exceeds the divergence budget.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    q = as_prior(q)
    settings = settings or INFO_SETTINGS
    if estimator == "auto":
        if region.discrete:
            estimator = "exact"
        elif k == 1 and not isinstance(model, IIDVector):
            estimator = "quadrature"
        else:
            estimator = "monte-carlo"
    if estimator == "exact":
        if not region.discrete:
            raise UnsupportedOperationError("exact enumeration needs a discrete parameter set")
        est = _exact_information(model, q, region, k)
    elif estimator == "quadrature":
        if k != 1 or isinstance(model, IIDVector):
            raise UnsupportedOperationError("quadrature covers one scalar observation")
        est = _quadrature_information(model, q, region, settings)
    elif estimator == "monte-carlo":
        if use_suffstat and model.suffstat is None:
            raise UnsupportedOperationError(f"{model.name} has no sufficient statistic")
        if draws % batches:
            raise ValueError("draws must be a multiple of the batch count")
        vals = _mc_values(model, q, region, k, seed, draws, use_suffstat)
        value, se, _ = _batch(vals, batches)
        est = InformationEstimate(value, se, {"estimator": "monte-carlo", "draws": draws,
                                              "suffstat": use_suffstat})
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    if est.value > KL_BUDGET:
        return InformationEstimate(math.inf, est.stderr, dict(est.meta, budget_exceeded=True))
    return est


def information_additivity_check(model: Model, q, region: CompactSet, n: int, k: int = 1,
                                 seed: int = 0, settings: QuadratureSettings | None = None,
                                 estimator: str = "auto", draws: int = 3200) -> AdditivityCheck:
    """Compare I{q | M^{nk}}, n I{q | M^k} and I{q | (M^n)^k}.

    The first and third quantities are the same by definition; they are
    computed through different data paths (a flat nk-sample of the base
    model and k vector observations of the iid n-vector model, on distinct
    random streams).  For a proper prior, information from independent
    replicates is subadditive, so the first never exceeds the second.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    joint = expected_information(model, q, region, n * k, settings, estimator, seed, draws)
    single = joint if n == 1 else expected_information(model, q, region, k, settings,
                                                       estimator, seed, draws)
    scaled = InformationEstimate(n * single.value, n * single.stderr, dict(single.meta, scale=n))
    if n == 1:
        nested = joint
    else:
        nested = expected_information(IIDVector(model, n), q, region, k, settings,
                                      estimator, seed + 1, draws)
    return AdditivityCheck(joint, scaled, nested)


def mmi_gap(model: Model, pi, p, region: CompactSet, ks: Sequence[int],
            settings: QuadratureSettings | None = None, estimator: str = "monte-carlo",
            seed: int = 0, draws: int = 3200, batches: int = 32) -> list[dict]:
    """Series of I{pi_0 | M^k} - I{p_0 | M^k} over ``ks``.

    Monte Carlo runs use common random numbers: the same uniforms drive the
    theta draws (through each prior's inverse cdf) and the data draws, and
    the stderr is that of the paired difference.  Exact and quadrature runs
    report zero stderr.
    """
    pi, p = as_prior(pi), as_prior(p)
    out = []
    for k in ks:
        if estimator == "monte-carlo" and not region.discrete:
            u = np.array([substream(seed, "prior-draw", j).random() for j in range(draws)])
            a = _mc_values(model, pi, region, k, seed, draws, False, u_theta=u)
            b = _mc_values(model, p, region, k, seed, draws, False, u_theta=u)
            ga, _, _ = _batch(a, batches)
            gb, _, _ = _batch(b, batches)
            _, se, _ = _batch(a - b, batches)
            out.append({"k": int(k), "gap": ga - gb, "stderr": se, "info_pi": ga, "info_p": gb})
        else:
            ia = expected_information(model, pi, region, k, settings, estimator, seed, draws)
            ib = expected_information(model, p, region, k, settings, estimator, seed, draws)
            out.append({"k": int(k), "gap": ia.value - ib.value,
                        "stderr": math.hypot(ia.stderr, ib.stderr),
                        "info_pi": ia.value, "info_p": ib.value})
    return out


# ---------------------------------------------------------------------------
# standard-model probes
# ---------------------------------------------------------------------------

def _single_kl(model: Model, a: float, b: float, settings) -> float:
    """KL of one observation, p(. | a) against p(. | b)."""
    if a == b:
        return 0.0
    if model.discrete_obs:
        xs = np.unique(np.concatenate([model.support_points(int(a)), model.support_points(int(b))]))
        return kl_divergence(model.logpdf(xs, a), model.logpdf(xs, b))
    lo, hi = model.obs_support(a)
    marks = list(model.obs_support(b)) + list(model.obs_breakpoints(a))
    return kl_divergence(lambda x: model.logpdf(x, a), lambda x: model.logpdf(x, b),
                         lo, hi, settings, breakpoints=[m for m in marks if np.isfinite(m)])


def _entropy(model: Model, theta: float, settings) -> float:
    if model.discrete_obs:
        lp = model.logpdf(model.support_points(int(theta)), theta)
        return -math.fsum(np.exp(lp) * lp)
    lo, hi = model.obs_support(theta)

    def f(x):
        lp = model.logpdf(x, theta)
        return np.where(lp > -np.inf, -np.exp(lp) * lp, 0.0)

    return integrate(f, lo, hi, settings, breakpoints=list(model.obs_breakpoints(theta)))


def standard_model_check(model: Model, region: CompactSet, k: int = 1, mode: str = "lemma1",
                         settings: QuadratureSettings | None = None, grid: int = 15,
                         seed: int = 0, draws: int = 640) -> StandardModelCheck:
    """Numerical probes of the finiteness conditions on a compact set.

    ``lemma1`` evaluates the divergence of p(t_k | theta) from
    p(t_k | theta') on a ``grid`` x ``grid`` lattice, as k times the
    single-observation divergence, and passes when the supremum is finite.
    ``lemma2`` checks that the entropy of p(t_k | theta) (k times the
    single-observation entropy) is finite and bounded below over the
    lattice, and that the prior-predictive entropy under a flat prior on the
    region is finite (Monte Carlo for k > 1).  The lattice is fixed; this is
    a diagnostic, not a proof.

    Returns
    -------
    StandardModelCheck
        ``worst`` is the supremum (lemma1) or infimum (lemma2) found and
        ``witness`` the parameter values attaining it.
    """
    settings = settings or INFO_SETTINGS.with_(rel_tol=1e-7)
    thetas = region.points() if region.discrete else np.linspace(region.lo, region.hi, grid)
    if mode == "lemma1":
        vals = np.array([[k * _single_kl(model, a, b, settings) for b in thetas] for a in thetas])
        idx = np.unravel_index(int(np.argmax(vals)), vals.shape)
        worst = float(vals[idx])
        return StandardModelCheck(bool(np.isfinite(worst)), worst,
                                  (float(thetas[idx[0]]), float(thetas[idx[1]])), vals)
    if mode == "lemma2":
        ent = np.array([k * _entropy(model, t, settings) for t in thetas])
        j = int(np.argmin(ent))
        flat = PriorFn(lambda th: np.zeros_like(np.asarray(th, dtype=float)), "uniform")
        if k == 1 and not region.discrete:
            marg = _predictive_entropy(model, flat, region, settings)
        else:
            vals = _mc_values(model, flat, region, k, seed, draws, False)
            # E[-log m(x)] = E[log p(x|theta) - log m(x)] - E[log p(x|theta)]
            marg = float(np.mean(vals)) + float(np.mean(ent))
        ok = bool(np.all(np.isfinite(ent)) and np.isfinite(marg))
        return StandardModelCheck(ok, float(ent[j]), (float(thetas[j]), marg), ent)
    raise ValueError(f"unknown mode {mode!r}")


def _predictive_entropy(model: Model, q: PriorFn, region: CompactSet, settings) -> float:
    log_mass = log_prior_mass(q, region)

    def f(xs):
        out = np.empty(np.size(xs))
        for j, x in enumerate(np.ravel(xs)):
            like = model.likelihood(np.array([x]))
            log_m = _log_norm(model, q, like, region.lo, region.hi, _INNER) - log_mass
            out[j] = -math.exp(log_m) * log_m if math.isfinite(log_m) else 0.0
        return out

    x_lo, x_hi = _obs_domain(model, region)
    return integrate(f, x_lo, x_hi, settings,
                     breakpoints=[region.lo, region.hi, region.lo - 3, region.hi + 3])
